"""Persistence: atomic writes, CSV/JSON/binary formats and run manifests.

Floats are written with ``repr`` so that reruns give byte-identical files.
Manifests carry wall-clock timings and are therefore the only outputs that
differ between reruns.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .density import ChartGrid, DensityGrid
from .observation import ObservationSequence

SCHEMA_PATH = Path(__file__).with_name("data") / "csv_schema.yaml"


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return "nan"
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return repr(f)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    for r in rows:
        lines.append(",".join(_fmt(v) for v in r))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, comments=()) -> Path:
    return atomic_write_text(path, csv_text(columns, rows, comments))


def read_csv(path):
    """Returns ``(comments, columns, data)`` with data as a float array."""
    comments, body = [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif line.strip():
            body.append(line)
    columns = body[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in body[1:]], dtype=float)
    return comments, columns, data.reshape(-1, len(columns))


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json_text(obj))


def read_json(path):
    return json.loads(Path(path).read_text())


# -- observations ----------------------------------------------------------------

def observations_csv(obs: ObservationSequence) -> str:
    dy, dx = obs.y_values.shape[1], obs.x_truth.shape[1]
    cols = ["step"] + [f"y{i}" for i in range(dy)] + [f"x{i}" for i in range(dx)]
    rows = ([k, *obs.y_values[k], *obs.x_truth[k]] for k in range(len(obs)))
    return csv_text(cols, rows, [f"seed={obs.rng_seed}", f"realization={obs.realization}"])


def write_observations(path, obs: ObservationSequence) -> Path:
    return atomic_write_text(path, observations_csv(obs))


def read_observations(path) -> ObservationSequence:
    comments, cols, data = read_csv(path)
    meta = dict(c.split("=", 1) for c in comments if "=" in c)
    yi = [i for i, c in enumerate(cols) if c.startswith("y")]
    xi = [i for i, c in enumerate(cols) if c.startswith("x")]
    return ObservationSequence(data[:, yi], data[:, xi], int(meta.get("seed", 0)),
                               int(meta.get("realization", 0)))


# -- densities -------------------------------------------------------------------

def density_csv(p: DensityGrid) -> str:
    return csv_text(["cell", "value"], ((i, v) for i, v in enumerate(p.values)),
                    [f"chart={p.grid.chart}", "shape=" + "x".join(map(str, p.grid.shape))])


def write_density_binary(path, p: DensityGrid) -> Path:
    """Little-endian float64 dump of active-cell values after a JSON header.

    Layout: 4-byte unsigned header length, UTF-8 JSON header, payload.
    """
    header = json.dumps({"chart": p.grid.chart, "shape": list(p.grid.shape), "cells": p.grid.size,
                         "dtype": "<f8", "order": "C"}, sort_keys=True).encode()
    payload = np.ascontiguousarray(p.values, dtype="<f8").tobytes()
    return atomic_write_bytes(path, struct.pack("<I", len(header)) + header + payload)


def read_density_binary(path) -> DensityGrid:
    raw = Path(path).read_bytes()
    (n,) = struct.unpack("<I", raw[:4])
    header = json.loads(raw[4:4 + n])
    grid = ChartGrid(header["chart"], header["shape"])
    values = np.frombuffer(raw[4 + n:], dtype=header["dtype"]).astype(float)
    return DensityGrid(grid, values)


# -- manifests -------------------------------------------------------------------

def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seeds: List[int]
    version: str
    artifacts: Dict[str, str] = field(default_factory=dict)  # relative path -> sha256
    timings: Dict[str, float] = field(default_factory=dict)  # seconds

    def add(self, path, root) -> None:
        p = Path(path)
        self.artifacts[str(p.relative_to(root))] = sha256_file(p)

    def write(self, out_dir) -> Path:
        return write_json(Path(out_dir) / f"manifest_{self.command}.json", asdict(self))


def load_schema() -> dict:
    import yaml
    return yaml.safe_load(SCHEMA_PATH.read_text())
