"""Filter stability for observed hyperbolic dynamics: grid filters, cones and stability experiments."""

__version__ = "0.1.0"

from .config import Config, ConfigError, load_config, parse_config
from .density import ChartGrid, DensityGrid, TestFunction, make_transfer
from .filtering import DegenerateFilterError, FilterState, filter_run, pullback_run
from .manifold import CatMap, Solenoid, make_map
from .observation import VonMises, WrappedGaussian, simulate_joint

__all__ = ["CatMap", "ChartGrid", "Config", "ConfigError", "DegenerateFilterError", "DensityGrid",
           "FilterState", "Solenoid", "TestFunction", "VonMises", "WrappedGaussian", "filter_run",
           "load_config", "make_map", "make_transfer", "parse_config", "pullback_run", "simulate_joint"]
