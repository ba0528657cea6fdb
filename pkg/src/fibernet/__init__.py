"""Failure of random fiber networks modelled with softening beam hinges."""

from .beam import FiberSection, reference_fiber
from .element import SchemeConfig
from .netgen import NetworkSpec, NotchSpec, apply_notch, boundary_sets, generate
from .network import NetworkModel, chain_model
from .solver import SolveConfig, SolveReport, run

__version__ = "0.1.0"

__all__ = [
    "FiberSection", "NetworkModel", "NetworkSpec", "NotchSpec", "SchemeConfig", "SolveConfig",
    "SolveReport", "apply_notch", "boundary_sets", "chain_model", "generate", "reference_fiber",
    "run",
]
