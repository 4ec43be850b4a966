"""Bespoke gate-level circuits for small MLP and SVM models, with hardware-driven
coefficient approximation and activity-driven netlist pruning."""

__version__ = "0.1.0"

from .cells import CellLibrary, default_library, load_library
from .netlist import Netlist, area, optimize, validate
from .model import FixedPointSpec, QuantizedModel, golden_batch, golden_infer, quantize_model
from .synth import area_bm, gen_model_circuit, gen_mult_const
from .sim import profile, simulate
from .coeff_approx import approximate_model
from .prune import candidates, prune
from .dse import explore_cross, explore_prune, pareto

__all__ = [
    "CellLibrary", "default_library", "load_library", "Netlist", "area", "optimize", "validate",
    "FixedPointSpec", "QuantizedModel", "golden_batch", "golden_infer", "quantize_model", "area_bm",
    "gen_model_circuit", "gen_mult_const", "profile", "simulate", "approximate_model", "candidates",
    "prune", "explore_cross", "explore_prune", "pareto",
]
