"""Bass-type Skorokhod embeddings into one-dimensional diffusions.

Reduce a diffusion to natural scale, decide whether finite, integrable or
bounded embeddings of a target law exist, and build the embedding by
integrating the time-change ODE along simulated paths.
"""

from .bass import BassMaps, build_maps
from .classifier import EmbeddabilityVerdict, check_bounded_sufficient, classify
from .config import RunConfig, parse_config
from .engine import (EngineConfig, EmbeddingReport, StopRecord, picard_delta, prepare,
                     run_monte_carlo, simulate_centred, simulate_noncentred, step_delta)
from .errors import NumericalError, SEPError, ValidationError
from .feller import classify_boundaries, linear_growth_limit, make_q, q_eval
from .model import (DiffusionSpec, TargetLaw, build_scale, pushforward_target,
                    target_mean_in_scale, to_martingale)
from .presets import get_preset, preset_registry
from .report import emit_report
from .stats import ks_statistic
from . import targets

__all__ = [
    "BassMaps", "DiffusionSpec", "EmbeddabilityVerdict", "EmbeddingReport", "EngineConfig",
    "NumericalError", "RunConfig", "SEPError", "StopRecord", "TargetLaw", "ValidationError",
    "build_maps", "build_scale", "check_bounded_sufficient", "classify", "classify_boundaries",
    "emit_report", "get_preset", "ks_statistic", "linear_growth_limit", "make_q",
    "parse_config", "picard_delta", "prepare", "preset_registry", "pushforward_target",
    "q_eval", "run_monte_carlo", "simulate_centred", "simulate_noncentred", "step_delta",
    "target_mean_in_scale", "targets", "to_martingale",
]
__version__ = "0.1.0"
