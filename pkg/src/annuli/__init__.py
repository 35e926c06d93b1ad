"""Extremal radial stretchings between annuli under radial conformal metrics."""

__version__ = "0.1.0"

from .errors import AccuracyError, AnnuliError, PreconditionError
from .functionals import (
    FunctionalReport,
    Regime,
    classify_regime,
    energy_radial,
    fikin_bound_check,
    mean_distortion_radial,
    fat_lower_bound,
)
from .maps import RadialMap, derivatives, evaluate, harmonicity_residual, hopf_check, nitsche_map, power_map
from .metric import RadialMetric, builtin_metric, check_regularity, gauss_curvature, monotonicity_of_h
from .minseq import build_element, limit_study, splice_radius
from .nitsche import AnnulusGeometry, NitscheProfile, critical_profile, modulus, nitsche_bound, solve_c
from .numerics import QuadratureConfig, RootConfig, find_root, integrate
