"""Effective Hamiltonian, Aubry sets, level curves and sections from weak KAM subsolutions."""

from hpol_lab.weak_kam.alpha import (
    AlphaConvergenceError,
    AlphaResult,
    InfeasibleLPError,
    OccupationMeasure,
    alpha_certified,
    alpha_lower,
    alpha_result,
    alpha_upper,
    rotation_vector,
)
from hpol_lab.weak_kam.aubry import (
    AubryEstimate,
    aubry_estimate,
    face_constancy_probe,
    mather_proxy,
    semicontinuity_probe,
)
from hpol_lab.weak_kam.grid import GridField, grid_points
from hpol_lab.weak_kam.levels import (
    ClassificationConflict,
    LevelCurveSample,
    classify_all,
    classify_case,
    level_curve,
)
from hpol_lab.weak_kam.section import RegularityError, SectionConstructionError, construct_section

__all__ = [
    "AlphaConvergenceError", "AlphaResult", "InfeasibleLPError", "OccupationMeasure",
    "alpha_certified", "alpha_lower", "alpha_result", "alpha_upper", "rotation_vector",
    "AubryEstimate", "aubry_estimate", "face_constancy_probe", "mather_proxy",
    "semicontinuity_probe", "GridField", "grid_points", "ClassificationConflict",
    "LevelCurveSample", "classify_all", "classify_case", "level_curve", "RegularityError",
    "SectionConstructionError", "construct_section",
]
