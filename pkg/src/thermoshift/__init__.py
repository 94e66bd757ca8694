"""Leaf measures, product measures and equilibrium states on shift spaces."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover - source checkout without install
    __version__ = "0.0.0"

from .errors import *  # noqa: F401,F403
from .intervals import Interval
from .leaf import CylinderMeasure, check_mass_bounds, check_scaling, gibbs_ratio, leaf_measure
from .oracle import entropy_and_integral, oracle_measure, oracle_pressure, oracle_pressure_data
from .potentials import Potential, birkhoff_sum, constant_potential, potential_from_config
from .pressure import (
    PressureEstimate,
    QCoefficients,
    WordCollection,
    factorial_pressure,
    normalize_potential,
    partition_sum,
    pressure_estimate,
    q_coefficients,
)
from .product import (
    LambdaMeasure,
    MuMeasure,
    Rectangle,
    check_T_invariance,
    check_q_independence,
    lambda_build,
    mu_build,
    return_structure,
)
from .symbolic import Point, ShiftPresentation, bracket, preset, shift_from_config
from .sync import SyncParams, SyncReport, sync_pipeline
