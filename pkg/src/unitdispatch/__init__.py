"""Efficiency-optimal load distribution and unit switching for multi-unit systems."""

from .allocator import (
    Allocation,
    StationaryCandidate,
    allocate_best,
    allocate_similar,
    min_input_for_output,
    stationary_candidates,
)
from .commitment import (
    Regime,
    SwitchingSchedule,
    best_commitment,
    feasible_subsets,
    sweep,
    switching_schedule,
    verify_theorem2,
)
from .curves import (
    EfficiencyCurve,
    Fleet,
    SimilarFamily,
    Unit,
    detect_family,
    eval_efficiency,
    eval_marginal_output,
    eval_output,
    inverse_efficiency,
    peak_point,
    similarity_factor,
    validate,
)
from .errors import (
    CapacityError,
    DispatchError,
    DomainError,
    InfeasibleError,
    InvalidCurveError,
    NoSolutionError,
    UnsupportedError,
)
from .fleetfile import FleetFile, fixture_path, load_fleet, parse_fleet
from .oracle import OracleResult, oracle_allocate, oracle_commitment

__version__ = "0.1.0"
