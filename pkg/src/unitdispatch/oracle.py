"""Brute-force reference optimiser for fleets of at most three units.

Nothing here uses the allocator's stationarity machinery: the feasible
simplex is enumerated on a grid, then the best point is refined by
exhaustive search in a shrinking box.  It is slow on purpose and exists to
check the solvers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .allocator import Allocation, make_allocation
from .curves import Fleet
from .errors import DomainError, InfeasibleError, UnsupportedError

MAX_ORACLE_UNITS = 3
REFINEMENTS = 20
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class OracleResult:
    allocation: Allocation
    grid_step: float
    depth: int


def _axis(hi, step):
    return np.unique(np.append(np.arange(0.0, hi, step), hi))


def _evaluate(curves, cols, p_t):
    """Outputs of the points whose first n-1 coordinates are ``cols``; infeasible -> -inf."""
    last = p_t - np.sum(cols, axis=0) if cols else np.full(1, p_t)
    feasible = (last >= 0) & (last <= curves[-1].p_max)
    last = np.clip(last, 0.0, curves[-1].p_max)
    total = curves[-1].output(last)
    for c, col in zip(curves, cols):
        total = total + c.output(col)
    return np.where(feasible, total, -np.inf), last


def _argbest(w):
    # first maximum in lexicographic point order = lexicographically smallest loads
    return int(np.argmax(w))


def oracle_allocate(units, p_t: float, step: float) -> OracleResult:
    units = tuple(units.units if isinstance(units, Fleet) else units)
    if not 1 <= len(units) <= MAX_ORACLE_UNITS:
        raise UnsupportedError(f"oracle supports <= {MAX_ORACLE_UNITS} units, got {len(units)}")
    if not step > 0:
        raise DomainError(f"step must be > 0, got {step!r}")
    if p_t < 0:
        raise DomainError(f"total input must be >= 0, got {p_t!r}")
    caps = [u.curve.p_max for u in units]
    if p_t > math.fsum(caps) * (1.0 + 1e-12):
        raise InfeasibleError(
            f"total input {p_t!r} exceeds the capacity {math.fsum(caps)!r}", limit=math.fsum(caps)
        )
    curves = [u.curve for u in units]
    n = len(units)
    if n == 1 or p_t == 0:
        loads = [p_t] if n == 1 else [0.0] * n
        return OracleResult(make_allocation(units, loads, p_t), step, 0)

    axes = [_axis(min(caps[k], p_t), step) for k in range(n - 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    cols = [m.ravel() for m in mesh]
    w, last = _evaluate(curves, cols, p_t)
    if not np.isfinite(w).any():
        raise InfeasibleError(f"no grid point splits {p_t!r}; use a finer step", limit=None)
    i = _argbest(w)
    point = [float(c[i]) for c in cols]
    best_w = float(w[i])

    h = step
    for _ in range(REFINEMENTS):
        h *= 0.5
        offsets = np.arange(-2, 3) * h
        local_axes = [
            np.unique(np.clip(point[k] + offsets, 0.0, min(caps[k], p_t))) for k in range(n - 1)
        ]
        mesh = np.meshgrid(*local_axes, indexing="ij")
        cols = [m.ravel() for m in mesh]
        w, _ = _evaluate(curves, cols, p_t)
        i = _argbest(w)
        if w[i] >= best_w:
            point = [float(c[i]) for c in cols]
            best_w = float(w[i])

    loads = point + [min(max(p_t - math.fsum(point), 0.0), caps[-1])]
    return OracleResult(make_allocation(units, loads, p_t), step, REFINEMENTS)


def oracle_commitment(fleet: Fleet, p_t: float, step: float):
    """Best subset by exhaustive search; returns ``(subset, OracleResult)``.

    Ties go to fewer units, then to the lexicographically smaller ids.
    """
    if len(fleet) > MAX_ORACLE_UNITS:
        raise UnsupportedError(f"oracle supports <= {MAX_ORACLE_UNITS} units, got {len(fleet)}")
    if p_t < 0:
        raise DomainError(f"total input must be >= 0, got {p_t!r}")
    if p_t > fleet.capacity * (1.0 + 1e-12):
        raise InfeasibleError(
            f"total input {p_t!r} exceeds the fleet capacity {fleet.capacity!r}",
            limit=fleet.capacity,
        )
    if p_t == 0:
        return (), OracleResult(Allocation((), (), 0.0, 0.0, 0.0), step, 0)
    subsets = []
    for k in range(1, len(fleet) + 1):
        for combo in itertools.combinations(fleet.units, k):
            if math.fsum(u.curve.p_max for u in combo) >= p_t * (1.0 - 1e-12):
                subsets.append(combo)
    subsets.sort(key=lambda c: (len(c), tuple(sorted(u.id for u in c))))
    best_ids, best = None, None
    for combo in subsets:
        res = oracle_allocate(combo, p_t, step)
        if best is None or res.allocation.w_t > best.allocation.w_t * (1.0 + TIE_RTOL):
            best_ids, best = tuple(u.id for u in combo), res
    return best_ids, best
