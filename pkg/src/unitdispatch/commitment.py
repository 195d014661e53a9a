"""Which units run: subset selection, switching schedules and sweeps."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

from .allocator import W_RTOL, Allocation, allocate_best
from .curves import Fleet, detect_family
from .errors import DomainError, InfeasibleError

BREAKPOINT_TOL = 1e-6
EQUAL_ETA_TOL = 1e-4
AT_CAP_TOL = 1e-6


@dataclass(frozen=True)
class Regime:
    active_set: tuple
    p_lo: float
    p_hi: float
    rule: str  # "proportional" for similar families, else "stationary"


@dataclass(frozen=True)
class SwitchingSchedule:
    regimes: tuple
    breakpoints: tuple
    # output of the two neighbouring regimes at each breakpoint
    outputs: tuple = field(default=())


@dataclass(frozen=True)
class BreakpointCheck:
    p: float
    left: tuple
    right: tuple
    eta_left: float
    eta_right: float
    capped_units: tuple
    ok: bool
    reason: str


@dataclass(frozen=True)
class SweepRow:
    p_t: float
    active_set: tuple
    allocation: Allocation
    w_t: float
    eta_t: float


def subset_key(subset):
    return (len(subset), tuple(sorted(subset)))


def feasible_subsets(fleet: Fleet, p_t: float) -> list:
    """Non-empty subsets of unit ids able to absorb ``p_t``, ordered by size then ids."""
    if p_t < 0:
        raise DomainError(f"total input must be >= 0, got {p_t!r}")
    out = []
    for k in range(1, len(fleet) + 1):
        for combo in itertools.combinations(fleet.units, k):
            if math.fsum(u.curve.p_max for u in combo) >= p_t * (1.0 - 1e-12):
                out.append(tuple(u.id for u in combo))
    out.sort(key=subset_key)
    return out


def _beats(w_new, w_best, w_rtol):
    if math.isinf(w_best):
        return w_new > w_best
    return w_new > w_best + w_rtol * abs(w_best)


def best_commitment(fleet: Fleet, p_t: float, *, w_rtol: float = W_RTOL,
                    safety_net: bool = True):
    """Best running subset and its allocation for total input ``p_t``.

    Ties (within ``w_rtol`` relative output) go to fewer units, then to the
    lexicographically smaller id tuple.  At ``p_t == 0`` nothing runs and
    the empty subset is returned.
    """
    if p_t < 0 or math.isnan(p_t):
        raise DomainError(f"total input must be >= 0, got {p_t!r}")
    cap = fleet.capacity
    if p_t > cap * (1.0 + 1e-12):
        raise InfeasibleError(
            f"total input {p_t!r} exceeds the fleet capacity {cap!r}", limit=cap
        )
    if p_t == 0:
        return (), Allocation((), (), 0.0, 0.0, 0.0)
    best_subset, best = None, None
    for subset in feasible_subsets(fleet, p_t):
        alloc = allocate_best(fleet.subset(subset), p_t, w_rtol=w_rtol, safety_net=safety_net)
        if best is None or _beats(alloc.w_t, best.w_t, w_rtol):
            best_subset, best = subset, alloc
    return best_subset, best


def _subset_output(fleet, subset, p, w_rtol):
    units = fleet.subset(subset)
    if p > units.capacity * (1.0 + 1e-12):
        return -math.inf
    return allocate_best(units, p, w_rtol=w_rtol).w_t


def _prefers_left(fleet, left, right, p, w_rtol):
    """True if ``left`` wins over ``right`` at ``p`` under best_commitment's tie rules."""
    wl = _subset_output(fleet, left, p, w_rtol)
    wr = _subset_output(fleet, right, p, w_rtol)
    if subset_key(left) < subset_key(right):
        return not _beats(wr, wl, w_rtol)
    return _beats(wl, wr, w_rtol)


def _validate_range(fleet, p_min, p_max, step, name="step"):
    if not (0 <= p_min < p_max):
        raise DomainError(f"need 0 <= p_min < p_max, got [{p_min!r}, {p_max!r}]")
    cap = fleet.capacity
    if p_max > cap * (1.0 + 1e-12):
        raise InfeasibleError(f"p_max {p_max!r} exceeds the fleet capacity {cap!r}", limit=cap)
    if not step > 0:
        raise DomainError(f"{name} must be > 0, got {step!r}")
    if step > p_max - p_min:
        raise DomainError(f"{name} {step!r} is larger than the range {p_max - p_min!r}")


def _grid(p_min, p_max, step):
    n = int(math.floor((p_max - p_min) / step + 1e-9))
    pts = [p_min + k * step for k in range(n + 1)]
    if pts[-1] < p_max - 1e-9 * step:
        pts.append(p_max)
    return pts


def switching_schedule(fleet: Fleet, p_min: float, p_max: float,
                       scan_step: Optional[float] = None, *,
                       tol: float = BREAKPOINT_TOL, w_rtol: float = W_RTOL) -> SwitchingSchedule:
    """Scan ``best_commitment`` over ``[p_min, p_max]`` and refine every switch.

    A subset change between neighbouring grid points is located by
    bisection on the comparison of the two subsets' best outputs, to
    ``tol`` in total input.  Several switches hidden inside one scan step
    are not resolved; shrink ``scan_step`` if that is a concern.
    """
    fleet.check()
    if scan_step is None:
        scan_step = (p_max - p_min) / 1000.0
    _validate_range(fleet, p_min, p_max, scan_step, "scan_step")
    grid = _grid(p_min, p_max, scan_step)
    winners = [best_commitment(fleet, p, w_rtol=w_rtol)[0] for p in grid]
    # nothing runs at exactly 0; that point belongs to the first real regime
    if not winners[0]:
        winners[0] = winners[1]

    breakpoints, outputs, sets = [], [], [winners[0]]
    for k in range(len(grid) - 1):
        left, right = winners[k], winners[k + 1]
        if left == right:
            continue
        lo, hi = grid[k], grid[k + 1]
        while hi - lo > 0.1 * tol:
            mid = 0.5 * (lo + hi)
            if _prefers_left(fleet, left, right, mid, w_rtol):
                lo = mid
            else:
                hi = mid
        p_star = 0.5 * (lo + hi)
        breakpoints.append(p_star)
        outputs.append((_subset_output(fleet, left, p_star, w_rtol),
                        _subset_output(fleet, right, p_star, w_rtol)))
        sets.append(right)

    edges = [p_min] + breakpoints + [p_max]
    regimes = []
    for subset, lo, hi in zip(sets, edges[:-1], edges[1:]):
        family = detect_family(fleet.subset(subset))
        regimes.append(Regime(subset, lo, hi, "proportional" if family else "stationary"))
    return SwitchingSchedule(tuple(regimes), tuple(breakpoints), tuple(outputs))


def verify_theorem2(schedule: SwitchingSchedule, fleet: Fleet, *,
                    eta_tol: float = EQUAL_ETA_TOL, cap_tol: float = AT_CAP_TOL) -> list:
    """Check each breakpoint for equal overall efficiency or a unit at its cap."""
    report = []
    for p, left, right in zip(schedule.breakpoints, schedule.regimes[:-1], schedule.regimes[1:]):
        allocs = []
        for regime in (left, right):
            units = fleet.subset(regime.active_set)
            allocs.append(allocate_best(units, min(p, units.capacity)))
        capped = sorted({
            uid
            for a in allocs
            for uid, x in zip(a.unit_ids, a.loads)
            if abs(x - fleet[uid].curve.p_max) <= cap_tol
        })
        eta_l, eta_r = allocs[0].eta_t, allocs[1].eta_t
        if abs(eta_l - eta_r) <= eta_tol:
            ok, reason = True, "equal-efficiency"
        elif capped:
            ok, reason = True, "at-cap"
        else:
            ok, reason = False, "efficiencies differ and no unit is at its cap"
        report.append(BreakpointCheck(p, left.active_set, right.active_set,
                                      eta_l, eta_r, tuple(capped), ok, reason))
    return report


def sweep(fleet: Fleet, p_min: float, p_max: float, step: float) -> list:
    """One :class:`SweepRow` per grid point ``p_min, p_min + step, ...``."""
    fleet.check()
    _validate_range(fleet, p_min, p_max, step)
    rows = []
    for p in _grid(p_min, p_max, step):
        subset, alloc = best_commitment(fleet, p)
        rows.append(SweepRow(p, subset, alloc, alloc.w_t, alloc.eta_t))
    return rows
