"""Output-maximising load split over a fixed set of running units.

At a local maximum of sum W_i(P_i) subject to sum P_i = p_t and
0 <= P_i <= p_max_i, every unit is either at a bound or interior with a
common marginal output g_i(P_i) = lam.  Because g_i is a downward parabola
it has two roots for a given lam: the *falling* root (W_i locally concave)
and the *rising* root (W_i locally convex).  Second-order conditions allow
at most one interior unit on the rising root, so enumerating

    status in {zero, cap, free}^n  x  (which free unit, if any, rises)

and solving the scalar equation sum P_i(lam) = remainder yields every
candidate optimum.  Similar families additionally have the closed-form
proportional split in :func:`allocate_similar`.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .curves import EfficiencyCurve, Fleet, SimilarFamily, Unit
from .errors import DomainError, InfeasibleError

log = logging.getLogger(__name__)

ROOT_TOL = 1e-9
W_RTOL = 1e-9
SUM_TOL = 1e-9

# above this many units the 3^n status enumeration is replaced by the
# multiplier sweep plus single-unit bound pins
FULL_ENUMERATION_MAX = 6
# grid safety net is exhaustive over n-1 dimensions; keep it to 2
GRID_MAX_UNITS = 3
GRID_DIVISIONS = 200

ZERO, CAP, FREE = "zero", "cap", "free"


@dataclass(frozen=True)
class Allocation:
    """Per-unit inputs with their totals.

    ``loads[k]`` is the input of unit ``unit_ids[k]``; ``eta_t`` is the
    overall efficiency ``w_t / p_t`` (0 when ``p_t`` is 0).
    """

    unit_ids: tuple
    loads: tuple
    p_t: float
    w_t: float
    eta_t: float

    def load_of(self, unit_id: str) -> float:
        """Load of ``unit_id``; units not in the allocation carry zero."""
        try:
            return self.loads[self.unit_ids.index(unit_id)]
        except ValueError:
            return 0.0

    def as_dict(self) -> dict:
        return dict(zip(self.unit_ids, self.loads))


@dataclass(frozen=True)
class StationaryCandidate:
    allocation: Allocation
    multiplier: float
    branches: tuple  # per unit: "rising" | "falling" | "at-bound"


def _units(units) -> tuple:
    if isinstance(units, Fleet):
        return units.units
    units = tuple(units)
    if not units:
        raise DomainError("at least one unit is required")
    return units


def _w(a, b, p):
    return (a - b * p) * p * p


def _g(a, b, p):
    return (2.0 * a - 3.0 * b * p) * p


def make_allocation(units, loads, p_t: Optional[float] = None) -> Allocation:
    """Build an :class:`Allocation`, clipping round-off outside ``[0, p_max]``."""
    units = _units(units)
    clipped = tuple(
        min(max(float(x), 0.0), u.curve.p_max) for u, x in zip(units, loads)
    )
    total = math.fsum(clipped) if p_t is None else float(p_t)
    w = math.fsum(_w(u.curve.a, u.curve.b, x) for u, x in zip(units, clipped))
    eta = w / total if total > 0 else 0.0
    return Allocation(tuple(u.id for u in units), clipped, total, w, eta)


def _check_total(units, p_t):
    if p_t < 0 or math.isnan(p_t):
        raise DomainError(f"total input must be >= 0, got {p_t!r}")
    cap = math.fsum(u.curve.p_max for u in units)
    if p_t > cap * (1.0 + 1e-12):
        raise InfeasibleError(
            f"total input {p_t!r} exceeds the capacity {cap!r} of the selected units",
            limit=cap,
        )
    return cap


def branch_tag(unit: Unit, load: float, tol: float = ROOT_TOL) -> str:
    c = unit.curve
    if load <= tol or load >= c.p_max - tol:
        return "at-bound"
    return "rising" if load < c.inflection else "falling"


# ---------------------------------------------------------------------------
# pattern solver


def _falling_root(a, b, lam):
    return (a + math.sqrt(max(a * a - 3.0 * b * lam, 0.0))) / (3.0 * b)


def _rising_root(a, b, lam):
    return lam / (a + math.sqrt(max(a * a - 3.0 * b * lam, 0.0)))


def _solve_pattern(units, status, rising, remainder, tol=ROOT_TOL):
    """All load vectors consistent with a status pattern.

    ``status[k]`` is ZERO, CAP or FREE; ``rising`` indexes the free unit
    placed on the rising root (None: all free units fall).  Returns a list
    of ``(loads, lam)``; ``lam`` is NaN when no unit is free.
    """
    free = [k for k, s in enumerate(status) if s == FREE]
    base = [u.curve.p_max if s == CAP else 0.0 for u, s in zip(units, status)]

    if not free:
        return [(base, math.nan)] if abs(remainder) <= SUM_TOL else []

    if len(free) == 1:
        k = free[0]
        c = units[k].curve
        if -SUM_TOL <= remainder <= c.p_max + SUM_TOL:
            loads = list(base)
            loads[k] = min(max(remainder, 0.0), c.p_max)
            return [(loads, _g(c.a, c.b, loads[k]))]
        return []

    lo, hi = -math.inf, math.inf
    roots = []
    for k in free:
        c = units[k].curve
        q = c.inflection
        if k == rising:
            top = min(q, c.p_max)
            lo, hi = max(lo, 0.0), min(hi, _g(c.a, c.b, top))
            roots.append((k, c.a, c.b, _rising_root))
        else:
            if c.p_max <= q:
                return []
            lo, hi = max(lo, _g(c.a, c.b, c.p_max)), min(hi, _g(c.a, c.b, q))
            roots.append((k, c.a, c.b, _falling_root))
    if lo > hi:
        return []

    def excess(lam):
        return math.fsum(f(a, b, lam) for _, a, b, f in roots) - remainder

    def loads_at(lam):
        loads = list(base)
        for k, a, b, f in roots:
            loads[k] = min(f(a, b, lam), units[k].curve.p_max)
        return loads

    xtol = 1e-15 * max(1.0, abs(lo), abs(hi))
    sols = []
    if rising is None:
        # strictly decreasing in lam
        f_lo, f_hi = excess(lo), excess(hi)
        if f_lo < -SUM_TOL or f_hi > SUM_TOL:
            return []
        if abs(f_lo) <= SUM_TOL * 1e-3:
            lam = lo
        elif abs(f_hi) <= SUM_TOL * 1e-3:
            lam = hi
        elif f_lo * f_hi < 0:
            lam = brentq(excess, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
        else:
            lam = lo if abs(f_lo) < abs(f_hi) else hi
        return [(loads_at(lam), lam)]

    grid = np.linspace(lo, hi, 65)
    vals = [excess(x) for x in grid]
    for x0, x1, f0, f1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if f0 == 0.0:
            sols.append(x0)
        elif f0 * f1 < 0:
            sols.append(brentq(excess, x0, x1, xtol=xtol, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0 or (abs(vals[-1]) <= SUM_TOL and not sols):
        sols.append(grid[-1])
    if abs(vals[0]) <= SUM_TOL and grid[0] not in sols:
        sols.append(grid[0])
    return [(loads_at(lam), lam) for lam in sols]


def _candidate(units, loads, lam, p_t) -> StationaryCandidate:
    alloc = make_allocation(units, loads, p_t)
    tags = tuple(branch_tag(u, x) for u, x in zip(units, alloc.loads))
    return StationaryCandidate(alloc, lam, tags)


def _patterns(units, p_t):
    """Status patterns worth solving, in deterministic order."""
    n = len(units)
    caps = [u.curve.p_max for u in units]
    if n <= FULL_ENUMERATION_MAX:
        statuses = itertools.product((FREE, ZERO, CAP), repeat=n)
    else:
        statuses = [(FREE,) * n]
        for k in range(n):
            for s in (ZERO, CAP):
                st = [FREE] * n
                st[k] = s
                statuses.append(tuple(st))
    for st in statuses:
        fixed = math.fsum(c for c, s in zip(caps, st) if s == CAP)
        free_cap = math.fsum(c for c, s in zip(caps, st) if s == FREE)
        rem = p_t - fixed
        if rem < -SUM_TOL or rem > free_cap + SUM_TOL:
            continue
        free = [k for k, s in enumerate(st) if s == FREE]
        for r in [None] + (free if len(free) > 1 else []):
            yield st, r, rem


# ---------------------------------------------------------------------------
# public operations


def allocate_similar(family: SimilarFamily, caps: Sequence[float], p_t: float,
                     unit_ids: Optional[Sequence[str]] = None) -> Allocation:
    """Proportional split ``P_i = beta_i * p_t / sum(beta)`` with cap saturation.

    Units whose proportional share exceeds their cap are pinned at the cap
    and the rest of the total is re-split among the others; this repeats
    until every share fits.
    """
    betas = list(family.betas)
    caps = [float(c) for c in caps]
    if len(caps) != len(betas):
        raise DomainError("caps and betas must have the same length")
    if p_t <= 0:
        raise DomainError(f"total input must be > 0, got {p_t!r}")
    total_cap = math.fsum(caps)
    if p_t > total_cap * (1.0 + 1e-12):
        raise InfeasibleError(
            f"total input {p_t!r} exceeds the family capacity {total_cap!r}", limit=total_cap
        )
    ids = tuple(unit_ids) if unit_ids is not None else tuple(
        f"u{k + 1}" for k in range(len(betas))
    )
    loads = [0.0] * len(betas)
    pinned = set()
    while True:
        open_ = [k for k in range(len(betas)) if k not in pinned]
        rem = p_t - math.fsum(caps[k] for k in pinned)
        scale = rem / math.fsum(betas[k] for k in open_) if open_ else 0.0
        over = [k for k in open_ if betas[k] * scale > caps[k]]
        if not over:
            for k in open_:
                loads[k] = betas[k] * scale
            for k in pinned:
                loads[k] = caps[k]
            break
        pinned.update(over)
    units = tuple(
        Unit(uid, EfficiencyCurve(family.reference.a / beta, family.reference.b / beta**2, cap))
        for uid, beta, cap in zip(ids, betas, caps)
    )
    return make_allocation(units, loads, p_t)


def best_response(unit: Unit, lam: float) -> float:
    """Maximiser of ``W(P) - lam*P`` over the unit's admissible inputs.

    Ties go to the larger Lagrangian value, then the smaller input.
    """
    c = unit.curve
    options = [0.0, c.p_max]
    disc = c.a * c.a - 3.0 * c.b * lam
    if disc >= 0:
        for f in (_rising_root, _falling_root):
            p = f(c.a, c.b, lam)
            if 0.0 <= p <= c.p_max:
                options.append(p)
    best_p, best_v = None, -math.inf
    for p in sorted(options):
        v = _w(c.a, c.b, p) - lam * p
        if best_p is None or v > best_v + 1e-15 * max(1.0, abs(best_v)):
            best_p, best_v = p, v
    return best_p


def _status_of(unit, load, tol=ROOT_TOL):
    if load <= tol:
        return ZERO
    if load >= unit.curve.p_max - tol:
        return CAP
    return FREE


def stationary_candidates(units, p_t: float) -> list:
    """Allocations satisfying the equal-marginal-output conditions, via a multiplier sweep.

    For each multiplier every unit plays its Lagrangian best response; the
    multiplier is bisected until the responses sum to ``p_t``.  If the sum
    jumps over ``p_t`` (non-concave outputs), the status patterns on both
    sides of the jump are re-solved with the jumping units free, which
    produces the bracketing stationary points.
    """
    units = _units(units)
    if p_t <= 0:
        raise DomainError(f"total input must be > 0, got {p_t!r}")
    total_cap = _check_total(units, p_t)
    if p_t >= total_cap - SUM_TOL:
        loads = [u.curve.p_max for u in units]
        lam = min(_g(u.curve.a, u.curve.b, u.curve.p_max) for u in units)
        return [_candidate(units, loads, lam, p_t)]

    def responses(lam):
        return [best_response(u, lam) for u in units]

    lam_lo = min(0.0, min(_g(u.curve.a, u.curve.b, u.curve.p_max) for u in units)) - 1.0
    lam_hi = max(u.curve.a * u.curve.a / (4.0 * u.curve.b) for u in units) + 1.0
    for _ in range(200):
        mid = 0.5 * (lam_lo + lam_hi)
        if mid in (lam_lo, lam_hi):
            break
        if math.fsum(responses(mid)) >= p_t:
            lam_lo = mid
        else:
            lam_hi = mid

    r_lo, r_hi = responses(lam_lo), responses(lam_hi)
    s_lo, s_hi = math.fsum(r_lo), math.fsum(r_hi)
    patterns = []
    if abs(s_lo - p_t) <= SUM_TOL:
        patterns.append(([_status_of(u, x) for u, x in zip(units, r_lo)], None))
    elif abs(s_hi - p_t) <= SUM_TOL:
        patterns.append(([_status_of(u, x) for u, x in zip(units, r_hi)], None))
    else:
        jumping = [k for k in range(len(units)) if abs(r_lo[k] - r_hi[k]) > ROOT_TOL]
        for side in (r_lo, r_hi):
            st = [_status_of(u, x) for u, x in zip(units, side)]
            for k in jumping:
                st[k] = FREE
            free = [k for k, s in enumerate(st) if s == FREE]
            for r in [None] + (jumping if len(free) > 1 else []):
                if (st, r) not in patterns:
                    patterns.append((st, r))

    caps = [u.curve.p_max for u in units]
    out = []
    for st, r in patterns:
        rem = p_t - math.fsum(c for c, s in zip(caps, st) if s == CAP)
        for loads, lam in _solve_pattern(units, st, r, rem):
            out.append(_candidate(units, loads, lam, p_t))
    return out


def _grid_safety_net(units, p_t):
    """Best point of an exhaustive simplex grid at step p_t/200 (n <= 3)."""
    n = len(units)
    caps = np.array([u.curve.p_max for u in units])
    step = p_t / GRID_DIVISIONS
    axes = []
    for k in range(n - 1):
        hi = min(caps[k], p_t)
        axes.append(np.unique(np.append(np.arange(0.0, hi, step), hi)))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = [m.ravel() for m in mesh]
    last = p_t - np.sum(pts, axis=0)
    ok = (last >= 0) & (last <= caps[-1])
    if not ok.any():
        return None, step
    pts = [p[ok] for p in pts] + [last[ok]]
    w = np.zeros(pts[0].shape)
    for u, p in zip(units, pts):
        w += _w(u.curve.a, u.curve.b, p)
    i = int(np.argmax(w))
    return [float(p[i]) for p in pts], step


def _polish(units, loads, step, min_step=1e-9):
    """Pairwise-transfer coordinate ascent with a shrinking step."""
    caps = [u.curve.p_max for u in units]
    coef = [(u.curve.a, u.curve.b) for u in units]
    loads = list(loads)
    n = len(loads)
    while step >= min_step:
        moved = True
        while moved:
            moved = False
            for i in range(n):
                for j in range(n):
                    if i == j:
                        continue
                    d = min(step, caps[i] - loads[i], loads[j])
                    if d <= 0:
                        continue
                    gain = (_w(*coef[i], loads[i] + d) - _w(*coef[i], loads[i])
                            + _w(*coef[j], loads[j] - d) - _w(*coef[j], loads[j]))
                    if gain > 0:
                        loads[i] += d
                        loads[j] -= d
                        moved = True
        step *= 0.5
    return loads


def allocate_best(units, p_t: float, *, safety_net: bool = True,
                  w_rtol: float = W_RTOL) -> Allocation:
    """Maximum-output split of ``p_t`` over ``units`` (any unit may sit at 0 or its cap).

    Compares every status-pattern stationary point, the multiplier-sweep
    candidates, and (for up to three units) a coarse grid search polished
    by coordinate ascent.  Ties between candidates keep the earliest one
    in enumeration order.
    """
    units = _units(units)
    _check_total(units, p_t)
    if p_t == 0:
        return make_allocation(units, [0.0] * len(units), 0.0)
    if len(units) == 1:
        return make_allocation(units, [min(p_t, units[0].curve.p_max)], p_t)

    best = None
    for st, r, rem in _patterns(units, p_t):
        for loads, _lam in _solve_pattern(units, st, r, rem):
            alloc = make_allocation(units, loads, p_t)
            if best is None or alloc.w_t > best.w_t + w_rtol * abs(best.w_t):
                best = alloc
    for cand in stationary_candidates(units, p_t):
        if best is None or cand.allocation.w_t > best.w_t + w_rtol * abs(best.w_t):
            best = cand.allocation

    if safety_net and len(units) <= GRID_MAX_UNITS:
        grid_loads, step = _grid_safety_net(units, p_t)
        if grid_loads is not None:
            far = best is None or max(
                abs(x - y) for x, y in zip(grid_loads, best.loads)) > 2 * step
            grid_w = math.fsum(_w(u.curve.a, u.curve.b, x) for u, x in zip(units, grid_loads))
            if far or grid_w > best.w_t:
                polished = make_allocation(units, _polish(units, grid_loads, step), p_t)
                if best is None or polished.w_t > best.w_t + w_rtol * abs(best.w_t):
                    if best is not None:
                        log.warning("grid safety net beat the stationary candidates at p_t=%r",
                                    p_t)
                    best = polished
    if best is None:
        raise InfeasibleError(f"no feasible split of {p_t!r}", limit=None)
    return best


def shared_marginal(units, alloc: Allocation, tol: float = ROOT_TOL) -> Optional[float]:
    """Common marginal output of the interior units, or None if no unit is interior."""
    units = _units(units)
    gs = [
        _g(u.curve.a, u.curve.b, x)
        for u, x in zip(units, alloc.loads)
        if tol < x < u.curve.p_max - tol
    ]
    if not gs:
        return None
    return math.fsum(gs) / len(gs)


def min_input_for_output(fleet: Fleet, w_target: float, *, rtol: float = 1e-12):
    """Smallest total input whose best commitment delivers ``w_target``.

    Returns ``(p_t, subset, allocation)``.  The best-commitment envelope
    rises strictly from 0 up to the input ``sum(argmax_i W_i)`` where it
    attains the fleet maximum ``sum(max_i W_i)``, so the answer is the
    unique root of ``envelope(p) - w_target`` on that interval.
    """
    from .commitment import best_commitment

    fleet.check()
    if w_target < 0 or math.isnan(w_target):
        raise DomainError(f"output target must be >= 0, got {w_target!r}")
    w_peak = math.fsum(u.curve.w_max for u in fleet)
    p_peak = math.fsum(u.curve.w_argmax for u in fleet)
    if w_target > w_peak * (1.0 + 1e-12):
        raise InfeasibleError(
            f"output {w_target!r} exceeds the fleet's maximum achievable output {w_peak!r}",
            limit=w_peak,
        )
    if w_target == 0:
        subset, alloc = best_commitment(fleet, 0.0)
        return 0.0, subset, alloc

    def gap(p):
        return best_commitment(fleet, p)[1].w_t - w_target

    if gap(p_peak) <= 0:
        p = p_peak
    else:
        p = brentq(gap, 0.0, p_peak, xtol=1e-14 * max(1.0, p_peak), rtol=rtol)
    subset, alloc = best_commitment(fleet, p)
    return p, subset, alloc
