"""Quadratic efficiency curves, unit/fleet containers and similarity detection.

Every device is described by an input-to-efficiency map

    eta(P) = a*P - b*P**2,     0 <= P <= p_max

so the delivered output is W(P) = P*eta(P) = a*P**2 - b*P**3 and the
marginal output is g(P) = dW/dP = 2*a*P - 3*b*P**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import CapacityError, DomainError, InvalidCurveError, NoSolutionError

MAX_FLEET_SIZE = 16
SIMILARITY_RTOL = 1e-9

# round-off slack on p_max <= a/b, on domain checks against p_max, and on
# levels at the peak
_ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class EfficiencyCurve:
    """Concave quadratic efficiency curve ``eta(P) = a*P - b*P**2``.

    Parameters
    ----------
    a : float
        Linear coefficient (1/power).
    b : float
        Curvature coefficient (1/power**2).
    p_max : float, optional
        Maximum admissible input. Defaults to ``a/b``, the second zero of
        the curve.

    Construction does not validate; use :func:`validate` or
    :meth:`check`. This lets a fleet file with a bad curve be loaded and
    reported on.
    """

    a: float
    b: float
    p_max: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if self.p_max is None:
            p_max = self.a / self.b if self.b != 0 else math.inf
            object.__setattr__(self, "p_max", float(p_max))
        else:
            object.__setattr__(self, "p_max", float(self.p_max))

    def _check_domain(self, p):
        lo = np.min(p)
        hi = np.max(p)
        if lo < 0:
            raise DomainError(f"input {lo!r} is below the lower bound 0")
        if hi > self.p_max * (1.0 + _ROOT_RTOL):
            raise DomainError(f"input {hi!r} exceeds the upper bound p_max={self.p_max!r}")

    def efficiency(self, p):
        self._check_domain(p)
        return self.a * p - self.b * p * p

    def output(self, p):
        self._check_domain(p)
        return (self.a * p - self.b * p * p) * p

    def marginal_output(self, p):
        self._check_domain(p)
        return 2.0 * self.a * p - 3.0 * self.b * p * p

    @property
    def vertex(self) -> float:
        """Unclamped efficiency peak ``a/(2b)``."""
        return self.a / (2.0 * self.b)

    @property
    def inflection(self) -> float:
        """Input where W'' changes sign (peak of the marginal output), ``a/(3b)``."""
        return self.a / (3.0 * self.b)

    @property
    def w_argmax(self) -> float:
        """Input maximising the unit's own output over [0, p_max]."""
        return min(self.p_max, 2.0 * self.a / (3.0 * self.b))

    @property
    def w_max(self) -> float:
        return self.output(self.w_argmax)

    def check(self) -> "EfficiencyCurve":
        problems = validate(self)
        if problems:
            raise InvalidCurveError("; ".join(problems))
        return self

    def scaled(self, beta: float) -> "EfficiencyCurve":
        """Curve of a similar device, ``eta_beta(P) = eta(P/beta)``."""
        return EfficiencyCurve(self.a / beta, self.b / beta**2, self.p_max * beta)


@dataclass(frozen=True)
class Unit:
    id: str
    curve: EfficiencyCurve

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id.strip():
            raise InvalidCurveError("unit id must be a non-empty string")


@dataclass(frozen=True)
class Fleet:
    """Ordered, immutable collection of uniquely identified units."""

    units: tuple

    def __post_init__(self):
        units = tuple(self.units)
        object.__setattr__(self, "units", units)
        if not units:
            raise InvalidCurveError("a fleet needs at least one unit")
        if len(units) > MAX_FLEET_SIZE:
            raise InvalidCurveError(
                f"fleet has {len(units)} units; at most {MAX_FLEET_SIZE} are supported"
            )
        seen = set()
        for u in units:
            if u.id in seen:
                raise InvalidCurveError(f"duplicate unit id {u.id!r}")
            seen.add(u.id)

    def __iter__(self) -> Iterator[Unit]:
        return iter(self.units)

    def __len__(self) -> int:
        return len(self.units)

    def __getitem__(self, key):
        if isinstance(key, str):
            for u in self.units:
                if u.id == key:
                    return u
            raise KeyError(key)
        return self.units[key]

    @property
    def ids(self) -> tuple:
        return tuple(u.id for u in self.units)

    @property
    def capacity(self) -> float:
        return sum(u.curve.p_max for u in self.units)

    def subset(self, ids: Sequence[str]) -> "Fleet":
        wanted = set(ids)
        unknown = wanted - set(self.ids)
        if unknown:
            raise KeyError(", ".join(sorted(unknown)))
        return Fleet(tuple(u for u in self.units if u.id in wanted))

    def problems(self) -> dict:
        """Map unit id -> list of violated curve invariants (valid units omitted)."""
        out = {}
        for u in self.units:
            issues = validate(u.curve)
            if issues:
                out[u.id] = issues
        return out

    def check(self) -> "Fleet":
        bad = self.problems()
        if bad:
            msg = "; ".join(f"unit {uid}: {', '.join(v)}" for uid, v in bad.items())
            raise InvalidCurveError(msg)
        return self


@dataclass(frozen=True)
class SimilarFamily:
    """Fleet whose curves are horizontal scalings of a reference curve."""

    reference: EfficiencyCurve
    betas: tuple = field(default=())


def eval_efficiency(curve: EfficiencyCurve, p):
    return curve.efficiency(p)


def eval_output(curve: EfficiencyCurve, p):
    return curve.output(p)


def eval_marginal_output(curve: EfficiencyCurve, p):
    return curve.marginal_output(p)


def peak_point(curve: EfficiencyCurve) -> tuple:
    """Return ``(p_e, eta_e)``: the most efficient admissible input and its efficiency."""
    p_e = min(max(curve.vertex, 0.0), curve.p_max)
    return p_e, curve.efficiency(p_e)


def validate(curve: EfficiencyCurve) -> list:
    """List every violated curve invariant; an empty list means the curve is valid."""
    problems = []
    a, b, p_max = curve.a, curve.b, curve.p_max
    for name, value in (("a", a), ("b", b), ("p_max", p_max)):
        if not math.isfinite(value):
            problems.append(f"{name} must be finite, got {value!r}")
        elif value <= 0:
            problems.append(f"{name} must be > 0, got {value!r}")
    if problems:
        return problems
    root = a / b
    if p_max > root * (1.0 + _ROOT_RTOL):
        problems.append(
            f"p_max={p_max!r} exceeds a/b={root!r}; efficiency would go negative"
        )
    peak = a * a / (4.0 * b)
    if peak > 1.0:
        problems.append(f"peak efficiency a^2/(4b)={peak!r} exceeds 1")
    return problems


def similarity_factor(reference: EfficiencyCurve, other: EfficiencyCurve,
                      rtol: float = SIMILARITY_RTOL) -> Optional[float]:
    """Scale ``beta`` with ``eta_other(P) == eta_ref(P/beta)``, or None if not similar."""
    beta = reference.a / other.a
    if not (beta > 0 and math.isfinite(beta)):
        return None
    expected_b = reference.b / beta**2
    if abs(other.b - expected_b) > rtol * abs(expected_b):
        return None
    return beta


def inverse_efficiency(curve: EfficiencyCurve, level: float, branch: str = "falling") -> float:
    """Input at which the curve reaches ``level`` on the rising or falling side of its peak.

    Raises
    ------
    NoSolutionError
        If ``level`` is above the curve's peak efficiency.
    CapacityError
        If the root lies beyond ``p_max``.
    """
    if branch not in ("rising", "falling"):
        raise DomainError(f"branch must be 'rising' or 'falling', got {branch!r}")
    if level < 0:
        raise DomainError(f"efficiency level must be >= 0, got {level!r}")
    a, b = curve.a, curve.b
    peak = a * a / (4.0 * b)
    if level > peak * (1.0 + _ROOT_RTOL):
        raise NoSolutionError(f"level {level!r} is above the peak efficiency {peak!r}")
    disc = math.sqrt(max(a * a - 4.0 * b * level, 0.0))
    if branch == "falling":
        p = (a + disc) / (2.0 * b)
    else:
        # rationalised smaller root; no cancellation for small levels
        p = 2.0 * level / (a + disc)
    if p > curve.p_max:
        raise CapacityError(f"root {p!r} exceeds p_max={curve.p_max!r}")
    return p


def detect_family(units) -> Optional[SimilarFamily]:
    """Return the similar family formed by ``units`` (reference = first unit), if any."""
    units = list(units)
    reference = units[0].curve
    betas = []
    for u in units:
        beta = similarity_factor(reference, u.curve)
        if beta is None:
            return None
        betas.append(beta)
    return SimilarFamily(reference, tuple(betas))
