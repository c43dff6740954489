"""Min-norm safety filter: blend a baseline law with one barrier constraint.

The quadratic program min 0.5 (u - u_d)^2 s.t. u >= u_sf has the closed-form
KKT solution u* = max(u_d, u_sf); no solver is involved. Input bounds are
deliberately not modeled, so the scalar filter is always feasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .barriers import AffineControlConstraint


class ZeroNormal(ValueError):
    """Degenerate constraint 0 * u >= c with c > 0 is infeasible."""


@dataclass(frozen=True)
class ProportionalPosition:
    """u_d = -k (x - x_d) for a first-order plant."""

    k: float
    x_d: float

    def __post_init__(self) -> None:
        if not self.k > 0.0:
            raise ValueError("gain k must be positive")


@dataclass(frozen=True)
class PD:
    """u_d = -k1 (x - x_d) - k2 xdot for a second-order plant."""

    k1: float
    k2: float
    x_d: float

    def __post_init__(self) -> None:
        if not (self.k1 > 0.0 and self.k2 > 0.0):
            raise ValueError("gains k1, k2 must be positive")


BaselineLaw = Union[ProportionalPosition, PD]


@dataclass(frozen=True)
class FilterResult:
    """Filter output: applied control, whether the constraint was active,
    and the two candidate controls for diagnostics."""

    u_star: object
    active: bool
    u_d: object
    u_sf: float


def baseline_control(state, law: BaselineLaw) -> float:
    """Evaluate the baseline law at a state of matching dimension."""
    if isinstance(law, ProportionalPosition):
        if isinstance(state, (int, float)):
            x = float(state)
        else:
            if len(state) != 1:
                raise ValueError("proportional law expects a 1-dimensional state")
            x = float(state[0])
        return -law.k * (x - law.x_d)
    if isinstance(law, PD):
        if isinstance(state, (int, float)) or len(state) != 2:
            raise ValueError("PD law expects a (position, velocity) state")
        x = float(state[0])
        v = float(state[1])
        return -law.k1 * (x - law.x_d) - law.k2 * v
    raise TypeError(f"unknown baseline law {type(law).__name__}")


def filter_scalar(u_d: float, constraint: AffineControlConstraint) -> FilterResult:
    """Closed-form scalar filter: u* = max(u_d, u_sf).

    A tie u_d = u_sf is labeled inactive; the baseline already satisfies the
    constraint with equality, so only the diagnostic flag is affected.
    """
    normal = constraint.normal
    if not isinstance(normal, (int, float)) or not normal > 0.0:
        raise ValueError(f"scalar filter needs a positive scalar normal, got {normal!r}")
    u_sf = constraint.offset / normal
    active = u_sf > u_d
    u_star = u_sf if active else u_d
    return FilterResult(u_star=u_star, active=active, u_d=u_d, u_sf=u_sf)


def filter_projection(u_d, constraint: AffineControlConstraint) -> FilterResult:
    """Project a control vector onto the half-space a . u >= c.

    u* = u_d + max(0, (c - a . u_d) / (a . a)) a. The 1-dimensional case is
    evaluated in closed form so it matches filter_scalar exactly.
    """
    a = np.atleast_1d(np.asarray(constraint.normal, dtype=float))
    u = np.atleast_1d(np.asarray(u_d, dtype=float))
    if a.shape != u.shape:
        raise ValueError(f"normal shape {a.shape} does not match control shape {u.shape}")
    c = constraint.offset

    if a.size == 1:
        alpha = float(a[0])
        ud = float(u[0])
        if alpha == 0.0:
            if c > 0.0:
                raise ZeroNormal("constraint 0 * u >= c with c > 0 is infeasible")
            return FilterResult(u_star=u.copy(), active=False, u_d=u.copy(), u_sf=c)
        bound = c / alpha
        violated = ud < bound if alpha > 0.0 else ud > bound
        u_star = np.array([bound if violated else ud])
        return FilterResult(u_star=u_star, active=violated, u_d=u.copy(), u_sf=c)

    anorm2 = float(a @ a)
    residual = c - float(a @ u)
    if anorm2 == 0.0:
        if residual > 0.0:
            raise ZeroNormal("constraint 0 . u >= c with c > 0 is infeasible")
        return FilterResult(u_star=u.copy(), active=False, u_d=u.copy(), u_sf=c)
    lam = residual / anorm2
    if lam > 0.0:
        return FilterResult(u_star=u + lam * a, active=True, u_d=u.copy(), u_sf=c)
    return FilterResult(u_star=u.copy(), active=False, u_d=u.copy(), u_sf=c)
