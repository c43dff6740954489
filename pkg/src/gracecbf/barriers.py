"""Barrier constraint families for safety-critical control.

Five families are supported: zeroing, reciprocal (canonical B = 1/h),
exponential (relative degree 2), and the first/second-order graceful forms
built on a two-layer barrier. At a given state every family reduces to a
half-space constraint on the scalar control input, which the safety filter
consumes without knowing which family produced it.

Barrier functions are scalar functions of the position coordinate and expose
``value``, ``grad`` and ``curvature``. The bundled plants keep position in
state component 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

from .plants import ControlAffineSystem


class DegenerateConstraint(ValueError):
    """The control input does not appear in the constrained derivative."""


class OutsideDomain(ValueError):
    """Reciprocal barrier evaluated outside the safe interior (h <= 0)."""


class CatastropheBoundary(ValueError):
    """Graceful constraint evaluated at or below the failsafe pole h_g = -1."""


class ComplexRoots(ValueError):
    """Damping ratio below 1 gives complex characteristic roots."""


@dataclass(frozen=True)
class ClassKFn:
    """Strictly increasing function with value 0 at 0. Only the linear family
    gain * r is implemented; every simulated scenario uses linear gains."""

    gain: float
    kind: str = "linear"

    def __post_init__(self) -> None:
        if self.kind != "linear":
            raise ValueError(f"unsupported class-K kind {self.kind!r}")
        if not self.gain > 0.0:
            raise ValueError("class-K gain must be positive")

    def __call__(self, r: float) -> float:
        return self.gain * r


@dataclass(frozen=True)
class DistanceBarrier:
    """h(x) = x - threshold: positive above the threshold position."""

    threshold: float

    def value(self, x: float) -> float:
        return x - self.threshold

    def grad(self, x: float) -> float:
        return 1.0

    def curvature(self, x: float) -> float:
        return 0.0


def layer_transform(h_value: float, a: float, b: float) -> float:
    """Shift a raw barrier value into layer coordinates: (H - b) / (b - a).

    The primary threshold b maps to 0 and the catastrophe threshold a maps
    to -1, both exactly.
    """
    if not a < b:
        raise ValueError(f"degenerate layer ordering: need a < b, got a={a}, b={b}")
    return (h_value - b) / (b - a)


@dataclass(frozen=True)
class GracefulBarrier:
    """Two-layer barrier: raw barrier H with primary threshold b and
    catastrophe threshold a (a < b), evaluated in layer coordinates."""

    raw: object
    catastrophe: float  # a
    primary: float  # b

    def __post_init__(self) -> None:
        if not self.catastrophe < self.primary:
            raise ValueError(
                "degenerate layer ordering: need catastrophe < primary, got "
                f"a={self.catastrophe}, b={self.primary}"
            )

    @property
    def span(self) -> float:
        return self.primary - self.catastrophe

    def value(self, x: float) -> float:
        return layer_transform(self.raw.value(x), self.catastrophe, self.primary)

    def grad(self, x: float) -> float:
        return self.raw.grad(x) / (self.primary - self.catastrophe)

    def curvature(self, x: float) -> float:
        return self.raw.curvature(x) / (self.primary - self.catastrophe)


class SafetyRegion(Enum):
    SAFE = "safe"
    DANGER = "danger"
    CATASTROPHE = "catastrophe"


def classify_region(h_g: float) -> SafetyRegion:
    """Partition layer values: safe for h_g >= 0, danger for -1 < h_g < 0,
    catastrophe for h_g <= -1. Boundaries belong to safe and catastrophe."""
    if math.isnan(h_g):
        raise ValueError("h_g is NaN")
    if h_g >= 0.0:
        return SafetyRegion.SAFE
    if h_g <= -1.0:
        return SafetyRegion.CATASTROPHE
    return SafetyRegion.DANGER


class Family(Enum):
    ZEROING = "zeroing"
    RECIPROCAL = "reciprocal"
    EXPONENTIAL = "exponential"
    GRACEFUL1 = "graceful1"
    GRACEFUL2 = "graceful2"


@dataclass(frozen=True)
class BarrierSpec:
    """A barrier function plus the gains that select one constraint family."""

    family: Family
    barrier: object
    gamma: float | None = None
    gamma1: float | None = None
    gamma2: float | None = None
    zeta: float | None = None
    omega_n: float | None = None

    def __post_init__(self) -> None:
        fam = self.family
        if fam in (Family.ZEROING, Family.RECIPROCAL, Family.GRACEFUL1):
            if self.gamma is None or not self.gamma > 0.0:
                raise ValueError(f"{fam.value} family requires gamma > 0")
        elif fam is Family.EXPONENTIAL:
            if self.gamma1 is None or not self.gamma1 > 0.0:
                raise ValueError("exponential family requires gamma1 > 0")
            if self.gamma2 is None or not self.gamma2 > 0.0:
                raise ValueError("exponential family requires gamma2 > 0")
        elif fam is Family.GRACEFUL2:
            if self.zeta is None or not self.zeta > 0.0:
                raise ValueError("graceful2 family requires zeta > 0")
            if self.omega_n is None or not self.omega_n > 0.0:
                raise ValueError("graceful2 family requires omega_n > 0")
        if fam in (Family.GRACEFUL1, Family.GRACEFUL2):
            if not isinstance(self.barrier, GracefulBarrier):
                raise TypeError(f"{fam.value} family requires a GracefulBarrier")
        elif isinstance(self.barrier, GracefulBarrier):
            raise TypeError(f"{fam.value} family takes a plain barrier, not GracefulBarrier")

    @classmethod
    def zeroing(cls, barrier, gamma: float) -> "BarrierSpec":
        return cls(Family.ZEROING, barrier, gamma=gamma)

    @classmethod
    def reciprocal(cls, barrier, gamma: float) -> "BarrierSpec":
        return cls(Family.RECIPROCAL, barrier, gamma=gamma)

    @classmethod
    def exponential(cls, barrier, gamma1: float, gamma2: float) -> "BarrierSpec":
        return cls(Family.EXPONENTIAL, barrier, gamma1=gamma1, gamma2=gamma2)

    @classmethod
    def graceful1(cls, barrier: GracefulBarrier, gamma: float) -> "BarrierSpec":
        return cls(Family.GRACEFUL1, barrier, gamma=gamma)

    @classmethod
    def graceful2(cls, barrier: GracefulBarrier, zeta: float, omega_n: float) -> "BarrierSpec":
        return cls(Family.GRACEFUL2, barrier, zeta=zeta, omega_n=omega_n)


@dataclass(frozen=True)
class AffineControlConstraint:
    """Half-space constraint normal * u >= offset in control space.

    The constraint builders below normalize to normal = 1, so offset is the
    control-space bound u_sf directly.
    """

    normal: object  # float for scalar input, ndarray for filter_projection
    offset: float


def _as_state(state, dimension: int) -> Tuple[float, ...]:
    if isinstance(state, (int, float)):
        y = (float(state),)
    else:
        y = tuple(float(s) for s in state)
    if len(y) != dimension:
        raise ValueError(f"state has {len(y)} components, plant expects {dimension}")
    for s in y:
        if not math.isfinite(s):
            raise ValueError(f"non-finite state {y}")
    return y


def _normalize(rhs: float, acoef: float) -> AffineControlConstraint:
    if acoef == 0.0:
        raise DegenerateConstraint("constraint coefficient on u is zero")
    if acoef > 0.0:
        return AffineControlConstraint(1.0, rhs / acoef)
    return AffineControlConstraint(acoef, rhs)


def zeroing_constraint(state, spec: BarrierSpec, plant: ControlAffineSystem) -> AffineControlConstraint:
    """Constraint enforcing hdot(x, u) >= -gamma * h(x)."""
    if spec.family is not Family.ZEROING:
        raise ValueError("spec is not a zeroing barrier")
    y = _as_state(state, plant.dimension)
    x = y[0]
    hval = spec.barrier.value(x)
    gradv = spec.barrier.grad(x)
    f = plant.drift(y)
    g = plant.input_map(y)
    acoef = gradv * g[0]
    if acoef == 0.0:
        raise DegenerateConstraint("barrier has relative degree > 1 at this state")
    rhs = -spec.gamma * hval - gradv * f[0]
    return _normalize(rhs, acoef)


def reciprocal_constraint(state, spec: BarrierSpec, plant: ControlAffineSystem) -> AffineControlConstraint:
    """Constraint from the canonical reciprocal barrier B = 1/h.

    Bdot = -hdot / h^2 <= gamma * h is equivalent to hdot >= -gamma * h^3,
    defined only on the safe interior h > 0.
    """
    if spec.family is not Family.RECIPROCAL:
        raise ValueError("spec is not a reciprocal barrier")
    y = _as_state(state, plant.dimension)
    x = y[0]
    hval = spec.barrier.value(x)
    if not hval > 0.0:
        raise OutsideDomain(f"reciprocal barrier undefined at h = {hval}")
    gradv = spec.barrier.grad(x)
    f = plant.drift(y)
    g = plant.input_map(y)
    acoef = gradv * g[0]
    if acoef == 0.0:
        raise DegenerateConstraint("barrier has relative degree > 1 at this state")
    rhs = -spec.gamma * hval * (hval * hval) - gradv * f[0]
    return _normalize(rhs, acoef)


def high_order_h2(state, gamma1: float, barrier) -> float:
    """Second-layer barrier hdot(x) + gamma1 * h(x) for a (position, velocity) state."""
    x, v = (float(state[0]), float(state[1]))
    if math.isnan(x) or math.isnan(v):
        raise ValueError("NaN state")
    return barrier.grad(x) * v + gamma1 * barrier.value(x)


def _second_order_terms(state, barrier, plant: ControlAffineSystem):
    if plant.dimension != 2:
        raise DegenerateConstraint("relative degree 2 constraint needs a second-order plant")
    y = _as_state(state, 2)
    x, v = y
    gradv = barrier.grad(x)
    f = plant.drift(y)
    g = plant.input_map(y)
    if gradv * g[0] != 0.0:
        raise DegenerateConstraint("barrier has relative degree 1 at this state")
    acoef = gradv * g[1]
    if acoef == 0.0:
        raise DegenerateConstraint("input does not reach the barrier's second derivative")
    return x, v, gradv, f, acoef


def exponential_constraint(state, spec: BarrierSpec, plant: ControlAffineSystem) -> AffineControlConstraint:
    """Constraint enforcing hddot + (g1 + g2) hdot + g1 g2 h >= 0."""
    if spec.family is not Family.EXPONENTIAL:
        raise ValueError("spec is not an exponential barrier")
    x, v, gradv, f, acoef = _second_order_terms(state, spec.barrier, plant)
    hval = spec.barrier.value(x)
    hdot = gradv * v
    curv = spec.barrier.curvature(x)
    rhs = (
        -(spec.gamma1 * spec.gamma2) * hval
        - (spec.gamma1 + spec.gamma2) * hdot
        - curv * v * v
        - gradv * f[1]
    )
    return _normalize(rhs, acoef)


def graceful1_constraint(state, spec: BarrierSpec, plant: ControlAffineSystem) -> AffineControlConstraint:
    """First-order graceful constraint hgdot >= -gamma * hg / (hg + 1).

    Acts as a zeroing barrier at the primary boundary hg = 0 and stiffens
    without bound toward the failsafe pole hg = -1.
    """
    if spec.family is not Family.GRACEFUL1:
        raise ValueError("spec is not a graceful1 barrier")
    y = _as_state(state, plant.dimension)
    x = y[0]
    hg = spec.barrier.value(x)
    if hg <= -1.0:
        raise CatastropheBoundary(f"h_g = {hg} at or below the failsafe pole")
    gradv = spec.barrier.grad(x)
    f = plant.drift(y)
    g = plant.input_map(y)
    acoef = gradv * g[0]
    if acoef == 0.0:
        raise DegenerateConstraint("barrier has relative degree > 1 at this state")
    rhs = -spec.gamma * hg / (hg + 1.0) - gradv * f[0]
    return _normalize(rhs, acoef)


def graceful2_constraint(state, spec: BarrierSpec, plant: ControlAffineSystem) -> AffineControlConstraint:
    """Second-order graceful constraint
    hgddot >= -2 zeta omega_n hgdot - omega_n^2 hg / (hg + 1)."""
    if spec.family is not Family.GRACEFUL2:
        raise ValueError("spec is not a graceful2 barrier")
    x, v, gradv, f, acoef = _second_order_terms(state, spec.barrier, plant)
    hg = spec.barrier.value(x)
    if hg <= -1.0:
        raise CatastropheBoundary(f"h_g = {hg} at or below the failsafe pole")
    hgdot = gradv * v
    curv = spec.barrier.curvature(x)
    rhs = (
        -(2.0 * spec.zeta * spec.omega_n) * hgdot
        - (spec.omega_n * spec.omega_n) * hg / (hg + 1.0)
        - curv * v * v
        - gradv * f[1]
    )
    return _normalize(rhs, acoef)


_CONSTRAINT_BUILDERS = {
    Family.ZEROING: zeroing_constraint,
    Family.RECIPROCAL: reciprocal_constraint,
    Family.EXPONENTIAL: exponential_constraint,
    Family.GRACEFUL1: graceful1_constraint,
    Family.GRACEFUL2: graceful2_constraint,
}


def control_constraint(state, spec: BarrierSpec, plant: ControlAffineSystem) -> AffineControlConstraint:
    """Family-dispatching entry point used by the closed-loop controller."""
    return _CONSTRAINT_BUILDERS[spec.family](state, spec, plant)


def characteristic_roots(zeta: float, omega_n: float) -> Tuple[float, float]:
    """Positive reals (g1, g2), g1 <= g2, with -g1, -g2 the roots of
    lambda^2 + 2 zeta omega_n lambda + omega_n^2 = 0.

    Requires zeta >= 1 (real roots). g1 is computed from the product
    identity g1 g2 = omega_n^2, which avoids cancellation for large zeta.
    """
    if not omega_n > 0.0:
        raise ValueError("omega_n must be positive")
    if zeta < 1.0:
        raise ComplexRoots(f"zeta = {zeta} < 1 gives complex roots")
    g2 = omega_n * (zeta + math.sqrt(zeta * zeta - 1.0))
    g1 = omega_n * omega_n / g2
    return g1, g2
