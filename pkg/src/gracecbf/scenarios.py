"""Bundled wall collision-avoidance scenarios.

All experiment constants live here, in one place: desired position 0 m, wall
at 1 m, safe distance 3 m, and the gains for each controller family. The
four experiment groups are

  ex1-zeroing          first-order plant, zeroing constraint
  ex2-exponential      second-order plant, exponential constraint
  sc1-graceful1        first-order plant, graceful two-layer constraint
  sc2-graceful2-over   second-order plant, graceful, overdamped (zeta = 2)
  sc2-graceful2-under  second-order plant, graceful, underdamped (zeta = 0.5)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

from .barriers import BarrierSpec, DistanceBarrier, GracefulBarrier
from .filtering import PD, BaselineLaw, ProportionalPosition
from .plants import ControlAffineSystem, double_integrator, first_order_integrator
from .sim import SimConfig


class UnknownScenario(KeyError):
    pass


# experiment constants
X_D = 0.0  # desired target location, m
X_W = 1.0  # wall location, m
X_SF = 3.0  # safe distance, m
K = 0.5  # first-order baseline gain, 1/s
GAMMA = 3.0  # zeroing / graceful1 gain, 1/s
K1 = 1.0  # second-order baseline proportional gain, 1/s^2
K2 = 2.0  # second-order baseline differential gain, 1/s
GAMMA1 = 4.5  # exponential first-layer gain, 1/s
GAMMA2 = 0.5  # exponential second-layer gain, 1/s
OMEGA_N = 2.0  # graceful2 natural frequency, rad/s
ZETA_OVER = 2.0
ZETA_UNDER = 0.5
V0_SECOND_ORDER = -25.0  # initial velocity for second-order runs, m/s
HORIZON = 8.0  # s
OUTPUT_STEP = 1e-3  # s
X0_SET = (2.0, 5.0, 7.0, 10.0)
X0_SET_SC2 = (2.0, 5.0)


@dataclass(frozen=True)
class Expectations:
    """Outcome targets attached to bundled scenarios only."""

    collided: Mapping[float, bool]
    peak_abs_u: Mapping[float, float] = field(default_factory=dict)
    peak_rel_tol: float = 0.2


@dataclass(frozen=True)
class Scenario:
    id: str
    description: str
    plant: ControlAffineSystem
    baseline: BaselineLaw
    barrier: BarrierSpec
    initial_conditions: Tuple[Tuple[float, ...], ...]
    sim: SimConfig
    x_d: float
    x_w: float
    x_sf: float
    expectations: Optional[Expectations] = None


def _sim() -> SimConfig:
    return SimConfig(horizon=HORIZON, output_step=OUTPUT_STEP, wall_position=X_W)


def _graceful_wall_barrier() -> GracefulBarrier:
    return GracefulBarrier(raw=DistanceBarrier(0.0), catastrophe=X_W, primary=X_SF)


def _build_registry() -> Dict[str, Scenario]:
    scenarios = [
        Scenario(
            id="ex1-zeroing",
            description="first-order plant, zeroing constraint",
            plant=first_order_integrator(),
            baseline=ProportionalPosition(k=K, x_d=X_D),
            barrier=BarrierSpec.zeroing(DistanceBarrier(X_SF), gamma=GAMMA),
            initial_conditions=tuple((x0,) for x0 in X0_SET),
            sim=_sim(),
            x_d=X_D,
            x_w=X_W,
            x_sf=X_SF,
            expectations=Expectations(collided={x0: False for x0 in X0_SET}),
        ),
        Scenario(
            id="ex2-exponential",
            description="second-order plant, exponential constraint",
            plant=double_integrator(),
            baseline=PD(k1=K1, k2=K2, x_d=X_D),
            barrier=BarrierSpec.exponential(DistanceBarrier(X_SF), gamma1=GAMMA1, gamma2=GAMMA2),
            initial_conditions=tuple((x0, V0_SECOND_ORDER) for x0 in X0_SET),
            sim=_sim(),
            x_d=X_D,
            x_w=X_W,
            x_sf=X_SF,
            expectations=Expectations(
                collided={2.0: True, 5.0: True, 7.0: False, 10.0: False}
            ),
        ),
        Scenario(
            id="sc1-graceful1",
            description="first-order plant, graceful two-layer constraint",
            plant=first_order_integrator(),
            baseline=ProportionalPosition(k=K, x_d=X_D),
            barrier=BarrierSpec.graceful1(_graceful_wall_barrier(), gamma=GAMMA),
            initial_conditions=tuple((x0,) for x0 in X0_SET),
            sim=_sim(),
            x_d=X_D,
            x_w=X_W,
            x_sf=X_SF,
            expectations=Expectations(collided={x0: False for x0 in X0_SET}),
        ),
        Scenario(
            id="sc2-graceful2-over",
            description="second-order plant, graceful constraint, overdamped",
            plant=double_integrator(),
            baseline=PD(k1=K1, k2=K2, x_d=X_D),
            barrier=BarrierSpec.graceful2(_graceful_wall_barrier(), zeta=ZETA_OVER, omega_n=OMEGA_N),
            initial_conditions=tuple((x0, V0_SECOND_ORDER) for x0 in X0_SET_SC2),
            sim=_sim(),
            x_d=X_D,
            x_w=X_W,
            x_sf=X_SF,
            expectations=Expectations(
                collided={x0: False for x0 in X0_SET_SC2},
                peak_abs_u={2.0: 3400.0, 5.0: 200.0},
            ),
        ),
        Scenario(
            id="sc2-graceful2-under",
            description="second-order plant, graceful constraint, underdamped",
            plant=double_integrator(),
            baseline=PD(k1=K1, k2=K2, x_d=X_D),
            barrier=BarrierSpec.graceful2(_graceful_wall_barrier(), zeta=ZETA_UNDER, omega_n=OMEGA_N),
            initial_conditions=tuple((x0, V0_SECOND_ORDER) for x0 in X0_SET_SC2),
            sim=_sim(),
            x_d=X_D,
            x_w=X_W,
            x_sf=X_SF,
            expectations=Expectations(
                collided={x0: False for x0 in X0_SET_SC2},
                peak_abs_u={2.0: 4500.0, 5.0: 5500.0},
            ),
        ),
    ]
    return {s.id: s for s in scenarios}


_REGISTRY = _build_registry()


def registry() -> Tuple[Scenario, ...]:
    """All bundled scenarios, in definition order."""
    return tuple(_REGISTRY.values())


def get_scenario(scenario_id: str) -> Scenario:
    try:
        return _REGISTRY[scenario_id]
    except KeyError:
        known = ", ".join(_REGISTRY)
        raise UnknownScenario(f"unknown scenario {scenario_id!r}; known: {known}") from None
