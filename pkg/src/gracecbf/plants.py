"""Control-affine plant models for the 1-D collision avoidance problems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

State = Tuple[float, ...]


@dataclass(frozen=True)
class ControlAffineSystem:
    """Input-affine dynamics dx/dt = drift(x) + input_map(x) * u, scalar input.

    ``drift`` and ``input_map`` take the state tuple and return one float per
    state component. Both must be locally Lipschitz on the simulated domain;
    the bundled plants are linear, and custom systems are spot-checked by
    finite differencing in the test suite.
    """

    dimension: int
    drift: Callable[[State], State]
    input_map: Callable[[State], State]
    tag: str = "custom"

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")


def first_order_integrator() -> ControlAffineSystem:
    """Plant with directly actuated velocity: xdot = u."""
    return ControlAffineSystem(
        dimension=1,
        drift=lambda y: (0.0,),
        input_map=lambda y: (1.0,),
        tag="first_order_integrator",
    )


def double_integrator() -> ControlAffineSystem:
    """Plant with actuated acceleration: xddot = u, state (x, xdot)."""
    return ControlAffineSystem(
        dimension=2,
        drift=lambda y: (y[1], 0.0),
        input_map=lambda y: (0.0, 1.0),
        tag="double_integrator",
    )
