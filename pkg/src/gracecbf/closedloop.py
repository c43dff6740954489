"""Build state-feedback controllers that filter a baseline law through a barrier.

``safety_controller`` returns a plain callable state -> FilterResult. When the
plant/law/barrier combination matches one of the compiled kernel's closed-loop
forms, the callable carries a ``kernel_form`` attribute so the simulator can
take the fast path; otherwise it runs through the pure-Python stepper.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .barriers import BarrierSpec, DistanceBarrier, Family, GracefulBarrier, control_constraint
from .filtering import PD, BaselineLaw, ProportionalPosition, baseline_control, filter_scalar
from .plants import ControlAffineSystem

# plant codes
_PLANT_FIRST_ORDER = 1
_PLANT_DOUBLE = 2

# family codes
_FAM_ZEROING = 1
_FAM_EXPONENTIAL = 2
_FAM_GRACEFUL1 = 3
_FAM_GRACEFUL2 = 4


@dataclass(frozen=True)
class KernelForm:
    """Flattened closed-loop parameters consumed by the compiled stepper."""

    plant: int
    plant_tag: str
    dimension: int
    baseline: Tuple[int, float, float, float]  # (code, p0, p1, x_d)
    family: int
    params: Tuple[float, float, float, float, float]


def _kernel_form(plant: ControlAffineSystem, law: BaselineLaw, spec: BarrierSpec) -> Optional[KernelForm]:
    if plant.tag == "first_order_integrator":
        pcode, dim = _PLANT_FIRST_ORDER, 1
        if not isinstance(law, ProportionalPosition):
            return None
        baseline = (1, law.k, 0.0, law.x_d)
        if spec.family is Family.ZEROING and isinstance(spec.barrier, DistanceBarrier):
            return KernelForm(pcode, plant.tag, dim, baseline, _FAM_ZEROING,
                              (spec.gamma, spec.barrier.threshold, 0.0, 0.0, 0.0))
        if spec.family is Family.GRACEFUL1 and isinstance(spec.barrier, GracefulBarrier) \
                and isinstance(spec.barrier.raw, DistanceBarrier):
            gb = spec.barrier
            return KernelForm(pcode, plant.tag, dim, baseline, _FAM_GRACEFUL1,
                              (spec.gamma, gb.raw.threshold, gb.catastrophe, gb.primary, 0.0))
        return None
    if plant.tag == "double_integrator":
        pcode, dim = _PLANT_DOUBLE, 2
        if not isinstance(law, PD):
            return None
        baseline = (2, law.k1, law.k2, law.x_d)
        if spec.family is Family.EXPONENTIAL and isinstance(spec.barrier, DistanceBarrier):
            return KernelForm(pcode, plant.tag, dim, baseline, _FAM_EXPONENTIAL,
                              (spec.gamma1, spec.gamma2, spec.barrier.threshold, 0.0, 0.0))
        if spec.family is Family.GRACEFUL2 and isinstance(spec.barrier, GracefulBarrier) \
                and isinstance(spec.barrier.raw, DistanceBarrier):
            gb = spec.barrier
            return KernelForm(pcode, plant.tag, dim, baseline, _FAM_GRACEFUL2,
                              (spec.zeta, spec.omega_n, gb.raw.threshold, gb.catastrophe, gb.primary))
        return None
    return None


def safety_controller(plant: ControlAffineSystem, law: BaselineLaw, spec: BarrierSpec):
    """Controller applying the min-norm filter to the baseline law."""

    def controller(state):
        u_d = baseline_control(state, law)
        constraint = control_constraint(state, spec, plant)
        return filter_scalar(u_d, constraint)

    controller.kernel_form = _kernel_form(plant, law, spec)
    controller.law = law
    controller.spec = spec
    return controller
