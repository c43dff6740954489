"""Post-hoc monitors: Lyapunov descent, convergence bounds, set invariance.

These operate on recorded trajectories and never influence the simulation.
Where the plant makes the layer rate exact (hg_dot = xdot / span for the
wall plants), the recorded series is preferred; otherwise a central
finite difference on the output grid is the fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .sim import Trajectory


class DomainError(ValueError):
    """Input outside the function's mathematical domain."""


class MissingSignal(KeyError):
    """Trajectory lacks a series the requested monitor needs."""


def lyapunov_v1(h_g: float) -> float:
    """First-order graceful Lyapunov candidate h_g - ln(h_g + 1).

    Zero only at h_g = 0, positive elsewhere on (-1, inf), diverging at the
    failsafe pole.
    """
    if not h_g > -1.0:
        raise DomainError(f"lyapunov_v1 undefined at h_g = {h_g}")
    # log1p keeps the value positive down to |h_g| ~ 1e-9 where the
    # rounded h_g + 1 would lose the quadratic-order residual
    return h_g - math.log1p(h_g)


def lyapunov_v2(h_g: float, h_g_dot: float, omega_n: float) -> float:
    """Second-order candidate: kinetic term (only while h_g_dot < 0) plus
    omega_n^2 times the first-order potential. The step convention puts
    h_g_dot = 0 in the zero-kinetic branch."""
    if not omega_n > 0.0:
        raise ValueError("omega_n must be positive")
    if not h_g > -1.0:
        raise DomainError(f"lyapunov_v2 undefined at h_g = {h_g}")
    kinetic = 0.0 if h_g_dot >= 0.0 else 0.5 * h_g_dot * h_g_dot
    return kinetic + omega_n * omega_n * (h_g - math.log1p(h_g))


def implicit_bound_time(h_g_start: float, h_g_end: float, gamma: float) -> float:
    """Time for the equality dynamics hg' = -gamma hg/(hg+1) to move from
    h_g_start to h_g_end, both in (-1, 0) with h_g_start <= h_g_end."""
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    if not (-1.0 < h_g_start < 0.0 and -1.0 < h_g_end < 0.0):
        raise DomainError("both layer values must lie in (-1, 0)")
    if h_g_end < h_g_start:
        raise DomainError("h_g_end must not be below h_g_start")
    g_end = h_g_end + math.log(abs(h_g_end))
    g_start = h_g_start + math.log(abs(h_g_start))
    return -(1.0 / gamma) * (g_end - g_start)


def bound_trajectory(h_g0: float, times: Sequence[float], gamma: float) -> np.ndarray:
    """Invert the implicit bound: for each t, the layer value reached from
    h_g0 under the equality dynamics, found by bisection to 1e-12.

    The result is nondecreasing in t and approaches 0 from below.
    """
    if not (-1.0 < h_g0 < 0.0):
        raise DomainError("h_g0 must lie in (-1, 0)")
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    out = np.empty(len(times))
    for j, t in enumerate(times):
        t = float(t)
        if t < 0.0:
            raise DomainError("times must be nonnegative")
        if t == 0.0:
            out[j] = h_g0
            continue
        lo = h_g0
        hi = 0.0
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if mid >= 0.0:  # bisection collapsed onto the asymptote
                break
            if implicit_bound_time(h_g0, mid, gamma) < t:
                lo = mid
            else:
                hi = mid
        out[j] = 0.5 * (lo + hi)
    return out


@dataclass(frozen=True)
class LyapunovSample:
    time: float
    h_g: float
    h_g_dot: float
    V: float


@dataclass(frozen=True)
class DescentReport:
    which: str
    max_increase: float
    tolerance: float
    holds: bool
    n_pairs: int


@dataclass(frozen=True)
class InvarianceReport:
    set_id: str
    min_margin: float
    initial_margin: float
    violated: bool
    first_violation_time: Optional[float]


def _require(traj: Trajectory, name: str) -> np.ndarray:
    if name not in traj.barrier_values:
        raise MissingSignal(f"trajectory lacks the {name!r} series")
    return traj.barrier_values[name]


def _hg_dot(traj: Trajectory) -> np.ndarray:
    if "hg_dot" in traj.barrier_values:
        return traj.barrier_values["hg_dot"]
    hg = _require(traj, "hg")
    t = traj.times
    if len(t) < 3:
        raise MissingSignal("too few samples to finite-difference hg_dot")
    return np.gradient(hg, t)


def lyapunov_series(traj: Trajectory, which: str, omega_n: float | None = None) -> List[LyapunovSample]:
    """Evaluate V1 or V2 along a trajectory's output grid."""
    hg = _require(traj, "hg")
    if which == "V1":
        return [
            LyapunovSample(float(t), float(h), math.nan, lyapunov_v1(float(h)))
            for t, h in zip(traj.times, hg)
        ]
    if which == "V2":
        if omega_n is None:
            raise ValueError("V2 needs omega_n")
        hgd = _hg_dot(traj)
        return [
            LyapunovSample(float(t), float(h), float(hd), lyapunov_v2(float(h), float(hd), omega_n))
            for t, h, hd in zip(traj.times, hg, hgd)
        ]
    raise ValueError(f"unknown Lyapunov candidate {which!r}")


def check_descent(
    traj: Trajectory,
    which: str,
    *,
    omega_n: float | None = None,
    tolerance: float | None = None,
) -> DescentReport:
    """Largest single-step increase of the Lyapunov candidate over samples in
    its descent region: h_g < 0 for V1, -1 < h_g < 0 for V2.

    Discrete increases are robust to the kink at the filter switching
    surface, unlike derivative estimates.
    """
    if which not in ("V1", "V2"):
        raise ValueError(f"unknown Lyapunov candidate {which!r}")
    tol = tolerance if tolerance is not None else (1e-6 if which == "V1" else 1e-4)
    hg = _require(traj, "hg")
    if which == "V1":
        values = np.array([lyapunov_v1(float(h)) for h in hg])
        region = hg < 0.0
    else:
        if omega_n is None:
            raise ValueError("V2 needs omega_n")
        hgd = _hg_dot(traj)
        values = np.array([lyapunov_v2(float(h), float(hd), omega_n) for h, hd in zip(hg, hgd)])
        region = (hg > -1.0) & (hg < 0.0)

    pair_mask = region[:-1] & region[1:]
    increases = np.diff(values)[pair_mask]
    max_inc = float(np.max(increases)) if increases.size else 0.0
    return DescentReport(
        which=which,
        max_increase=max_inc,
        tolerance=tol,
        holds=max_inc <= tol,
        n_pairs=int(pair_mask.sum()),
    )


SET_IDS = ("S", "SuD", "SnS2", "Sg1", "Sg2")


def check_invariance(
    traj: Trajectory,
    set_id: str,
    *,
    tolerance: float = 1e-6,
    gamma1: float | None = None,
    gamma2: float | None = None,
) -> InvarianceReport:
    """Minimum defining margin of a safety set along a trajectory.

    Set margins:
      S    -- primary barrier (hg when present, else h)
      SuD  -- failsafe layer, hg + 1
      SnS2 -- min(h, h2) per sample
      Sg1  -- min(hg, hg_dot + gamma1 * hg)
      Sg2  -- min(hg, hg_dot + gamma2 * hg)

    A violation is a margin below -tolerance; the first such sample time is
    reported.
    """
    if set_id == "S":
        if "hg" in traj.barrier_values:
            margin = traj.barrier_values["hg"]
        elif "h" in traj.barrier_values:
            margin = traj.barrier_values["h"]
        else:
            raise MissingSignal("trajectory lacks both 'hg' and 'h' series")
    elif set_id == "SuD":
        margin = _require(traj, "hg") + 1.0
    elif set_id == "SnS2":
        margin = np.minimum(_require(traj, "h"), _require(traj, "h2"))
    elif set_id in ("Sg1", "Sg2"):
        gamma = gamma1 if set_id == "Sg1" else gamma2
        if gamma is None:
            raise ValueError(f"{set_id} needs its characteristic root")
        hg = _require(traj, "hg")
        hgd = _hg_dot(traj)
        margin = np.minimum(hg, hgd + gamma * hg)
    else:
        raise ValueError(f"unknown set id {set_id!r}; expected one of {SET_IDS}")

    min_margin = float(np.min(margin))
    violated = min_margin < -tolerance
    first_violation = None
    if violated:
        idx = int(np.argmax(margin < -tolerance))
        first_violation = float(traj.times[idx])
    return InvarianceReport(
        set_id=set_id,
        min_margin=min_margin,
        initial_margin=float(margin[0]),
        violated=violated,
        first_violation_time=first_violation,
    )
