"""Closed-loop simulation with an adaptive Dormand-Prince 5(4) stepper.

The filtered closed loop is continuous but has a derivative kink wherever the
safety constraint switches between active and inactive, and the graceful
constraints are stiff in a thin layer near the failsafe pole. The stepper
therefore combines the embedded 5(4) error estimate and PI step-size control
with two extra rules:

* an accepted step may change the constraint's active flag at most once:
  steps that straddle a switch are re-integrated up to the located switch
  time, so the kink sits at a step boundary;
* stage evaluations that cross the failsafe pole (or otherwise blow up)
  reject the step and halve it, and a persistent failure at the minimum step
  is reported as a catastrophe-boundary event rather than silently continued.

States are tuples of 1 or 2 floats. Output is sampled on a uniform grid by
cubic Hermite interpolation between accepted steps; the default maximum step
keeps the interpolation error far below the integrator tolerances.

A compiled kernel (``gracecbf._kernel``) implements the identical algorithm
for the bundled wall scenarios and is selected automatically at import when
available; this module is the reference implementation and the fallback.
The two paths perform the same floating-point operations in the same order,
so their trajectories are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .barriers import CatastropheBoundary, OutsideDomain
from .plants import ControlAffineSystem

try:
    from . import _kernel
except ImportError:  # pure-Python fallback
    _kernel = None

HAVE_FAST_KERNEL = _kernel is not None


class StepUnderflow(RuntimeError):
    """Adaptive step fell below min_step without meeting the tolerance."""

    def __init__(self, time: float):
        super().__init__(f"step size underflow at t = {time:.9g} s")
        self.time = time


class ControllerUndefined(RuntimeError):
    """The controller cannot be evaluated at the initial state."""


class NoSignChange(ValueError):
    """Event function has the same sign at both bracket ends."""


class EventKind(Enum):
    COLLISION = "collision"
    CATASTROPHE_BOUNDARY = "catastrophe_boundary"
    FINISHED = "finished"


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind


@dataclass(frozen=True)
class SimConfig:
    """Simulation protocol: horizon, output grid, and integrator tolerances.

    ``wall_position`` enables collision detection on state component 0;
    ``max_step`` bounds the accepted step so Hermite interpolation onto the
    output grid stays well below the integrator tolerances.
    """

    horizon: float = 8.0
    output_step: float = 1e-3
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    min_step: float = 1e-12
    max_step: float = 1e-2
    wall_position: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        if not self.output_step > 0.0:
            raise ValueError("output_step must be positive")
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise ValueError("tolerances must be positive")
        if not self.min_step < self.output_step:
            raise ValueError("min_step must be smaller than output_step")
        if not self.max_step > self.min_step:
            raise ValueError("max_step must exceed min_step")


@dataclass(eq=False)
class Trajectory:
    """Gridded record of one closed-loop run.

    ``barrier_values`` holds per-sample series keyed by short names
    ("h", "h2", "hg", "hg_dot", "V") as applicable to the scenario.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    active: np.ndarray
    barrier_values: Dict[str, np.ndarray]
    events: List[Event]
    terminated_early: bool
    peak_abs_u: float
    step_counts: Tuple[int, int] = (0, 0)  # accepted, rejected

    def __post_init__(self) -> None:
        n = len(self.times)
        if not (len(self.states) == len(self.controls) == len(self.active) == n):
            raise ValueError("trajectory arrays must have equal length")
        if n > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("trajectory times must be strictly increasing")

    def event_of(self, kind: EventKind) -> Optional[Event]:
        for ev in self.events:
            if ev.kind is kind:
                return ev
        return None

    @property
    def collided(self) -> bool:
        return self.event_of(EventKind.COLLISION) is not None


# Dormand-Prince 5(4) tableau (FSAL), propagating the 5th-order solution.
_A21 = 1.0 / 5.0
_A31 = 3.0 / 40.0
_A32 = 9.0 / 40.0
_A41 = 44.0 / 45.0
_A42 = -56.0 / 15.0
_A43 = 32.0 / 9.0
_A51 = 19372.0 / 6561.0
_A52 = -25360.0 / 2187.0
_A53 = 64448.0 / 6561.0
_A54 = -212.0 / 729.0
_A61 = 9017.0 / 3168.0
_A62 = -355.0 / 33.0
_A63 = 46732.0 / 5247.0
_A64 = 49.0 / 176.0
_A65 = -5103.0 / 18656.0
_B1 = 35.0 / 384.0
_B3 = 500.0 / 1113.0
_B4 = 125.0 / 192.0
_B5 = -2187.0 / 6784.0
_B6 = 11.0 / 84.0
_E1 = 71.0 / 57600.0
_E3 = -71.0 / 16695.0
_E4 = 71.0 / 1920.0
_E5 = -17253.0 / 339200.0
_E6 = 22.0 / 525.0
_E7 = -1.0 / 40.0

_SAFETY = 0.9
_FACMIN = 0.2
_FACMAX = 10.0
_BETA = 0.04
_EXPO1 = 0.17


class _StageFailure(Exception):
    def __init__(self, pole: bool):
        self.pole = pole


Segment = Tuple[float, float, Tuple[float, ...], Tuple[float, ...], Tuple[float, ...], Tuple[float, ...]]


def _hermite(seg: Segment, tq: float, n: int) -> Tuple[float, ...]:
    """Cubic Hermite interpolant over one accepted step."""
    t0, h, y0, y1, f0, f1 = seg
    th = (tq - t0) / h
    out = []
    for i in range(n):
        d = y1[i] - y0[i]
        out.append(
            y0[i]
            + th * d
            + th * (th - 1.0) * ((1.0 - 2.0 * th) * d + (th - 1.0) * h * f0[i] + th * h * f1[i])
        )
    return tuple(out)


@dataclass
class InternalSolution:
    """Adaptive-step solution kept as Hermite segments, before gridding."""

    segments: List[Segment]
    t_end: float
    y_end: Tuple[float, ...]
    system: ControlAffineSystem
    controller: Callable
    events: List[Event] = field(default_factory=list)
    terminated_early: bool = False


def locate_event(
    bracket: Tuple[float, float],
    event_fn: Callable,
    state_at: Callable[[float], object],
    *,
    time_tol: float = 1e-9,
    max_iter: int = 60,
) -> float:
    """Bisect the time of a sign change of event_fn(state_at(t)) over a bracket.

    Returns the bracket midpoint once the bracket width is at most time_tol.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise ValueError("bracket must satisfy t_lo < t_hi")
    v_lo = float(event_fn(state_at(lo)))
    v_hi = float(event_fn(state_at(hi)))
    if v_lo == 0.0:
        return lo
    if v_hi == 0.0:
        return hi
    if (v_lo > 0.0) == (v_hi > 0.0):
        raise NoSignChange(f"event function has no sign change on ({lo}, {hi})")
    pos_lo = v_lo > 0.0
    for _ in range(max_iter):
        if hi - lo <= time_tol:
            break
        mid = 0.5 * (lo + hi)
        if (float(event_fn(state_at(mid))) > 0.0) == pos_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dense_sample(internal: InternalSolution, output_step: float, grid=None) -> Trajectory:
    """Resample an adaptive-step solution onto a uniform output grid.

    ``grid`` overrides the generated uniform grid (an empty grid gives an
    empty trajectory). Every requested time must be covered by the internal
    solution. Controls are recomputed from the interpolated states.
    """
    if grid is None:
        if not output_step > 0.0:
            raise ValueError("output_step must be positive")
        m = int(math.floor(internal.t_end / output_step + 1e-6))
        grid = [i * output_step for i in range(m + 1)]
    grid = [float(t) for t in grid]
    if grid and (grid[0] < 0.0 or grid[-1] > internal.t_end + 1e-12):
        raise ValueError("requested grid is not covered by the internal solution")

    n = internal.system.dimension
    times: List[float] = []
    rows: List[Tuple[float, ...]] = []
    seg_idx = 0
    segs = internal.segments
    for tq in grid:
        while seg_idx < len(segs) - 1 and tq > segs[seg_idx][0] + segs[seg_idx][1]:
            seg_idx += 1
        if segs:
            rows.append(_hermite(segs[seg_idx], tq, n))
        else:
            rows.append(internal.y_end)
        times.append(tq)
    return _finalize(
        times,
        rows,
        internal.events,
        internal.terminated_early,
        internal.controller,
        n,
        endpoint_peak=0.0,
        step_counts=(len(segs), 0),
    )


def _finalize(times, rows, events, terminated_early, controller, n, endpoint_peak, step_counts) -> Trajectory:
    t_arr = np.asarray(times, dtype=float)
    y_arr = np.asarray(rows, dtype=float).reshape(-1, n)
    nrows = y_arr.shape[0]
    u_arr = np.empty(nrows)
    a_arr = np.zeros(nrows, dtype=bool)
    for i in range(nrows):
        try:
            res = controller(tuple(y_arr[i]))
        except (CatastropheBoundary, OutsideDomain):
            u_arr[i] = math.nan
            a_arr[i] = False
            continue
        u_arr[i] = res.u_star
        a_arr[i] = res.active
    finite = u_arr[np.isfinite(u_arr)]
    peak = max(endpoint_peak, float(np.max(np.abs(finite))) if finite.size else 0.0)
    return Trajectory(
        times=t_arr,
        states=y_arr,
        controls=u_arr,
        active=a_arr,
        barrier_values={},
        events=list(events),
        terminated_early=terminated_early,
        peak_abs_u=peak,
        step_counts=step_counts,
    )


def _normalize_state(x0, dimension: int) -> Tuple[float, ...]:
    if isinstance(x0, (int, float)):
        y = (float(x0),)
    else:
        y = tuple(float(s) for s in x0)
    if len(y) != dimension:
        raise ValueError(f"initial state has {len(y)} components, plant expects {dimension}")
    for s in y:
        if not math.isfinite(s):
            raise ValueError(f"initial state must be finite, got {y}")
    return y


def _attempt_step(eval_rhs, y0, f0, h, n, rtol, atol):
    """One Dormand-Prince trial step. Returns (y1, f1, res1, err)."""
    k1 = f0
    ys = tuple(y0[i] + h * (_A21 * k1[i]) for i in range(n))
    k2, _ = eval_rhs(ys)
    ys = tuple(y0[i] + h * (_A31 * k1[i] + _A32 * k2[i]) for i in range(n))
    k3, _ = eval_rhs(ys)
    ys = tuple(y0[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i]) for i in range(n))
    k4, _ = eval_rhs(ys)
    ys = tuple(
        y0[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i]) for i in range(n)
    )
    k5, _ = eval_rhs(ys)
    ys = tuple(
        y0[i] + h * (_A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i])
        for i in range(n)
    )
    k6, _ = eval_rhs(ys)
    y1 = tuple(
        y0[i] + h * (_B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i])
        for i in range(n)
    )
    k7, res1 = eval_rhs(y1)

    s = 0.0
    for i in range(n):
        e = h * (
            _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
        )
        a0 = abs(y0[i])
        a1 = abs(y1[i])
        big = a1 if a1 > a0 else a0
        sk = atol + rtol * big
        q = e / sk
        s += q * q
    err = math.sqrt(s / n)
    return y1, k7, res1, err


def _locate_switch(controller, seg: Segment, n: int, active0: bool) -> float:
    """Bisect the constraint activation switch inside one trial step.

    Returns the right end of the final bracket so the cut step lands just
    past the switch and the next step starts on the new branch.
    """
    t0, h = seg[0], seg[1]
    lo = t0
    hi = t0 + h
    for _ in range(80):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        try:
            res = controller(_hermite(seg, mid, n))
            same = res.active == active0
        except (CatastropheBoundary, OutsideDomain):
            same = False
        if same:
            lo = mid
        else:
            hi = mid
    return hi


def _bisect_wall(seg: Segment, lo: float, hi: float, wall: float, n: int):
    """Bisect the wall crossing x(t) = wall inside one accepted step."""
    for _ in range(60):
        if hi - lo <= 1e-9:
            break
        mid = 0.5 * (lo + hi)
        if _hermite(seg, mid, n)[0] > wall:
            lo = mid
        else:
            hi = mid
    tstar = 0.5 * (lo + hi)
    return tstar, _hermite(seg, tstar, n)


def _run_pure(system: ControlAffineSystem, controller, x0, cfg: SimConfig):
    """Reference stepping loop. Returns the raw row/event record."""
    n = system.dimension

    def eval_rhs(y):
        try:
            res = controller(y)
        except (CatastropheBoundary, OutsideDomain):
            raise _StageFailure(pole=True)
        u = res.u_star
        f = system.drift(y)
        g = system.input_map(y)
        return tuple(f[i] + g[i] * u for i in range(n)), res

    T = cfg.horizon
    dt = cfg.output_step
    wall = cfg.wall_position
    m = int(math.floor(T / dt + 1e-6))

    rows_t: List[float] = [0.0]
    rows_y: List[Tuple[float, ...]] = [x0]
    events: List[Event] = []
    segments: List[Segment] = []
    terminated = False

    if wall is not None and x0[0] <= wall:
        events.append(Event(0.0, EventKind.COLLISION))
        return dict(
            rows_t=rows_t, rows_y=rows_y, events=events, terminated_early=True,
            endpoint_peak=0.0, segments=segments, step_counts=(0, 0),
        )

    f0, res0 = eval_rhs(x0)
    peak = abs(res0.u_star)
    t = 0.0
    y = x0
    g_idx = 1
    h = min(cfg.max_step, dt, T)
    facold = 1e-4
    just_rejected = False
    split_done = False
    naccept = 0
    nreject = 0

    while T - t > 1e-12 * T:
        clamped = False
        if h > cfg.max_step:
            h = cfg.max_step
        if h >= T - t:
            h = T - t
            clamped = True
        if h < cfg.min_step and not clamped:
            raise StepUnderflow(t)

        try:
            y1, f1, res1, err = _attempt_step(eval_rhs, y, f0, h, n, cfg.rel_tol, cfg.abs_tol)
            failed_pole = False
            failed = not math.isfinite(err)
        except _StageFailure as sf:
            failed = True
            failed_pole = sf.pole
        if failed:
            nreject += 1
            just_rejected = True
            h = 0.5 * h
            if h < cfg.min_step:
                if failed_pole:
                    # the controller's pole is being reached numerically
                    events.append(Event(t, EventKind.CATASTROPHE_BOUNDARY))
                    if rows_t[-1] < t - 1e-15:
                        rows_t.append(t)
                        rows_y.append(y)
                    terminated = True
                    break
                raise StepUnderflow(t)
            continue

        if err > 1.0:
            nreject += 1
            just_rejected = True
            fac = _SAFETY * err ** (-0.2)
            if fac < _FACMIN:
                fac = _FACMIN
            h = h * fac
            if h < cfg.min_step:
                raise StepUnderflow(t)
            continue

        if (not split_done) and res1.active != res0.active:
            seg = (t, h, y, y1, f0, f1)
            t_cut = _locate_switch(controller, seg, n, res0.active)
            cut = t_cut - t
            if cut >= cfg.min_step and cut < h * (1.0 - 1e-12):
                h = cut
                split_done = True
                continue

        # accept
        naccept += 1
        t1 = T if clamped else t + h
        seg = (t, h, y, y1, f0, f1)
        segments.append(seg)

        bracket_lo = t
        while g_idx <= m:
            tq = g_idx * dt
            if tq > t1:
                break
            yq = _hermite(seg, tq, n)
            if wall is not None and yq[0] <= wall:
                ev_t, ev_y = _bisect_wall(seg, bracket_lo, tq, wall, n)
                rows_t.append(ev_t)
                rows_y.append(ev_y)
                events.append(Event(ev_t, EventKind.COLLISION))
                terminated = True
                break
            rows_t.append(tq)
            rows_y.append(yq)
            bracket_lo = tq
            g_idx += 1
        if terminated:
            break
        if wall is not None and y1[0] <= wall:
            ev_t, ev_y = _bisect_wall(seg, bracket_lo, t1, wall, n)
            rows_t.append(ev_t)
            rows_y.append(ev_y)
            events.append(Event(ev_t, EventKind.COLLISION))
            terminated = True
            break

        if err == 0.0:
            factor = _FACMAX
        else:
            factor = _SAFETY * err ** (-_EXPO1) * facold ** _BETA
        if factor > _FACMAX:
            factor = _FACMAX
        if factor < _FACMIN:
            factor = _FACMIN
        if just_rejected and factor > 1.0:
            factor = 1.0
        facold = err if err > 1e-4 else 1e-4

        t = t1
        y = y1
        f0 = f1
        res0 = res1
        if abs(res1.u_star) > peak:
            peak = abs(res1.u_star)
        h = h * factor
        just_rejected = False
        split_done = False

    if not terminated:
        if rows_t[-1] < t - 1e-15:
            rows_t.append(t)
            rows_y.append(y)
        events.append(Event(t, EventKind.FINISHED))

    return dict(
        rows_t=rows_t, rows_y=rows_y, events=events, terminated_early=terminated,
        endpoint_peak=peak, segments=segments, step_counts=(naccept, nreject),
    )


def integrate_internal(system: ControlAffineSystem, controller, x0, config: SimConfig) -> InternalSolution:
    """Run the pure stepper and return the segment-level solution."""
    y0 = _normalize_state(x0, system.dimension)
    _check_start(controller, y0)
    raw = _run_pure(system, controller, y0, config)
    t_end = raw["rows_t"][-1]
    return InternalSolution(
        segments=raw["segments"],
        t_end=t_end,
        y_end=raw["rows_y"][-1],
        system=system,
        controller=controller,
        events=raw["events"],
        terminated_early=raw["terminated_early"],
    )


def _check_start(controller, y0) -> None:
    try:
        controller(y0)
    except (CatastropheBoundary, OutsideDomain) as exc:
        raise ControllerUndefined(f"controller undefined at initial state {y0}: {exc}") from exc


def _run_kernel(kf, x0, cfg: SimConfig):
    m = int(math.floor(cfg.horizon / cfg.output_step + 1e-6))
    cap = m + 3
    out_t = np.empty(cap)
    out_y = np.empty((cap, kf.dimension))
    wall = cfg.wall_position
    status, nrows, ev_time, peak, naccept, nreject = _kernel.simulate(
        kf.plant,
        kf.baseline[0],
        kf.baseline[1],
        kf.baseline[2],
        kf.baseline[3],
        kf.family,
        kf.params[0],
        kf.params[1],
        kf.params[2],
        kf.params[3],
        kf.params[4],
        x0[0],
        x0[1] if kf.dimension == 2 else 0.0,
        cfg.horizon,
        cfg.output_step,
        cfg.rel_tol,
        cfg.abs_tol,
        cfg.min_step,
        cfg.max_step,
        wall if wall is not None else 0.0,
        wall is not None,
        m,
        out_t,
        out_y,
    )
    if status == 3:
        raise StepUnderflow(ev_time)
    rows_t = out_t[:nrows]
    rows_y = out_y[:nrows]
    events: List[Event] = []
    terminated = False
    if status == 1:
        events.append(Event(ev_time, EventKind.COLLISION))
        terminated = True
    elif status == 2:
        events.append(Event(ev_time, EventKind.CATASTROPHE_BOUNDARY))
        terminated = True
    else:
        events.append(Event(ev_time, EventKind.FINISHED))
    return dict(
        rows_t=rows_t, rows_y=rows_y, events=events, terminated_early=terminated,
        endpoint_peak=peak, segments=[], step_counts=(naccept, nreject),
    )


def integrate(
    system: ControlAffineSystem,
    controller,
    x0,
    config: Optional[SimConfig] = None,
    *,
    signals: Optional[Dict[str, Callable]] = None,
    use_kernel: Optional[bool] = None,
) -> Trajectory:
    """Integrate the filtered closed loop and return the gridded trajectory.

    ``controller`` maps a state tuple to a FilterResult. Collision with
    ``config.wall_position`` (state component 0 crossing from above) is a
    terminal event located by bisection; the trajectory is truncated at the
    crossing. ``signals`` maps column names to per-state scalar functions
    evaluated on every output sample.

    ``use_kernel``: None picks the compiled kernel automatically when the
    controller advertises a kernel form and the extension is built; True
    requires it; False forces the pure-Python path.
    """
    cfg = config if config is not None else SimConfig()
    y0 = _normalize_state(x0, system.dimension)
    _check_start(controller, y0)

    kf = getattr(controller, "kernel_form", None)
    eligible = kf is not None and kf.plant_tag == system.tag
    if use_kernel is True:
        if _kernel is None:
            raise RuntimeError("compiled kernel is not available")
        if not eligible:
            raise ValueError("controller/system pair has no compiled kernel form")
    use_fast = (use_kernel is True) or (use_kernel is None and _kernel is not None and eligible)

    raw = _run_kernel(kf, y0, cfg) if use_fast else _run_pure(system, controller, y0, cfg)
    traj = _finalize(
        raw["rows_t"],
        raw["rows_y"],
        raw["events"],
        raw["terminated_early"],
        controller,
        system.dimension,
        raw["endpoint_peak"],
        raw["step_counts"],
    )
    if signals:
        for name, fn in signals.items():
            traj.barrier_values[name] = np.array([fn(tuple(row)) for row in traj.states])
    return traj
