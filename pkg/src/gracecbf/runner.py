"""Scenario execution, CSV/report emission, and outcome verification."""

from __future__ import annotations

import configparser
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import analysis
from .barriers import Family, characteristic_roots
from .closedloop import safety_controller
from .scenarios import Scenario, get_scenario, registry
from .sim import EventKind, SimConfig, Trajectory, integrate

CSV_HEADER = "t,x,xdot,u,h,h2,hg,V"


@dataclass
class RunRecord:
    x0: float
    v0: Optional[float]
    collided: bool
    catastrophe: bool
    peak_abs_u: float
    min_h: float
    min_h2: Optional[float]
    min_hg: Optional[float]
    final_x: float
    wall_clock: float
    trajectory: Trajectory


@dataclass
class RunSummary:
    scenario_id: str
    records: List[RunRecord]
    expectations_ok: bool
    failures: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class VerifyReport:
    scenario_id: str
    checks: List[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _with_overrides(
    cfg: SimConfig,
    rtol: Optional[float],
    atol: Optional[float],
    horizon: Optional[float],
) -> SimConfig:
    kwargs = {}
    if rtol is not None:
        kwargs["rel_tol"] = rtol
    if atol is not None:
        kwargs["abs_tol"] = atol
    if horizon is not None:
        kwargs["horizon"] = horizon
    return replace(cfg, **kwargs) if kwargs else cfg


def attach_barrier_signals(traj: Trajectory, scenario: Scenario) -> Trajectory:
    """Populate the trajectory's barrier series from the scenario definition."""
    x = traj.states[:, 0]
    bv = traj.barrier_values
    bv["h"] = x - scenario.x_sf
    fam = scenario.barrier.family
    if fam is Family.EXPONENTIAL:
        v = traj.states[:, 1]
        bv["h2"] = v + scenario.barrier.gamma1 * (x - scenario.x_sf)
    if fam in (Family.GRACEFUL1, Family.GRACEFUL2):
        gb = scenario.barrier.barrier
        span = gb.primary - gb.catastrophe
        bv["hg"] = ((x - gb.raw.threshold) - gb.primary) / span
        if fam is Family.GRACEFUL2:
            bv["hg_dot"] = traj.states[:, 1] / span
            omega_n = scenario.barrier.omega_n
            bv["V"] = np.array(
                [
                    analysis.lyapunov_v2(float(h), float(hd), omega_n)
                    for h, hd in zip(bv["hg"], bv["hg_dot"])
                ]
            )
        else:
            bv["V"] = np.array([analysis.lyapunov_v1(float(h)) for h in bv["hg"]])
    return traj


def simulate_scenario(
    scenario: Scenario,
    ic: Sequence[float],
    *,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    horizon: Optional[float] = None,
    use_kernel: Optional[bool] = None,
) -> Trajectory:
    """Integrate one initial condition of a scenario with barrier signals attached."""
    cfg = _with_overrides(scenario.sim, rtol, atol, horizon)
    controller = safety_controller(scenario.plant, scenario.baseline, scenario.barrier)
    traj = integrate(scenario.plant, controller, tuple(ic), cfg, use_kernel=use_kernel)
    return attach_barrier_signals(traj, scenario)


def _initial_conditions(scenario: Scenario, x0, v0) -> List[Tuple[float, ...]]:
    dim = scenario.plant.dimension
    if x0 is None:
        ics = [tuple(ic) for ic in scenario.initial_conditions]
        if v0 is not None:
            if dim != 2:
                raise ValueError("v0 override only applies to second-order scenarios")
            ics = [(ic[0], float(v0)) for ic in ics]
        return ics
    x0_list = [float(x) for x in (x0 if isinstance(x0, (list, tuple)) else [x0])]
    if dim == 1:
        if v0 is not None:
            raise ValueError("v0 override only applies to second-order scenarios")
        return [(x,) for x in x0_list]
    default_v0 = scenario.initial_conditions[0][1]
    v = float(v0) if v0 is not None else default_v0
    return [(x, v) for x in x0_list]


def run_scenario(
    scenario_id: str,
    *,
    x0=None,
    v0: Optional[float] = None,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    horizon: Optional[float] = None,
    out: Optional[str] = None,
    use_kernel: Optional[bool] = None,
) -> RunSummary:
    """Run a scenario over its (possibly overridden) initial conditions.

    Writes one CSV per initial condition plus a plain-text summary when
    ``out`` is given. Expectations are checked only for the bundled initial
    conditions at default tolerances.
    """
    scenario = get_scenario(scenario_id)
    ics = _initial_conditions(scenario, x0, v0)
    overridden = any(o is not None for o in (x0, v0, rtol, atol, horizon))

    records: List[RunRecord] = []
    for ic in ics:
        t_start = time.perf_counter()
        traj = simulate_scenario(
            scenario, ic, rtol=rtol, atol=atol, horizon=horizon, use_kernel=use_kernel
        )
        wall_clock = time.perf_counter() - t_start
        bv = traj.barrier_values
        records.append(
            RunRecord(
                x0=ic[0],
                v0=ic[1] if len(ic) == 2 else None,
                collided=traj.collided,
                catastrophe=traj.event_of(EventKind.CATASTROPHE_BOUNDARY) is not None,
                peak_abs_u=traj.peak_abs_u,
                min_h=float(np.min(bv["h"])),
                min_h2=float(np.min(bv["h2"])) if "h2" in bv else None,
                min_hg=float(np.min(bv["hg"])) if "hg" in bv else None,
                final_x=float(traj.states[-1, 0]),
                wall_clock=wall_clock,
                trajectory=traj,
            )
        )

    failures: List[str] = []
    exp = scenario.expectations
    if exp is not None and not overridden:
        for rec in records:
            if rec.x0 in exp.collided and rec.collided != exp.collided[rec.x0]:
                failures.append(
                    f"x0={rec.x0:g}: expected collided={exp.collided[rec.x0]}, got {rec.collided}"
                )
            if rec.x0 in exp.peak_abs_u:
                target = exp.peak_abs_u[rec.x0]
                if abs(rec.peak_abs_u - target) > exp.peak_rel_tol * target:
                    failures.append(
                        f"x0={rec.x0:g}: peak |u| {rec.peak_abs_u:.1f} outside "
                        f"{target:g} +/- {100 * exp.peak_rel_tol:.0f}%"
                    )

    summary = RunSummary(
        scenario_id=scenario_id,
        records=records,
        expectations_ok=not failures,
        failures=failures,
    )
    if out is not None:
        out_dir = Path(out) / scenario_id
        out_dir.mkdir(parents=True, exist_ok=True)
        for rec in records:
            name = f"x0_{rec.x0:g}" + (f"_v0_{rec.v0:g}" if rec.v0 is not None else "")
            emit_csv(rec.trajectory, out_dir / f"{name}.csv")
        (out_dir / "summary.txt").write_text(format_summary(summary))
    return summary


def format_summary(summary: RunSummary) -> str:
    lines = [f"scenario: {summary.scenario_id}"]
    for rec in summary.records:
        head = f"x0={rec.x0:g}" + (f" v0={rec.v0:g}" if rec.v0 is not None else "")
        parts = [
            f"collided={rec.collided}",
            f"catastrophe={rec.catastrophe}",
            f"peak_abs_u={rec.peak_abs_u!r}",
            f"min_h={rec.min_h!r}",
        ]
        if rec.min_h2 is not None:
            parts.append(f"min_h2={rec.min_h2!r}")
        if rec.min_hg is not None:
            parts.append(f"min_hg={rec.min_hg!r}")
        parts.append(f"final_x={rec.final_x!r}")
        parts.append(f"wall_clock={rec.wall_clock:.3f}s")
        lines.append(f"  {head}:")
        for p in parts:
            lines.append(f"    {p}")
    if summary.failures:
        lines.append("expectation failures:")
        for f in summary.failures:
            lines.append(f"  {f}")
    else:
        lines.append("expectations: ok")
    return "\n".join(lines) + "\n"


def _fmt(value: float) -> str:
    return repr(float(value))


def emit_csv(traj: Trajectory, path) -> None:
    """Write one output-grid row per line, full round-trippable precision.

    Columns: t,x,xdot,u,h,h2,hg,V. xdot is blank for first-order plants and
    h2/hg/V are blank when the scenario does not define them.
    """
    bv = traj.barrier_values
    second_order = traj.states.shape[1] == 2
    h = bv.get("h")
    h2 = bv.get("h2")
    hg = bv.get("hg")
    V = bv.get("V")
    lines = [CSV_HEADER]
    for i in range(len(traj.times)):
        row = [
            _fmt(traj.times[i]),
            _fmt(traj.states[i, 0]),
            _fmt(traj.states[i, 1]) if second_order else "",
            _fmt(traj.controls[i]),
            _fmt(h[i]) if h is not None else "",
            _fmt(h2[i]) if h2 is not None else "",
            _fmt(hg[i]) if hg is not None else "",
            _fmt(V[i]) if V is not None else "",
        ]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def parse_csv(path) -> Dict[str, np.ndarray]:
    """Read an emitted CSV back into column arrays (NaN for blank fields)."""
    text = Path(path).read_text().strip().split("\n")
    header = text[0].split(",")
    if header != CSV_HEADER.split(","):
        raise ValueError(f"unexpected CSV header {text[0]!r}")
    cols: Dict[str, List[float]] = {name: [] for name in header}
    for line in text[1:]:
        parts = line.split(",")
        for name, part in zip(header, parts):
            cols[name].append(float(part) if part else math.nan)
    return {name: np.array(vals) for name, vals in cols.items()}


def fit_phase_slopes(traj: Trajectory) -> Tuple[Optional[float], Optional[float]]:
    """Least-squares slopes of u vs x on the inactive and active segments.

    For the first-order plant u is the velocity, so these are the phase-plot
    segment slopes (baseline slope and constraint slope).
    """
    x = traj.states[:, 0]
    u = traj.controls
    act = traj.active
    ok = np.isfinite(u)

    def fit(mask) -> Optional[float]:
        mask = mask & ok
        if mask.sum() < 2 or np.ptp(x[mask]) == 0.0:
            return None
        return float(np.polyfit(x[mask], u[mask], 1)[0])

    return fit(~act), fit(act)


def _descent_checks(scenario: Scenario, records: List[RunRecord]) -> List[Check]:
    checks: List[Check] = []
    fam = scenario.barrier.family
    for rec in records:
        hg0 = rec.trajectory.barrier_values["hg"][0]
        if fam is Family.GRACEFUL1:
            if hg0 >= 0.0:
                continue  # V1 descent is asserted on danger-zone starts
            rep = analysis.check_descent(rec.trajectory, "V1")
        else:
            rep = analysis.check_descent(
                rec.trajectory, "V2", omega_n=scenario.barrier.omega_n
            )
        checks.append(
            Check(
                name=f"lyapunov-descent-{rep.which}-x0={rec.x0:g}",
                passed=rep.holds,
                detail=f"max single-step increase {rep.max_increase:.3e} "
                f"(tol {rep.tolerance:g}, {rep.n_pairs} pairs)",
            )
        )
    return checks


def verify_scenario(scenario_id: str, *, use_kernel: Optional[bool] = None) -> VerifyReport:
    """Run a scenario and check its bundled expectations plus the analysis
    monitors appropriate to its family. Failures are report content."""
    scenario = get_scenario(scenario_id)
    summary = run_scenario(scenario_id, use_kernel=use_kernel)
    checks: List[Check] = []

    exp = scenario.expectations
    if exp is not None:
        flags_ok = all(
            rec.collided == exp.collided.get(rec.x0, rec.collided) for rec in summary.records
        )
        detail = ", ".join(f"x0={r.x0:g}: {r.collided}" for r in summary.records)
        checks.append(Check("collision-flags", flags_ok, detail))
        for rec in summary.records:
            if rec.x0 in exp.peak_abs_u:
                target = exp.peak_abs_u[rec.x0]
                ok = abs(rec.peak_abs_u - target) <= exp.peak_rel_tol * target
                checks.append(
                    Check(
                        name=f"peak-abs-u-x0={rec.x0:g}",
                        passed=ok,
                        detail=f"peak {rec.peak_abs_u:.1f} vs target {target:g} "
                        f"+/- {100 * exp.peak_rel_tol:.0f}%",
                    )
                )

    fam = scenario.barrier.family
    if fam in (Family.GRACEFUL1, Family.GRACEFUL2):
        for rec in summary.records:
            margin = rec.min_hg - (-1.0)
            checks.append(
                Check(
                    name=f"failsafe-margin-x0={rec.x0:g}",
                    passed=margin > 1e-6 and not rec.catastrophe,
                    detail=f"min hg + 1 = {margin:.3e}",
                )
            )
        checks.extend(_descent_checks(scenario, summary.records))

    if scenario_id == "ex1-zeroing":
        for rec in summary.records:
            if rec.x0 >= scenario.x_sf:
                checks.append(
                    Check(
                        name=f"barrier-invariance-x0={rec.x0:g}",
                        passed=rec.min_h >= -1e-6,
                        detail=f"min h = {rec.min_h:.3e}",
                    )
                )
            else:
                final_h = float(rec.trajectory.barrier_values["h"][-1])
                checks.append(
                    Check(
                        name=f"barrier-convergence-x0={rec.x0:g}",
                        passed=final_h > -1e-2,
                        detail=f"h at horizon = {final_h:.3e}",
                    )
                )
        # phase-plot slopes from the run with both segments
        rec10 = next(r for r in summary.records if r.x0 == max(r.x0 for r in summary.records))
        slope_inactive, slope_active = fit_phase_slopes(rec10.trajectory)
        k = scenario.baseline.k
        gamma = scenario.barrier.gamma
        ok = (
            slope_inactive is not None
            and slope_active is not None
            and abs(slope_inactive - (-k)) <= 0.05
            and abs(slope_active - (-gamma)) <= 0.05
        )
        checks.append(
            Check(
                name="phase-slopes",
                passed=ok,
                detail=f"baseline {slope_inactive}, constrained {slope_active} "
                f"(targets {-k:g}, {-gamma:g}, tol 0.05)",
            )
        )

    if not summary.expectations_ok:
        for f in summary.failures:
            checks.append(Check("expectation", False, f))
    return VerifyReport(scenario_id=scenario_id, checks=checks)


def verify_all(*, use_kernel: Optional[bool] = None) -> List[VerifyReport]:
    return [verify_scenario(s.id, use_kernel=use_kernel) for s in registry()]


_OVERRIDE_KEYS = {"x0", "v0", "rtol", "atol", "horizon", "out"}


def load_config(path) -> Dict[str, Dict[str, object]]:
    """Read per-scenario overrides from a key = value sections file.

    Example:

        [sc1-graceful1]
        x0 = 2, 5
        rtol = 1e-9
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file {path} not found")
    overrides: Dict[str, Dict[str, object]] = {}
    for section in parser.sections():
        get_scenario(section)  # fail fast on unknown scenario ids
        entry: Dict[str, object] = {}
        for key, value in parser.items(section):
            if key not in _OVERRIDE_KEYS:
                raise ValueError(f"config key {key!r} not allowed; use {sorted(_OVERRIDE_KEYS)}")
            if key == "out":
                entry[key] = value.strip()
            elif key == "x0":
                entry[key] = [float(v) for v in value.replace(",", " ").split()]
            else:
                entry[key] = float(value)
        overrides[section] = entry
    return overrides
