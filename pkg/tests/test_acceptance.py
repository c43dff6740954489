"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Criterion 3 is implemented exactly as stated and is expected to fail
for the deep-plunge starts; see its docstring for the independent oracle
that pins down the converged values.
"""

import math
import time

import numpy as np
import pytest

from conftest import ex1_exact
from gracecbf.analysis import bound_trajectory, check_descent, check_invariance
from gracecbf.barriers import characteristic_roots
from gracecbf.filtering import FilterResult
from gracecbf.plants import ControlAffineSystem
from gracecbf.runner import emit_csv, fit_phase_slopes, run_scenario, simulate_scenario
from gracecbf.scenarios import get_scenario
from gracecbf.sim import EventKind, SimConfig, integrate


def _report(num, name, passed, detail=""):
    line = f"ACCEPTANCE {num:2d} {name}: {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)


def test_criterion_01_exponential_cbf_failure_reproduction():
    t0 = time.perf_counter()
    summary = run_scenario("ex2-exponential")
    elapsed = time.perf_counter() - t0
    flags = {rec.x0: rec.collided for rec in summary.records}
    expected = {2.0: True, 5.0: True, 7.0: False, 10.0: False}
    ok = flags == expected and elapsed < 2.0
    _report(1, "exponential-cbf collision pattern", ok, f"{flags}, {elapsed:.2f} s")
    assert flags == expected
    assert elapsed < 2.0


def test_criterion_02_graceful_failsafe_guarantee():
    t0 = time.perf_counter()
    summaries = [
        run_scenario(sid)
        for sid in ("sc1-graceful1", "sc2-graceful2-over", "sc2-graceful2-under")
    ]
    elapsed = time.perf_counter() - t0
    worst = math.inf
    clean = True
    for summary in summaries:
        for rec in summary.records:
            clean &= (not rec.collided) and (not rec.catastrophe)
            worst = min(worst, rec.min_hg)
    ok = clean and worst > -1.0 + 1e-6 and elapsed < 5.0
    _report(2, "graceful failsafe guarantee", ok, f"min hg {worst:.6f}, {elapsed:.2f} s")
    assert clean
    assert worst > -1.0 + 1e-6
    assert elapsed < 5.0


def test_criterion_03_peak_accelerations():
    """Peak |u| targets 3400/200 (overdamped) and 4500/5500 (underdamped),
    each within 20 percent at default tolerances.

    The converged closed loop does not reproduce three of these targets:
    the turn depth of a plunge is set by the energy balance
    dE/d(hg) = 2 zeta wn sqrt(2 E) - wn^2 hg/(hg + 1), whose integration
    (independent of the simulator) puts the peaks near 3.0e5 (overdamped,
    x0=2), 4.3e8 (underdamped, x0=2) and 2.5e5 (underdamped, x0=5). The
    targets are only reachable with a heavily damped under-resolved
    integration; the x0=5 overdamped peak (no deep plunge) does match.
    """
    targets = {
        "sc2-graceful2-over": {2.0: 3400.0, 5.0: 200.0},
        "sc2-graceful2-under": {2.0: 4500.0, 5.0: 5500.0},
    }
    measured = {}
    failures = []
    for sid, per_x0 in targets.items():
        summary = run_scenario(sid)
        for rec in summary.records:
            target = per_x0[rec.x0]
            measured[(sid, rec.x0)] = rec.peak_abs_u
            if abs(rec.peak_abs_u - target) > 0.2 * target:
                failures.append(
                    f"{sid} x0={rec.x0:g}: measured {rec.peak_abs_u:.6g}, target {target:g} +/- 20%"
                )
    _report(3, "peak accelerations", not failures, "; ".join(failures) or "all in band")
    assert not failures, (
        "converged peak accelerations differ from the stated targets "
        f"(energy-balance oracle confirms the measured values): {failures}"
    )


def test_criterion_04_example1_oracle_equivalence():
    sc = get_scenario("ex1-zeroing")
    worst = 0.0
    for x0 in (2.0, 5.0, 7.0, 10.0):
        traj = simulate_scenario(sc, (x0,))
        worst = max(worst, float(np.max(np.abs(traj.states[:, 0] - ex1_exact(x0, traj.times)))))
    traj10 = simulate_scenario(sc, (10.0,))
    slope_inactive, slope_active = fit_phase_slopes(traj10)
    slopes_ok = abs(slope_inactive - (-0.5)) <= 0.05 and abs(slope_active - (-3.0)) <= 0.05
    ok = worst < 1e-6 and slopes_ok
    _report(
        4,
        "closed-form oracle equivalence",
        ok,
        f"max err {worst:.2e}; slopes {slope_inactive:.4f}, {slope_active:.4f}",
    )
    assert worst < 1e-6
    assert slopes_ok


def test_criterion_05_lyapunov_descent(summaries):
    reports = []
    for rec in summaries["sc1-graceful1"].records:
        if rec.trajectory.barrier_values["hg"][0] < 0.0:
            reports.append(check_descent(rec.trajectory, "V1", tolerance=1e-6))
    assert reports, "expected at least one danger-zone start in scenario 1"
    for sid in ("sc2-graceful2-over", "sc2-graceful2-under"):
        omega_n = get_scenario(sid).barrier.omega_n
        for rec in summaries[sid].records:
            reports.append(
                check_descent(rec.trajectory, "V2", omega_n=omega_n, tolerance=1e-4)
            )
    worst = max(r.max_increase for r in reports)
    ok = all(r.holds for r in reports)
    _report(5, "lyapunov descent", ok, f"worst single-step increase {worst:.3e}")
    assert ok, [r for r in reports if not r.holds]


def test_criterion_06_implicit_bound_dominance(summaries):
    rec = next(r for r in summaries["sc1-graceful1"].records if r.x0 == 2.0)
    traj = rec.trajectory
    hg = traj.barrier_values["hg"]
    assert hg[0] == -0.5
    bound = bound_trajectory(-0.5, traj.times, 3.0)
    dominance_margin = float(np.min(hg - (bound - 1e-3)))
    dominance_ok = bool(np.all(hg >= bound - 1e-3))

    # equality dynamics hg' = -gamma hg / (hg + 1), integrated by the same
    # stepper on a drift-only system, must invert the bound
    eq_sys = ControlAffineSystem(
        1, lambda y: (-3.0 * y[0] / (y[0] + 1.0),), lambda y: (0.0,)
    )
    null = lambda y: FilterResult(0.0, False, 0.0, 0.0)
    eq = integrate(eq_sys, null, (-0.5,), SimConfig(horizon=8.0))
    eq_bound = bound_trajectory(-0.5, eq.times, 3.0)
    eq_err = float(np.max(np.abs(eq.states[:, 0] - eq_bound)))
    ok = dominance_ok and eq_err <= 1e-6
    _report(
        6,
        "implicit bound dominance",
        ok,
        f"min margin {dominance_margin:.2e}; equality-dynamics err {eq_err:.2e}",
    )
    assert dominance_ok
    assert eq_err <= 1e-6


def test_criterion_07_characteristic_root_set_invariance():
    g1, g2 = characteristic_roots(2.0, 2.0)
    assert abs(g1 * g2 - 4.0) <= 1e-12 * 4.0
    assert abs(g1 + g2 - 8.0) <= 1e-12 * 8.0
    sc = get_scenario("sc2-graceful2-over")
    span = sc.x_sf - sc.x_w
    worst = math.inf
    for ic in ((3.0, 0.0), (5.0, -1.0), (7.0, 0.0), (9.0, 5.0)):
        hg0 = (ic[0] - sc.x_sf) / span
        hgd0 = ic[1] / span
        assert hg0 >= 0.0 and hgd0 + g1 * hg0 >= 0.0 and hgd0 + g2 * hg0 >= 0.0
        traj = simulate_scenario(sc, ic)
        r1 = check_invariance(traj, "Sg1", gamma1=g1)
        r2 = check_invariance(traj, "Sg2", gamma2=g2)
        worst = min(worst, r1.min_margin, r2.min_margin)
    ok = worst >= -1e-6
    _report(7, "characteristic-root set invariance", ok, f"min margin {worst:.3e}")
    assert worst >= -1e-6


def test_criterion_08_filter_properties():
    from gracecbf.barriers import AffineControlConstraint
    from gracecbf.filtering import filter_projection, filter_scalar

    rng = np.random.default_rng(42)
    ok = True
    for _ in range(10_000):
        u_d, c = rng.uniform(-100.0, 100.0, 2)
        constraint = AffineControlConstraint(1.0, float(c))
        r = filter_scalar(float(u_d), constraint)
        again = filter_scalar(r.u_star, constraint)
        ok &= again.u_star == r.u_star  # idempotence, exact
        u_prime = float(c + abs(rng.normal(0.0, 10.0)))
        ok &= abs(r.u_star - u_d) <= abs(u_prime - u_d)  # minimality
        vec = filter_projection(np.array([u_d]), constraint)
        ok &= vec.u_star[0] == r.u_star and vec.active == r.active
    _report(8, "filter properties", ok)
    assert ok


def test_criterion_09_zeroing_invariance_and_convergence(summaries):
    safe_min = math.inf
    unsafe_final = None
    for rec in summaries["ex1-zeroing"].records:
        if rec.x0 >= 3.0:
            safe_min = min(safe_min, rec.min_h)
        else:
            unsafe_final = float(rec.trajectory.barrier_values["h"][-1])
    ok = safe_min >= -1e-6 and unsafe_final is not None and unsafe_final > -1e-2
    _report(
        9,
        "zeroing-cbf invariance",
        ok,
        f"safe min h {safe_min:.2e}; h(8 s) from x0=2: {unsafe_final:.2e}",
    )
    assert safe_min >= -1e-6
    assert unsafe_final > -1e-2


def test_criterion_10_determinism_and_csv_round_trip(tmp_path):
    from gracecbf.runner import parse_csv

    paths = []
    for i in (1, 2):
        out = tmp_path / f"run{i}"
        run_scenario("sc2-graceful2-over", out=str(out))
        paths.append(out / "sc2-graceful2-over")
    names = sorted(p.name for p in paths[0].glob("*.csv"))
    assert names
    identical = all(
        (paths[0] / n).read_bytes() == (paths[1] / n).read_bytes() for n in names
    )

    rec = run_scenario("ex2-exponential", x0=[5.0]).records[0]
    csv_path = tmp_path / "rt.csv"
    emit_csv(rec.trajectory, csv_path)
    cols = parse_csv(csv_path)
    traj = rec.trajectory
    round_trip = (
        np.array_equal(cols["t"], traj.times)
        and np.array_equal(cols["x"], traj.states[:, 0])
        and np.array_equal(cols["xdot"], traj.states[:, 1])
        and np.array_equal(cols["u"], traj.controls)
        and np.array_equal(cols["h"], traj.barrier_values["h"])
        and np.array_equal(cols["h2"], traj.barrier_values["h2"])
    )
    ok = identical and round_trip
    _report(10, "determinism and csv round trip", ok, f"files {names}")
    assert identical
    assert round_trip
