#!/usr/bin/env python3
"""Compare the compiled stepping kernel against the pure-Python fallback.

Times the stepping loop alone (what the extension accelerates) and the full
integrate() call (stepping plus output-row finalization, which is shared),
then cross-checks that both paths produce identical trajectories.

Usage: python benchmarks/bench_kernel.py [--repeat N]
"""

import argparse
import statistics
import time

import numpy as np

from gracecbf import sim
from gracecbf.closedloop import safety_controller
from gracecbf.runner import simulate_scenario
from gracecbf.scenarios import get_scenario

CASES = [
    ("ex1-zeroing", (10.0,)),
    ("ex2-exponential", (10.0, -25.0)),
    ("sc1-graceful1", (2.0,)),
    ("sc2-graceful2-over", (2.0, -25.0)),
    ("sc2-graceful2-under", (2.0, -25.0)),
]


def time_fn(fn, repeat):
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return min(samples), statistics.median(samples)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not sim.HAVE_FAST_KERNEL:
        print("compiled kernel not built; nothing to compare")
        return

    print(f"{'case':34s} {'pure step':>11s} {'kernel step':>12s} {'speedup':>8s}"
          f" {'pure e2e':>10s} {'kernel e2e':>11s}")
    for sid, ic in CASES:
        scenario = get_scenario(sid)
        controller = safety_controller(scenario.plant, scenario.baseline, scenario.barrier)
        y0 = tuple(float(v) for v in ic)
        cfg = scenario.sim

        pure_step, _ = time_fn(lambda: sim._run_pure(scenario.plant, controller, y0, cfg), args.repeat)
        kern_step, _ = time_fn(lambda: sim._run_kernel(controller.kernel_form, y0, cfg), args.repeat)
        pure_e2e, _ = time_fn(lambda: simulate_scenario(scenario, ic, use_kernel=False), args.repeat)
        kern_e2e, _ = time_fn(lambda: simulate_scenario(scenario, ic, use_kernel=True), args.repeat)

        label = f"{sid} x0={ic[0]:g}"
        print(f"{label:34s} {pure_step * 1e3:9.2f}ms {kern_step * 1e3:10.2f}ms"
              f" {pure_step / kern_step:7.1f}x {pure_e2e * 1e3:8.1f}ms {kern_e2e * 1e3:9.1f}ms")

        fast = simulate_scenario(scenario, ic, use_kernel=True)
        pure = simulate_scenario(scenario, ic, use_kernel=False)
        assert np.array_equal(fast.states, pure.states), f"paths diverge on {sid}"
        assert fast.step_counts == pure.step_counts

    print("\ntrajectories bit-identical across both paths")


if __name__ == "__main__":
    main()
