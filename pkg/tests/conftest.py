import math

import numpy as np
import pytest

from gracecbf.runner import run_scenario


@pytest.fixture(scope="session")
def summaries():
    """One default run of every bundled scenario, shared across tests."""
    ids = [
        "ex1-zeroing",
        "ex2-exponential",
        "sc1-graceful1",
        "sc2-graceful2-over",
        "sc2-graceful2-under",
    ]
    return {sid: run_scenario(sid) for sid in ids}


def ex1_exact(x0: float, t: np.ndarray) -> np.ndarray:
    """Closed-form solution of the first-order zeroing closed loop.

    With k = 0.5, gamma = 3, x_d = 0, x_sf = 3 the two candidate controls tie
    at x = 3.6 (solve -0.5 x = -3 (x - 3)). Above 3.6 the baseline drives
    x(t) = x0 exp(-0.5 t); below, the constraint drives x towards 3 with
    rate 3.
    """
    t = np.asarray(t, dtype=float)
    if x0 >= 3.6:
        t1 = 2.0 * math.log(x0 / 3.6)
        return np.where(
            t <= t1,
            x0 * np.exp(-0.5 * t),
            3.0 + 0.6 * np.exp(-3.0 * (t - t1)),
        )
    return 3.0 + (x0 - 3.0) * np.exp(-3.0 * t)
