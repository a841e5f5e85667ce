import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from impiss.comparison import (ComparisonSystem, GuasEnvelope, example2_comparison, fit_envelope,
                               guas_check, sample_inclusion, solve_equation, solve_example2)
from impiss.funcspace import MonotonePW, SontagKL
from impiss.hybridsim import SolverOptions
from impiss.timing import ImpulseSeq, generate


def test_example2_first_flow_segment():
    traj = solve_example2(2.0, 0.0, 1.0, 0.5)
    assert traj.jumps[0].t == 0.5
    assert traj.jumps[0].x_minus[0] == pytest.approx(2.0 / 3.0, rel=1e-12)


def test_closed_form_and_numeric_solutions_agree():
    gamma = generate("example2", 3.0, lam=2.0)
    cs = example2_comparison(2.0, gamma)
    closed = solve_example2(2.0, 0.3, 1.0, 2.5, h0=1e-4, gamma=gamma)
    num = solve_equation(cs, 0.3, 1.0, 2.5, SolverOptions(h0=1e-4))
    assert np.max(np.abs(closed.points()[1] - num.points()[1])) <= 1e-4


def test_inclusion_samples_stay_below_extremal_solution():
    gamma = generate("periodic", 5.0, period=0.7)
    cs = ComparisonSystem.from_text("z + z^2/4", "0.9*z + z^2/10", gamma=gamma, monotone_jump=True)
    top = solve_equation(cs, 0.0, 1.5, 5.0)
    _, zt, _ = top.points()
    for seed in range(5):
        _, zs, _ = sample_inclusion(cs, 0.0, 1.5, 5.0, seed).points()
        assert np.all(zs[:, 0] <= zt[:, 0] + 1e-9)


def test_guas_check_reports_violation():
    gamma = ImpulseSeq((), 4.0)
    cs = ComparisonSystem.from_text("z/2", "z", gamma=gamma)
    traj = solve_equation(cs, 0.0, 1.0, 4.0)
    good = GuasEnvelope(SontagKL(MonotonePW.identity(), MonotonePW.identity(), 0.5))
    bad = GuasEnvelope(SontagKL(MonotonePW.identity(), MonotonePW.identity(), 1.0))
    assert guas_check([(traj, gamma)], good).passed
    rep = guas_check([(traj, gamma)], bad)
    assert not rep.passed and rep.witness["t"] > 0


def test_fit_envelope_detects_growth():
    gamma = generate("periodic", 6.0, period=1.0)
    cs = ComparisonSystem.from_text("z/10", "2*z", gamma=gamma)
    ens = [(solve_equation(cs, 0.0, z0, 6.0), gamma) for z0 in (0.5, 1.0, 2.0)]
    assert fit_envelope(ens).verdict == "diverges"


@given(st.floats(0.05, 5.0), st.floats(0.0, 1.0))
def test_example2_bound_property(w0, t0):
    t_end = t0 + 2.0
    traj = solve_example2(2.0, t0, w0, t_end)
    ts, ws, _ = traj.points()
    bound = max(w0, w0) * math.exp(2.0) * np.exp(-(ts - t0))
    assert np.all(ws[:, 0] <= bound + 1e-9)
