import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from impiss.hybridsim import (ImpulsiveSystem, InputSignal, MeasureFn, SolverOptions,
                              SwitchedImpulsiveSystem, gamma_norm, simulate, trajectory_csv)
from impiss.timing import ImpulseSeq, cyclic_switching


def test_linear_flow_with_halving_jumps():
    gamma = ImpulseSeq((1.0, 2.0), 3.0)
    sys_ = ImpulsiveSystem.from_text(["-x1"], ["-x1/2"], gamma)
    traj = simulate(sys_, 0.0, (1.0,), None, 3.0)
    assert traj.status == "completed"
    assert traj.final_state[0] == pytest.approx(math.exp(-3.0) / 4.0, rel=1e-10)
    assert [j.k for j in traj.jumps] == [1, 2]
    assert traj.jumps[0].x_plus[0] == pytest.approx(traj.jumps[0].x_minus[0] / 2)


def test_jump_index_counts_from_the_sequence_start():
    gamma = ImpulseSeq((1.0, 2.0, 3.0), 4.0)
    sys_ = ImpulsiveSystem.from_text(["0"], ["k"], gamma)
    traj = simulate(sys_, 1.5, (0.0,), None, 4.0)
    assert [j.k for j in traj.jumps] == [2, 3]
    assert traj.final_state == (5.0,)


def test_finite_escape_time():
    sys_ = ImpulsiveSystem.from_text(["x1^2/2"], ["0"], ImpulseSeq((), 1.0))
    traj = simulate(sys_, 0.0, (8.0,), None, 1.0)
    assert traj.status == "escaped"
    assert abs(traj.t_escape - 0.25) <= 0.0125


def test_csv_has_two_rows_per_jump():
    gamma = ImpulseSeq((0.5,), 1.0)
    sys_ = ImpulsiveSystem.from_text(["0", "1"], ["1", "0"], gamma)
    text = trajectory_csv(simulate(sys_, 0.0, (0.0, 0.0), None, 1.0, SolverOptions(h0=0.25)))
    lines = text.strip().splitlines()
    assert lines[0] == "t,x1,x2,is_jump"
    jump_rows = [ln for ln in lines[1:] if not ln.startswith("#") and ln.endswith(",1")]
    assert len(jump_rows) == 2
    assert lines[-1].startswith("# status=completed")


def test_switched_system_follows_modes():
    sigma = cyclic_switching([(1, 1.0, 1), (2, 1.0, 1)], 4.0)
    sys_ = SwitchedImpulsiveSystem.from_text({1: ["1"], 2: ["-1"]}, {1: ["0"]}, sigma)
    traj = simulate(sys_, 0.0, (0.0,), None, 4.0)
    assert traj.final_state[0] == pytest.approx(0.0, abs=1e-12)
    assert traj.segment_modes[:2] == [1, 2]


def test_gamma_norm_includes_impulse_values():
    gamma = ImpulseSeq((1.0,), 2.0)
    u = InputSignal((0.0, 1.0, 1.0 + 1e-9), ((0.1,), (5.0,), (0.2,)), {}, 1)
    assert gamma_norm(u, gamma, 0.0, 2.0) == pytest.approx(5.0)


@given(st.floats(-3, 3), st.floats(0.1, 2.0))
def test_scalar_linear_flow_matches_exponential(x0, a):
    sys_ = ImpulsiveSystem.from_text([f"-{a!r}*x1"], ["0"], ImpulseSeq((), 2.0))
    traj = simulate(sys_, 0.0, (x0,), None, 2.0)
    assert traj.final_state[0] == pytest.approx(x0 * math.exp(-2 * a), rel=1e-8, abs=1e-12)


def test_measure_function():
    h = MeasureFn.from_text("sqrt(x1^2 + x2^2)", 2)
    assert h(0.0, (3.0, 4.0)) == 5.0
