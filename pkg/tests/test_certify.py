import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from impiss.certify import (AssumptionGrid, Certificate, FalsifyOptions, IssCase,
                            LyapunovHypothesis, ParameterMismatch, PartitionIncomplete,
                            _WindowData, _candidates, _cum_weights, check_cor1, check_thm2,
                            check_thm3, check_thm4, check_thm5, check_thm6, contraction_map,
                            cor1_witnesses, diffinc_oracle, falsify, iss_check, sample_assumption,
                            lyapunov_iss_envelope, window_sup)
from impiss.comparison import example2_p_text, example2_system
from impiss.funcspace import MonotonePW, SontagKL
from impiss.hybridsim import InputSignal, MeasureFn, SolverOptions, simulate
from impiss.timing import DwellClassSpec, ImpulseSeq, cyclic_switching, generate

ID = MonotonePW.identity()


def test_certificate_json_round_trip():
    cert = check_thm3(1.0, 2.0, [generate("periodic", 20.0, period=1.0)])
    back = Certificate.from_json(cert.to_json())
    assert back.to_json() == cert.to_json()
    assert json.loads(cert.to_json())["verdict"] == "holds"


def test_certificate_rejects_negative_margin():
    with pytest.raises(ValueError):
        Certificate("thm3", "holds", {}, {"gap": -1.0}, None, {}, {})


def test_thm3_periodic_linear():
    ok = check_thm3(1.0, 2.0, [generate("periodic", 20.0, period=1.0)])
    bad = check_thm3(1.0, 2.0, [generate("periodic", 20.0, period=0.5)])
    assert ok.verdict == "holds" and ok.witnesses["eta"] > 0
    assert bad.verdict == "fails" and bad.failure["growing"]


def test_thm3_time_varying_rate_uses_integral_form():
    cert = check_thm3("1 + 0.5*sign(t - 3)", 2.0,
                      [generate("periodic", 20.0, period=1.0)])
    assert "integral_weak" in cert.conclusions


@pytest.mark.parametrize("tau,verdict", [(0.5, "fails"), (0.6, "fails"), (0.7, "holds"),
                                         (1.0, "holds")])
def test_cor1_average_dwell_threshold(tau, verdict):
    assert check_cor1(1.0, 2.0, DwellClassSpec("adt", n0=1.0, tau_d=tau)).verdict == verdict


def test_cor1_sign_checks():
    with pytest.raises(ParameterMismatch):
        check_cor1(-1.0, 2.0, DwellClassSpec("adt", n0=1.0, tau_d=1.0))
    with pytest.raises(ParameterMismatch):
        check_cor1(1.0, 0.5, DwellClassSpec("radt", n0=1.0, tau_d=1.0))


@given(st.floats(0.1, 3.0), st.floats(1.01, 10.0), st.floats(0.5, 3.0))
def test_cor1_weak_eta_positive_above_threshold(c, d, n0):
    tau = 1.05 * math.log(d) / c + 1e-6
    w = cor1_witnesses(c, d, n0, tau, "adt")
    assert w["eta"] > 0 and w["eta_strong"] > 0 and w["mu"] >= 0


def _brute_sup(times, horizon, c, lg, eta, strong):
    """Direct sup over windows (a, b] with a, b on a fine grid plus the
    impulse instants approached from both sides."""
    ts = np.asarray(times)
    pts = np.unique(np.r_[np.linspace(0, horizon, 401), ts, ts - 1e-12, horizon])
    pts = pts[(pts >= 0) & (pts <= horizon)]
    n = np.searchsorted(ts, pts, "right")
    best = 0.0
    for i, a in enumerate(pts):
        jumps = n[i:] - n[i]
        val = lg * jumps - c * (pts[i:] - a) + eta * (pts[i:] - a + (jumps if strong else 0))
        best = max(best, float(val.max()))
    return best


@given(st.lists(st.floats(0.05, 4.95), min_size=1, max_size=12, unique=True),
       st.floats(0.2, 2.0), st.floats(-1.0, 1.5), st.floats(0.0, 0.5), st.booleans())
def test_window_scan_matches_brute_force(times, c, lg, eta, strong):
    times = sorted(times)
    if min(np.diff(times), default=1.0) < 1e-6:
        return
    H = 5.0
    x, n = _candidates(np.asarray(times), H)
    w0, bl = _cum_weights([lg] * len(times))
    data = _WindowData(x, n, c * x, w0, bl, H)
    sup, _ = window_sup(data, eta, strong, [H])
    assert sup[-1] == pytest.approx(_brute_sup(times, H, c, lg, eta, strong), abs=1e-7)


@given(st.integers(0, 1000), st.floats(0.6, 2.0))
def test_strong_certificate_implies_weak(seed, tau):
    g = generate("adt_random", 30.0, seed, n0=1.0, tau_d=tau)
    strong = check_thm3(1.0, 2.0, [g], mode="strong")
    weak = check_thm3(1.0, 2.0, [g], mode="weak")
    if strong.holds:
        assert weak.holds


def test_thm2_periodic_and_harmonic():
    hyp = LyapunovHypothesis.general(1, "abs(x1)", "r", "r", ID, ID, ID, ID)
    per = check_thm2(hyp, [generate("periodic", 20.0, period=1.0)])
    assert per.conclusions["strong"] == "holds"
    bad = LyapunovHypothesis.general(1, "abs(x1)", "-r", "r", ID, ID, ID, ID)
    assert check_thm2(bad, [generate("periodic", 10.0, period=1.0)]).verdict == "fails"


def test_thm4_scalar_example_and_undetermined_variant():
    ok = check_thm4("if_le(r,1,r*2^(-r),0.5)", "-if_le(r,1,r^2,r)", 1.0, 0.4, "max_dwell")
    assert ok.holds and ok.witnesses["N_star"] == pytest.approx(math.log(2), rel=1e-6)
    und = check_thm4("if_le(r,1,r*2^(-r),0.5)", "-r^2", 1.0, 0.4, "max_dwell")
    assert und.verdict == "inconclusive"


def test_thm4_min_dwell():
    assert check_thm4("exp(1)*r", "r", 1.0, 2.0, "min_dwell").holds
    assert check_thm4("exp(1)*r", "r", 1.0, 0.5, "min_dwell").verdict == "fails"


FC = {1: "n", 2: "s", 3: "u"}
JC = {(a, b, j): ("u" if (j == 3 and a == 1) else "s" if (j == 2 and b in (2, 3)) else "n")
      for a in (1, 2, 3) for b in (1, 2, 3) for j in (1, 2, 3)}


def _cycle(p_s, p_n=0.01):
    return cyclic_switching([(1, p_n, 3), (2, p_s, 1), (3, 1 - p_s - p_n, 2)], 20.0)


def test_thm5_activation_threshold():
    assert check_thm5([_cycle(0.95)], FC, JC, 1, 3, 0, 2).holds
    assert check_thm5([_cycle(0.90)], FC, JC, 1, 3, 0, 2).verdict == "fails"


def test_thm5_partition_must_cover_modes():
    with pytest.raises(PartitionIncomplete):
        check_thm5([_cycle(0.95)], {1: "n", 2: "s"}, JC, 1, 3, 0, 2)


def test_thm6_two_modes():
    modes = {1: (1.0, "-r"), 2: (1.0, "-r")}
    ok = check_thm6(modes, "r/2", {1: 0.5, 2: 0.5}, "max_dwell")
    assert ok.holds and ok.witnesses["contraction"] == pytest.approx(math.exp(0.5) / 2, abs=1e-6)
    assert check_thm6(modes, "r/2", {1: 1.0, 2: 1.0}, "max_dwell").verdict == "fails"


def test_diffinc_oracle_stalls_on_identity():
    res = diffinc_oracle(lambda z: z, 1.0)
    assert res.verdict == "stalls"


def _example2_hyp(rate):
    lam, L = 2.0, "2.0"
    return LyapunovHypothesis.general(1, "abs(x1)", rate,
                                      f"{example2_p_text(lam, 'r', 'r')}*exp(-1/({L}*k))",
                                      ID, ID, ID, ID)


def test_assumption_sampling_on_scalar_family():
    sys_ = example2_system(2.0, 5.0)
    grid = AssumptionGrid(ts=(0.0, 0.3, 1.1),
                          xs=tuple((v,) for v in (-5.0, -1.0, -0.3, 0.01, 0.2, 0.7, 1.5, 4.0, 9.0)),
                          us=tuple((v,) for v in (0.0, 0.1, 0.5, 1.0, 2.0)))
    assert sample_assumption(_example2_hyp("r^2.0"), sys_, grid).verdict == "not_falsified"
    rep = sample_assumption(_example2_hyp("2*r^2.0"), sys_, grid)
    assert rep.verdict == "falsified" and rep.witness is not None


def test_falsification_witness_reproduces():
    sys_ = example2_system(2.0, 5.0)
    h = MeasureFn.from_text("abs(x1)", 1)
    beta, rho = lyapunov_iss_envelope(SontagKL(ID, ID, 1.0, 1.0), ID, ID, ID, ID)
    opts = FalsifyOptions(t0_max=2.5, duration=1.5, u_range=(0.0, 0.0))
    res = falsify(sys_, h, h, beta, rho, "weak", budget=60, seed=3, opts=opts)
    assert res.verdict == "counterexample"
    cx = res.counterexample
    u = InputSignal(tuple(cx["u"]["starts"]), tuple(tuple(v) for v in cx["u"]["values"]), {}, 1)
    traj = simulate(sys_, cx["t0"], tuple(cx["x0"]), u, min(cx["t0"] + 1.5, 5.0),
                    SolverOptions(h0=opts.h0))
    rep = iss_check([IssCase(traj, u, sys_.impulses)], h, h, beta, rho, "weak")
    assert not rep.passed
    assert rep.witness["t"] == pytest.approx(cx["t"])
