import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from impiss.timing import (DwellClassSpec, GenerationFailed, ImpulseSeq, InvalidSwitching,
                           activation_stats, classify, count_jumps, cyclic_switching, generate,
                           uib_evidence, uib_profile)


def test_example2_recurrence():
    g = generate("example2", 3.0, lam=2.0)
    partial = np.cumsum(1.0 / (2.0 * np.arange(1, 6)))
    assert np.allclose(g.array[:5], partial)


def test_harmonic_times():
    g = generate("harmonic", 3.0)
    assert g.times[:3] == pytest.approx((1.0, 1.5, 1.5 + 1 / 3))


def test_generation_budget():
    with pytest.raises(GenerationFailed):
        generate("example2", 10.0, lam=2.0)


def test_impulse_seq_validation():
    with pytest.raises(ValueError):
        ImpulseSeq((1.0, 1.0), 2.0)
    with pytest.raises(ValueError):
        ImpulseSeq((0.0,), 2.0)


def test_count_is_half_open():
    g = ImpulseSeq((1.0, 2.0, 3.0), 4.0)
    assert count_jumps(g, 1.0, 3.0) == 2
    assert count_jumps(g, 0.5, 1.0) == 1


@given(st.integers(0, 10_000), st.floats(0.3, 3.0), st.floats(0.0, 4.0))
def test_adt_generator_produces_members(seed, tau_d, n0):
    g = generate("adt_random", 40.0, seed, n0=n0, tau_d=tau_d)
    assert classify(g, DwellClassSpec("adt", n0=n0, tau_d=tau_d)).member


@given(st.integers(0, 10_000), st.floats(0.3, 3.0), st.floats(0.0, 4.0))
def test_radt_generator_produces_members(seed, tau_d, n0):
    n0 = max(n0, 0.05)
    g = generate("radt_random", 40.0, seed, n0=n0, tau_d=tau_d)
    assert classify(g, DwellClassSpec("radt", n0=n0, tau_d=tau_d)).member


def test_adt_violation_has_witness_window():
    g = ImpulseSeq((1.0, 1.1, 1.2, 1.3), 5.0)
    m = classify(g, DwellClassSpec("adt", n0=1.0, tau_d=1.0))
    assert not m.member
    s, t = m.witness
    assert count_jumps(g, s, t) > 1.0 + (t - s)


def test_uib_evidence_separates_periodic_from_harmonic():
    assert uib_evidence(generate("periodic", 30.0, period=0.5), 1.0)["bounded"]
    assert not uib_evidence(generate("harmonic", 12.0), 1.0)["bounded"]


def test_uib_profile_is_monotone():
    prof = uib_profile([generate("periodic", 20.0, period=0.7)], np.linspace(0, 10, 41))
    assert np.all(np.diff(prof) >= 0)


def test_cyclic_switching_exact_fractions():
    sigma = cyclic_switching([(1, 0.25, 1), (2, 0.75, 2)], 10.0)
    stats = activation_stats(sigma, {1: "u", 2: "s"}, {}, 0.0, 10.0)
    assert stats.time["u"] == pytest.approx(2.5)
    assert stats.time["s"] == pytest.approx(7.5)
    assert sum(stats.jumps.values()) == len(sigma.gamma)


def test_switching_constraint_enforced():
    with pytest.raises(InvalidSwitching):
        cyclic_switching([(1, 0.5, 1), (2, 0.5, 2)], 3.0, frozenset({(1, 2, 1)}))


def test_radt_needs_positive_n0():
    with pytest.raises(ValueError):
        generate("radt_random", 5.0, 0, n0=0.0, tau_d=1.0)
