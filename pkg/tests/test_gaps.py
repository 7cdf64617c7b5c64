import numpy as np
import pytest

from ergodic_lattice import gaps


# ---------------------------------------------------------------------------
# full-CSI continuous-gain quantization chain


def test_uniform_edges_spacing_term():
    edges = np.arange(0.0, 5.5, 0.5)
    rep = gaps.gap_csit_continuous(mean_gain=1.0, rho=2.0, bin_edges=edges)
    assert rep.terms["gamma1"] == pytest.approx(np.log2(1 + 2.0 * 0.5), rel=1e-12)


def test_tail_term_value():
    edges = np.linspace(0.0, 100.0, 11)
    rep = gaps.gap_csit_continuous(mean_gain=1.0, rho=1.0, bin_edges=edges)
    assert rep.terms["gamma2"] == pytest.approx(np.log2(np.e) / 100.0, rel=1e-12)
    assert rep.terms["gamma2"] == pytest.approx(0.014427, abs=1e-6)


def test_gap_vanishes_with_joint_refinement():
    g1 = gaps.gap_csit_continuous(1.0, 1.0, np.linspace(0, 10, 11)).gap
    g2 = gaps.gap_csit_continuous(1.0, 1.0, np.linspace(0, 100, 10_001)).gap
    g3 = gaps.gap_csit_continuous(1.0, 1.0, np.linspace(0, 1000, 10_000_001)).gap
    assert g1 > g2 > g3
    assert g3 < 0.01


def test_gap_rejects_bad_edges():
    with pytest.raises(gaps.GapError):
        gaps.gap_csit_continuous(1.0, 1.0, [0.0, 0.5, 0.5])


def test_rayleigh_tail_replacement_value():
    got = gaps.gap_rayleigh_csit(mean_gain=1.0, g_L=5.0)
    assert got == pytest.approx(np.log2(np.e) * 0.2 * np.exp(-5.0), rel=1e-12)
    assert got == pytest.approx(1.944e-3, abs=2e-6)


def test_rayleigh_tail_below_general_bound():
    for mean in (0.5, 1.0, 2.0):
        for g_L in (2.0, 5.0, 20.0):
            tight = gaps.gap_rayleigh_csit(mean, g_L)
            general = np.log2(np.e) * mean / g_L
            assert tight <= general


def test_rayleigh_tail_vanishes():
    assert gaps.gap_rayleigh_csit(1.0, 1e4) < 1e-300 or \
        gaps.gap_rayleigh_csit(1.0, 1e4) == 0.0


# ---------------------------------------------------------------------------
# chi-square concentration


def test_chernoff_value():
    got = gaps.chernoff_chisq_tail(1000, 0.2)
    assert got == pytest.approx(np.exp(-500 * (0.2 - np.log(1.2))), rel=1e-12)
    assert got == pytest.approx(1.45e-4, abs=2e-6)


def test_chernoff_limit_is_one():
    assert gaps.chernoff_chisq_tail(1000, 1e-9) == pytest.approx(1.0, abs=1e-6)


def test_chernoff_dominates_empirical_tail():
    rng = np.random.default_rng(13)
    n, eps, trials = 100, 0.2, 100_000
    samples = rng.chisquare(n, trials)
    freq = np.mean(samples > (1 + eps) * n)
    assert freq <= gaps.chernoff_chisq_tail(n, eps)


# ---------------------------------------------------------------------------
# causal-ordering overflow loss


def test_overflow_gap_zero_overflow():
    assert gaps.ordering_overflow_gap(1000, 0, 15.0, o_n_term=3.0) == \
        pytest.approx(3.0 / 1000)


def test_overflow_gap_value():
    got = gaps.ordering_overflow_gap(10_000, 100, 15.0)
    assert got == pytest.approx(0.01 * 4.0, rel=1e-12)
    assert got == pytest.approx(0.04, abs=1e-9)


def test_overflow_gap_linear_in_fraction():
    a = gaps.ordering_overflow_gap(10_000, 100, 15.0)
    b = gaps.ordering_overflow_gap(10_000, 50, 15.0)
    assert a == pytest.approx(2.0 * b, rel=1e-12)


def test_overflow_gap_validation():
    with pytest.raises(gaps.GapError):
        gaps.ordering_overflow_gap(10, 11, 1.0)
