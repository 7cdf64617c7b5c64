import numpy as np
import pytest

from ergodic_lattice import csit, fading, lattice, waterfilling


def fair_two_state():
    return fading.DiscreteFadingDistribution(support=np.array([1.0, 2.0]),
                                             probs=np.array([0.5, 0.5]))


# ---------------------------------------------------------------------------
# permutation designers


def test_sorted_permutation_example():
    order = csit.design_permutation_sorted([3.0, 1.0, 2.0])
    assert list(order) == [1, 2, 0]
    h = np.array([3.0, 1.0, 2.0])
    assert list(h[order]) == [1.0, 2.0, 3.0]


def test_sorted_permutation_identity():
    order = csit.design_permutation_sorted([1.0, 2.0, 3.0])
    assert list(order) == [0, 1, 2]


def test_sorted_permutation_ascending_oracle():
    dist = fair_two_state()
    for seed in range(100):
        h = fading.sample_random_location(dist, 16, seed).coeffs
        order = csit.design_permutation_sorted(h)
        assert np.all(np.diff(np.abs(h[order])) >= 0)


def test_best_effort_exact_composition():
    dist = fair_two_state()
    h = np.array([2.0, 1.0, 1.0, 2.0])
    order, overflow = csit.design_permutation_best_effort(h, dist)
    assert overflow == 0
    assert np.all(np.abs(h[order]) == np.sort(np.abs(h)))


def test_best_effort_hand_trace_spillover():
    dist = fair_two_state()
    # three strong symbols: the third takes a weak-bank slot; no tail usage
    h = np.array([2.0, 2.0, 2.0, 1.0])
    order, overflow = csit.design_permutation_best_effort(h, dist)
    assert overflow == 0
    slot_of_time = np.argsort(order)
    assert list(slot_of_time[:2]) == [2, 3]      # own-bank slots first
    assert slot_of_time[2] == 0                  # spill into the weak bank
    assert slot_of_time[3] == 1


def test_best_effort_all_strong_fills_banks():
    dist = fair_two_state()
    h = np.array([2.0, 2.0, 2.0, 2.0])
    order, overflow = csit.design_permutation_best_effort(h, dist)
    assert overflow == 0                         # lower bank absorbs the excess
    assert sorted(np.argsort(order)) == [0, 1, 2, 3]


def test_best_effort_overflow_to_tail():
    dist = fair_two_state()
    # excess weak symbols have no lower bank: they overflow to the top slots
    h = np.array([1.0, 1.0, 1.0, 2.0])
    order, overflow = csit.design_permutation_best_effort(h, dist)
    assert overflow == 1
    slot_of_time = np.argsort(order)
    assert slot_of_time[2] == 3                  # highest unused slot


def test_best_effort_rejects_non_integral_budget():
    dist = fair_two_state()
    with pytest.raises(csit.SchemeError):
        csit.design_permutation_best_effort(np.ones(5), dist)


# ---------------------------------------------------------------------------
# precoder


def test_precoder_identity():
    x = np.arange(4.0)
    out = csit.apply_precoder(x, np.arange(4), np.ones(4))
    assert np.allclose(out, x)


def test_precoder_single_state_is_identity_gain():
    dist = fading.DiscreteFadingDistribution(support=np.array([1.5]), probs=np.array([1.0]))
    pair = lattice.build_nested_pair(4, 5, g_or_seed=1, target_power=1.0)
    h = np.full(4, 1.5)
    state = csit.build_csit_state(pair, h, dist, rho=1.0)
    assert np.allclose(state.D_diag, 1.0, atol=1e-7)


def test_precoder_two_state_gains():
    dist = fair_two_state()
    pair = lattice.build_nested_pair(4, 5, g_or_seed=1, target_power=1.0)
    h = np.array([1.0, 2.0, 1.0, 2.0])
    state = csit.build_csit_state(pair, h, dist, rho=1.0)
    expect = np.sqrt(np.where(h == 1.0, 0.625, 1.375))
    assert np.allclose(state.D_diag, expect, atol=1e-6)


def test_precoder_routes_to_sorted_slots():
    x = np.array([10.0, 20.0, 30.0])
    h = np.array([3.0, 1.0, 2.0])
    order = csit.design_permutation_sorted(h)
    out = csit.apply_precoder(x, order, np.ones(3))
    # slot s carries x[s]; time order[s] transmits it
    assert np.allclose(out[order], x)


# ---------------------------------------------------------------------------
# equalizer and decision metric


def test_equalizer_affine_consistency():
    dist = fair_two_state()
    pair = lattice.build_nested_pair(4, 5, g_or_seed=1, target_power=1.0)
    h = np.array([1.0, 2.0, 1.0, 2.0])
    state = csit.build_csit_state(pair, h, dist, rho=1.0)
    d = np.array([0.1, -0.2, 0.3, 0.0])
    assert np.allclose(csit.mmse_equalize(np.zeros(4), state, d), d)


def test_equalized_noise_variance_matches_formula():
    # fixed scalar channel: empirical var of z = y' - x equals rho/(P* h^2 + 1)
    h = 1.5
    rho = 2.0
    p_star = rho                                 # single state: full budget
    eta = np.sqrt(12 * rho)
    U = np.sqrt(rho * p_star) * h / (1.0 + p_star * h * h)
    D = np.sqrt(p_star / rho)
    rng = np.random.default_rng(9)
    x = rng.uniform(-eta / 2, eta / 2, size=100_000)
    w = rng.standard_normal(100_000)
    z = U * (h * D * x + w) - x
    expect = rho / (p_star * h * h + 1.0)
    assert np.var(z) == pytest.approx(expect, rel=0.02)


def test_equalizer_high_snr_limit():
    dist = fading.DiscreteFadingDistribution(support=np.array([100.0]), probs=np.array([1.0]))
    proc = fading.BlockFadingProcess(distribution=dist, b=1)
    pair = lattice.build_nested_pair(8, 17, g_or_seed=2, target_power=1.0)
    res = csit.run_siso_trial(pair, proc, rate_backoff=None, seed=0, rho=1.0,
                              noise_scale=0.0)
    assert res.decoded_ok
    assert res.noise_metric < 1e-3               # self-noise vanishes as P* h^2 grows


def test_metric_single_state():
    dist = fading.DiscreteFadingDistribution(support=np.array([2.0]), probs=np.array([1.0]))
    pair = lattice.build_nested_pair(4, 5, g_or_seed=1, target_power=1.0)
    state = csit.build_csit_state(pair, np.full(4, 2.0), dist, rho=1.0)
    sigma = csit.build_decision_metric(state, "exact")
    assert np.allclose(sigma, 1.0 / 5.0, atol=1e-7)


def test_metric_variants_agree_without_overflow():
    dist = fair_two_state()
    pair = lattice.build_nested_pair(4, 5, g_or_seed=1, target_power=1.0)
    state = csit.build_csit_state(pair, np.array([1.0, 2.0, 1.0, 2.0]), dist, rho=1.0)
    assert np.allclose(csit.build_decision_metric(state, "exact"),
                       csit.build_decision_metric(state, "inflated"))


def test_inflated_metric_dominates():
    dist = fair_two_state()
    pair = lattice.build_nested_pair(8, 17, g_or_seed=2, target_power=1.0)
    for seed in range(50):
        h = fading.sample_random_location(dist, 8, seed).coeffs
        state = csit.build_csit_state(pair, h, dist, rho=1.0, n_out=2)
        exact = csit.build_decision_metric(state, "exact")
        inflated = csit.build_decision_metric(state, "inflated")
        assert np.all(exact <= inflated + 1e-12)


# ---------------------------------------------------------------------------
# end-to-end trials


def test_trial_noiseless_always_decodes():
    dist = fair_two_state()
    proc = fading.BlockFadingProcess(distribution=dist, b=1)
    pair = lattice.build_nested_pair(16, 31, g_or_seed=4, target_power=1.0)
    for seed in range(20):
        res = csit.run_siso_trial(pair, proc, rate_backoff=None, seed=seed,
                                  rho=1.0, noise_scale=0.0)
        assert res.decoded_ok


def test_trial_backoff_sets_operating_point():
    dist = fair_two_state()
    proc = fading.BlockFadingProcess(distribution=dist, b=1)
    pair = lattice.build_nested_pair(16, 31, g_or_seed=4, target_power=1.0)
    res = csit.run_siso_trial(pair, proc, rate_backoff=0.5, seed=0)
    assert res.capacity == pytest.approx(pair.rate / 0.5, abs=1e-6)
    assert res.rate == pytest.approx(np.log2(31) / 16)


def test_trial_iid_blocks_model_runs():
    dist = fair_two_state()
    proc = fading.BlockFadingProcess(distribution=dist, b=1)
    pair = lattice.build_nested_pair(16, 31, g_or_seed=4, target_power=1.0)
    res = csit.run_siso_trial(pair, proc, rate_backoff=0.5, seed=1,
                              channel_model="iid_blocks")
    assert res.n_out_actual >= 0


# ---------------------------------------------------------------------------
# SVD parallelization


def test_svd_diagonal_channel():
    H = np.diag([-3.0, 1.0])
    streams = csit.mimo_svd_parallelize(H)
    assert np.allclose(streams.singular_values, [3.0, 1.0])
    assert np.allclose(np.abs(streams.B).sum(axis=0), 1.0)   # signed permutation
    assert np.allclose(np.abs(streams.F).sum(axis=0), 1.0)


def test_svd_reconstruction_residual():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        N, M = rng.integers(1, 5, size=2)
        H = rng.normal(size=(N, M))
        s = csit.mimo_svd_parallelize(H)
        assert np.linalg.norm(s.B @ s.L @ s.F.T - H) <= 1e-10


def test_svd_rotated_noise_stays_white():
    rng = np.random.default_rng(4)
    H = rng.normal(size=(3, 3))
    s = csit.mimo_svd_parallelize(H)
    w = rng.standard_normal((100_000, 3))
    rotated = w @ s.B
    cov = rotated.T @ rotated / w.shape[0]
    assert np.allclose(np.diag(cov), 1.0, atol=0.02)
    off = cov - np.diag(np.diag(cov))
    assert np.all(np.abs(off) < 0.02)
