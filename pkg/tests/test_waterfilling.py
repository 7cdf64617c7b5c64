import numpy as np
import pytest

from ergodic_lattice import csit, fading, waterfilling


def two_state():
    # gains h^2 in {1, 4}, equiprobable
    return fading.DiscreteFadingDistribution(support=np.array([1.0, 2.0]),
                                             probs=np.array([0.5, 0.5]))


def test_two_state_waterfill():
    sol = waterfilling.waterfill_scalar(two_state(), rho=1.0)
    assert sol.water_level == pytest.approx(1.625, abs=1e-6)
    assert np.allclose(sol.allocations, [0.625, 1.375], atol=1e-6)
    assert abs(sol.budget_residual) < 1e-9


def test_single_state_waterfill():
    d = fading.DiscreteFadingDistribution(support=np.array([3.0]), probs=np.array([1.0]))
    sol = waterfilling.waterfill_scalar(d, rho=2.0)
    assert sol.allocations[0] == pytest.approx(2.0, abs=1e-8)
    assert sol.water_level == pytest.approx(2.0 + 1.0 / 9.0, abs=1e-8)


def test_zero_gain_state_gets_nothing():
    d = fading.DiscreteFadingDistribution(support=np.array([0.0, 1.0]),
                                          probs=np.array([0.5, 0.5]))
    sol = waterfilling.waterfill_scalar(d, rho=1.0)
    assert sol.allocations[0] == 0.0
    assert sol.allocations[1] == pytest.approx(2.0, abs=1e-8)


def test_waterfill_rejects_bad_budget():
    with pytest.raises(waterfilling.PowerAllocationError):
        waterfilling.waterfill_scalar(two_state(), rho=0.0)


def test_two_state_capacity():
    cap = waterfilling.ergodic_capacity_csit(two_state(), rho=1.0)
    expect = 0.25 * (np.log2(1.625) + np.log2(6.5))
    assert cap == pytest.approx(expect, abs=1e-9)
    assert cap == pytest.approx(0.85022, abs=1e-5)


def test_single_state_capacity():
    d = fading.DiscreteFadingDistribution(support=np.array([1.0]), probs=np.array([1.0]))
    assert waterfilling.ergodic_capacity_csit(d, 1.0) == pytest.approx(0.5, abs=1e-9)


def test_capacity_vanishes_monotonically_with_power():
    d = two_state()
    caps = [waterfilling.ergodic_capacity_csit(d, rho) for rho in (1.0, 0.1, 0.01, 0.001)]
    assert all(a > b for a, b in zip(caps, caps[1:]))
    assert caps[-1] < 0.01


def test_power_for_target_capacity_inverts():
    d = two_state()
    rho = waterfilling.power_for_target_capacity(d, 0.85022)
    assert rho == pytest.approx(1.0, abs=1e-3)


def test_spacetime_reduces_to_scalar():
    sol = waterfilling.waterfill_spacetime([np.full(10, 2.0)], P=1.0)
    assert sol.water_level == pytest.approx(1.25, abs=1e-7)
    assert np.allclose(sol.allocations, 1.0, atol=1e-7)


def test_spacetime_degenerate_two_streams():
    sol = waterfilling.waterfill_spacetime([np.full(5, 2.0), np.full(5, 1.0)], P=1.0)
    assert sol.water_level == pytest.approx(1.125, abs=1e-7)
    assert np.allclose(sol.allocations[0], 0.875, atol=1e-7)
    assert np.allclose(sol.allocations[1], 0.125, atol=1e-7)


def test_spacetime_budget_residual():
    rng = np.random.default_rng(0)
    streams = [rng.uniform(0.2, 3.0, size=500) for _ in range(3)]
    sol = waterfilling.waterfill_spacetime(streams, P=2.0)
    assert abs(sol.budget_residual) <= 1e-8


def test_mimo_capacity_identity_channel():
    H = np.eye(1)[None]                       # one draw, 1x1, h = 1
    cap, err = waterfilling.mimo_capacity_white(H, rho=1.0)
    assert cap == pytest.approx(0.5, abs=1e-12)
    assert err == 0.0


def test_mimo_capacity_zero_channel():
    H = np.zeros((10, 2, 2))
    cap, _ = waterfilling.mimo_capacity_white(H, rho=5.0)
    assert cap == pytest.approx(0.0, abs=1e-12)


def test_mimo_capacity_seed_stability():
    dist = fading.uniform_support(1000)
    proc = fading.BlockFadingProcess(distribution=dist, b=20, dims=(2, 2))
    rho = 10.0 ** 2.0                          # 20 dB
    caps = []
    for seed in (0, 1):
        rng = np.random.default_rng(seed)
        H = rng.choice(dist.support, size=(100_000, 2, 2), p=dist.probs)
        cap, _ = waterfilling.mimo_capacity_white(H, rho)
        caps.append(cap)
    assert abs(caps[0] - caps[1]) < 0.05


def test_power_check_identity_precoder():
    rng = np.random.default_rng(1)
    rho = 1.0
    eta = np.sqrt(12 * rho)
    x = rng.uniform(-eta / 2, eta / 2, size=(20_000, 8))
    check = waterfilling.verify_power_constraint(x, rho, tol=0.05)
    assert check.passed
    assert check.mean_power == pytest.approx(rho, rel=0.05)


def test_power_check_csit_precoder():
    dist = two_state()
    rho = 1.0
    eta = np.sqrt(12 * rho)
    rng = np.random.default_rng(2)
    n = 16
    rows = []
    for i in range(10_000):
        h = fading.sample_random_location(dist, n, rng.spawn(1)[0]).coeffs
        x = rng.uniform(-eta / 2, eta / 2, size=n)
        xt = csit.apply_precoder(x, csit.design_permutation_sorted(h),
                                 _d_diag(dist, h, rho))
        rows.append(xt)
    check = waterfilling.verify_power_constraint(np.array(rows), rho, tol=0.05)
    assert check.passed
    assert check.mean_power == pytest.approx(rho, rel=0.05)


def _d_diag(dist, h, rho):
    sol = waterfilling.waterfill_scalar(dist, rho)
    return np.sqrt(sol.allocations[dist.state_index(h)] / rho)


def test_power_check_zero_codewords():
    check = waterfilling.verify_power_constraint(np.zeros((5, 4)), rho=1.0, tol=0.0)
    assert check.passed and check.mean_power == 0.0
