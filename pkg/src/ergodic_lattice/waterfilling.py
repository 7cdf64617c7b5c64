"""Waterfilling power allocation and ergodic capacity calculators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fading import DiscreteFadingDistribution, FadingError


class PowerAllocationError(ValueError):
    pass


@dataclass(frozen=True)
class WaterfillSolution:
    water_level: float
    allocations: np.ndarray
    active_set: np.ndarray          # boolean mask of states with positive power
    budget_residual: float


def _alloc(c, inv_gain):
    # (c - 1/h^2)^+ with zero-gain states (inv_gain = inf) pinned to zero
    a = c - inv_gain
    return np.where(np.isfinite(inv_gain), np.maximum(a, 0.0), 0.0)


def waterfill_scalar(dist: DiscreteFadingDistribution, rho, tol=1e-10) -> WaterfillSolution:
    """Bisection on the water level for E_h[(c - 1/h^2)^+] = rho."""
    if rho <= 0:
        raise PowerAllocationError("power budget must be positive")
    gains = dist.support ** 2
    if not np.any(gains > 0):
        raise PowerAllocationError("all-zero support")
    with np.errstate(divide="ignore"):
        inv_gain = np.where(gains > 0, 1.0 / gains, np.inf)
    finite = inv_gain[np.isfinite(inv_gain)]
    active_mass = float(dist.probs[np.isfinite(inv_gain)].sum())
    if active_mass <= 0:
        raise PowerAllocationError("no probability mass on positive gains")
    lo = float(finite.min())
    hi = float(finite.max()) + rho / active_mass
    for _ in range(200):
        c = 0.5 * (lo + hi)
        total = float(dist.probs @ _alloc(c, inv_gain))
        if abs(total - rho) <= tol:
            break
        if total < rho:
            lo = c
        else:
            hi = c
    alloc = _alloc(c, inv_gain)
    return WaterfillSolution(water_level=float(c), allocations=alloc,
                             active_set=alloc > 0,
                             budget_residual=float(dist.probs @ alloc - rho))


def ergodic_capacity_csit(dist: DiscreteFadingDistribution, rho) -> float:
    """Capacity 0.5 * E_h[log2(1 + h^2 P*(h))] with waterfilling power."""
    sol = waterfill_scalar(dist, rho)
    gains = dist.support ** 2
    return float(0.5 * dist.probs @ np.log2(1.0 + gains * sol.allocations))


def power_for_target_capacity(dist, target, tol=1e-9, rho_hi=None) -> float:
    """Invert ergodic_capacity_csit for rho; used to set trial operating points."""
    if target <= 0:
        raise PowerAllocationError("target capacity must be positive")
    lo = 0.0
    hi = rho_hi or 1.0
    while ergodic_capacity_csit(dist, hi) < target:
        hi *= 2.0
        if hi > 1e12:
            raise PowerAllocationError("target capacity unreachable")
    for _ in range(200):
        rho = 0.5 * (lo + hi)
        if rho == 0.0:
            lo = hi * 1e-12
            continue
        c = ergodic_capacity_csit(dist, rho)
        if abs(c - target) <= tol:
            break
        if c < target:
            lo = rho
        else:
            hi = rho
    return float(rho)


def waterfill_spacetime(singular_value_samples, P, tol=1e-8) -> WaterfillSolution:
    """Space-time waterfilling over per-stream singular-value draws.

    ``singular_value_samples`` is a list of per-stream sample arrays; the
    expectation in the budget equation is replaced by the sample average.
    Returns per-(stream, sample) allocations.
    """
    streams = [np.asarray(s, dtype=float) for s in singular_value_samples]
    if not streams or any(s.size == 0 for s in streams):
        raise PowerAllocationError("need at least one sample per stream")
    if P <= 0:
        raise PowerAllocationError("power budget must be positive")
    with np.errstate(divide="ignore"):
        inv_gains = [np.where(s > 0, 1.0 / s ** 2, np.inf) for s in streams]
    finite = np.concatenate([ig[np.isfinite(ig)] for ig in inv_gains])
    if finite.size == 0:
        raise PowerAllocationError("all singular values are zero")
    active_mass = sum(float(np.mean(np.isfinite(ig))) for ig in inv_gains)
    lo = float(finite.min())
    hi = float(finite.max()) + P / active_mass
    for _ in range(200):
        c = 0.5 * (lo + hi)
        total = sum(float(np.mean(_alloc(c, ig))) for ig in inv_gains)
        if abs(total - P) <= tol:
            break
        if total < P:
            lo = c
        else:
            hi = c
    allocs = [_alloc(c, ig) for ig in inv_gains]
    active = np.array([bool(np.any(a > 0)) for a in allocs])
    residual = sum(float(np.mean(a)) for a in allocs) - P
    return WaterfillSolution(water_level=float(c),
                             allocations=np.array(allocs, dtype=object)
                             if len({a.size for a in allocs}) > 1 else np.array(allocs),
                             active_set=active, budget_residual=float(residual))


def mimo_capacity_white(h_samples, rho) -> tuple[float, float]:
    """Monte Carlo white-input capacity 0.5*E[log2 det(I_M + rho' H'H)].

    ``h_samples`` has shape (draws, N, M); rho' = rho/M is the per-antenna
    SNR.  Returns (capacity, standard error).
    """
    H = np.asarray(h_samples, dtype=float)
    if H.ndim != 3:
        raise PowerAllocationError("h_samples must have shape (draws, N, M)")
    draws, N, M = H.shape
    rho_p = rho / M
    gram = np.einsum("knm,knp->kmp", H, H)
    per_draw = 0.5 * np.log2(np.linalg.det(np.eye(M)[None] + rho_p * gram))
    cap = float(per_draw.mean())
    stderr = float(per_draw.std(ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
    return cap, stderr


@dataclass(frozen=True)
class PowerCheck:
    mean_power: float
    passed: bool


def verify_power_constraint(precoded_samples, rho, tol) -> PowerCheck:
    """Empirical per-dimension power of precoded codewords against the budget."""
    x = np.asarray(precoded_samples, dtype=float)
    if x.size == 0:
        raise PowerAllocationError("empty sample set")
    if x.ndim == 1:
        x = x[None, :]
    mean_power = float(np.mean(np.sum(x * x, axis=1)) / x.shape[1])
    return PowerCheck(mean_power=mean_power, passed=mean_power <= rho * (1.0 + tol))
