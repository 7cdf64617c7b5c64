"""Full-CSI transceiver: permutation precoding, power scaling, MMSE receive
scaling, decision metrics, SVD parallelization and end-to-end SISO trials.

Permutations are index arrays ``order`` with ``order[s]`` the time index that
feeds sorted slot ``s``; applying ``order`` sorts |h| ascending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lattice
from .fading import (BlockFadingProcess, DiscreteFadingDistribution, FadingError,
                     sample_block_fading, sample_random_location)
from .waterfilling import power_for_target_capacity, waterfill_scalar


class SchemeError(ValueError):
    pass


@dataclass(frozen=True)
class CsitTransceiverState:
    pair: lattice.NestedLatticePair
    perm: np.ndarray                # order[s] = time index in sorted slot s
    D_diag: np.ndarray              # per-symbol sqrt(P*(h_i)/rho), time order
    U_diag: np.ndarray              # per-symbol MMSE gain, time order
    sigma_diag: np.ndarray          # decision-metric diagonal, sorted order
    n_out: int
    rho: float
    h: np.ndarray


def design_permutation_sorted(h) -> np.ndarray:
    """Slot assignment that sorts |h| ascending; stable for equal magnitudes."""
    h = np.asarray(h, dtype=float)
    return np.argsort(np.abs(h), kind="stable")


def design_permutation_best_effort(h_stream, dist: DiscreteFadingDistribution):
    """Causal slot assignment with per-state slot banks (ascending magnitude).

    Each state k owns a bank of n*p_k consecutive slots.  A symbol goes to
    its own bank; if full, to the fullest-magnitude-below bank with room;
    failing that it is an overflow and takes the highest still-unused slot,
    nominally inside the reserved tail of ``n_out`` slots.  Returns
    (order, n_out_actual).
    """
    h_stream = np.asarray(h_stream, dtype=float)
    n = h_stream.size
    budgets = n * dist.probs
    if np.any(np.abs(budgets - np.rint(budgets)) > 1e-9):
        raise SchemeError("slot budgets n*p_k must be integral")
    budgets = np.rint(budgets).astype(int)
    offsets = np.concatenate(([0], np.cumsum(budgets[:-1])))
    states = dist.state_index(h_stream)

    fill = np.zeros(dist.size, dtype=int)
    used = np.zeros(n, dtype=bool)
    slot_of_time = np.empty(n, dtype=int)
    overflow = 0
    for i, k in enumerate(states):
        slot = -1
        for j in range(k, -1, -1):          # own bank first, then lower magnitudes
            while fill[j] < budgets[j]:
                cand = offsets[j] + fill[j]
                fill[j] += 1
                if not used[cand]:          # skip slots stolen by earlier overflow
                    slot = cand
                    break
            if slot >= 0:
                break
        if slot < 0:
            # overflow: highest unused slot (falls in the reserved tail for
            # sequences whose overflow stays within budget)
            slot = int(np.flatnonzero(~used)[-1])
            overflow += 1
        used[slot] = True
        slot_of_time[i] = slot
    order = np.empty(n, dtype=int)
    order[slot_of_time] = np.arange(n)
    return order, overflow


def build_csit_state(pair, h, dist: DiscreteFadingDistribution, rho,
                     perm=None, n_out=0) -> CsitTransceiverState:
    """Precoder/equalizer/decision data for one channel realization."""
    h = np.asarray(h, dtype=float)
    if h.size != pair.n:
        raise SchemeError("channel length does not match the lattice dimension")
    sol = waterfill_scalar(dist, rho)
    p_star = sol.allocations[dist.state_index(h)]
    if perm is None:
        perm = design_permutation_sorted(h)
    D = np.sqrt(p_star / rho)
    U = np.sqrt(rho * p_star) * h / (1.0 + p_star * h * h)
    hp = h[perm]
    pp = p_star[perm]
    sigma = rho / (pp * hp * hp + 1.0)
    return CsitTransceiverState(pair=pair, perm=np.asarray(perm), D_diag=D,
                                U_diag=U, sigma_diag=sigma, n_out=int(n_out),
                                rho=float(rho), h=h)


def apply_precoder(x, perm, D_diag) -> np.ndarray:
    """Transmit-side mapping: route sorted-slot symbols to time and scale."""
    x = np.asarray(x, dtype=float)
    perm = np.asarray(perm)
    if x.size != perm.size or x.size != np.size(D_diag):
        raise SchemeError("precoder dimension mismatch")
    xt = np.empty_like(x)
    xt[perm] = x                    # time i carries sorted slot inverse-perm(i)
    return np.asarray(D_diag) * xt


def mmse_equalize(y, state: CsitTransceiverState, d) -> np.ndarray:
    """Receive-side scaling, de-permutation and dither removal."""
    y = np.asarray(y, dtype=float)
    if y.size != state.perm.size:
        raise SchemeError("equalizer dimension mismatch")
    return (state.U_diag * y)[state.perm] + np.asarray(d, dtype=float)


def build_decision_metric(state: CsitTransceiverState, variant="exact") -> np.ndarray:
    """Diagonal of the decision ellipsoid; 'inflated' widens the overflow tail."""
    sigma = state.sigma_diag.copy()
    if variant == "inflated":
        if state.n_out > 0:
            sigma[-state.n_out:] = state.rho
    elif variant != "exact":
        raise SchemeError(f"unknown metric variant {variant!r}")
    return sigma


@dataclass(frozen=True)
class TrialResult:
    decoded_ok: bool
    message: int
    decoded_message: int
    rate: float
    capacity: float
    rho: float
    noise_metric: float             # z' Sigma^{-1} z / n
    n_out_actual: int


def run_siso_trial(pair, process: BlockFadingProcess, rate_backoff, seed,
                   rho=None, channel_model="random_location",
                   noise_scale=1.0) -> TrialResult:
    """One end-to-end encode/precode/fade/equalize/decode round trip.

    The operating SNR is chosen so that the code rate equals
    ``rate_backoff`` times the analytic achievable rate, unless ``rho`` is
    given explicitly.  ``noise_scale=0`` gives a noiseless sanity path.
    """
    dist = process.distribution
    if not isinstance(dist, DiscreteFadingDistribution):
        raise SchemeError("SISO trials need a discrete fading law")
    n = pair.n
    if rho is None:
        if not (0 < rate_backoff <= 1):
            raise SchemeError("rate backoff must be in (0, 1]")
        rho = power_for_target_capacity(dist, pair.rate / rate_backoff)
    if abs(pair.target_power - rho) > 1e-12 * max(rho, 1.0):
        pair = lattice.rescale_pair(pair, rho)  # shaping power tracks the SNR

    root = np.random.default_rng(seed)
    s_chan, s_msg, s_dith, s_noise = root.spawn(4)

    n_out = 0
    if channel_model == "random_location":
        h = sample_random_location(dist, n, s_chan).coeffs
        perm = design_permutation_sorted(h)
    elif channel_model == "iid_blocks":
        h = sample_block_fading(process, n, s_chan).coeffs
        perm, n_out = design_permutation_best_effort(h, dist)
    else:
        raise SchemeError(f"unknown channel model {channel_model!r}")

    state = build_csit_state(pair, h, dist, rho, perm=perm, n_out=n_out)
    beta = int(s_msg.integers(pair.q))
    t = lattice.fine_point(pair, beta)
    d = lattice.sample_dither(pair, s_dith)
    x = lattice.encode(pair, t, d)

    x_t = apply_precoder(x, state.perm, state.D_diag)
    w = s_noise.standard_normal(n) * noise_scale
    y = h * x_t + w
    y_eq = mmse_equalize(y, state, d.d)

    metric = build_decision_metric(state, "inflated" if n_out else "exact")
    t_hat = lattice.weighted_nearest_fine(pair, y_eq, 1.0 / metric)
    beta_hat = lattice.recover_message(pair, t_hat)

    z = y_eq - (x + d.d)            # t + lam = x + d, so z = y' - x - d
    noise_metric = float(z @ (z / metric) / n)
    capacity = float(0.5 * dist.probs @ np.log2(
        1.0 + dist.support ** 2 * waterfill_scalar(dist, rho).allocations))
    return TrialResult(decoded_ok=beta_hat == beta, message=beta,
                       decoded_message=beta_hat, rate=pair.rate,
                       capacity=capacity, rho=float(rho),
                       noise_metric=noise_metric, n_out_actual=int(n_out))


@dataclass(frozen=True)
class SvdStreams:
    B: np.ndarray                   # left orthonormal factor (N x N)
    L: np.ndarray                   # N x M rectangular diagonal
    F: np.ndarray                   # right orthonormal factor (M x M)
    singular_values: np.ndarray     # descending
    streams: int


def mimo_svd_parallelize(H) -> SvdStreams:
    """Decompose one coefficient matrix into parallel scalar streams."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2:
        raise SchemeError("expected an N x M matrix")
    N, M = H.shape
    B, s, Ft = np.linalg.svd(H)
    L = np.zeros((N, M))
    np.fill_diagonal(L, s)
    return SvdStreams(B=B, L=L, F=Ft.T, singular_values=s, streams=min(M, N))
