"""Closed-form bound calculators shared by both transceivers.

All returned values are in bits; natural-log inequalities carry an explicit
log2(e) conversion factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG2E = float(np.log2(np.e))


class GapError(ValueError):
    pass


@dataclass(frozen=True)
class GapReport:
    capacity: float
    rate: float
    gap: float
    terms: dict = field(default_factory=dict)


def gap_csit_continuous(mean_gain, rho, bin_edges) -> GapReport:
    """Quantization-chain gap for continuous gains under full CSI.

    ``bin_edges`` are the finite quantizer edges g_0 < ... < g_L of the
    normalized gain; the law of the gain enters only through its mean.
    Returns gamma1 (worst per-bin spacing loss), gamma2 (tail loss) and
    their sum.
    """
    edges = np.asarray(bin_edges, dtype=float)
    if edges.size < 2 or edges[0] < 0 or np.any(np.diff(edges) <= 0):
        raise GapError("bin edges must increase from 0")
    gamma1 = float(np.max(np.log2(1.0 + rho * np.diff(edges))))
    gamma2 = LOG2E * mean_gain / float(edges[-1])
    return GapReport(capacity=np.nan, rate=np.nan, gap=gamma1 + gamma2,
                     terms={"gamma1": gamma1, "gamma2": gamma2})


def gap_rayleigh_csit(mean_gain, g_L) -> float:
    """Exponential-tail replacement for gamma2: log2(e) (E/g_L) e^{-g_L/E}."""
    if mean_gain <= 0 or g_L <= 0:
        raise GapError("mean gain and tail edge must be positive")
    return float(LOG2E * (mean_gain / g_L) * np.exp(-g_L / mean_gain))


def chernoff_chisq_tail(n, eps) -> float:
    """Chernoff bound e^{-(n/2)(eps - ln(1+eps))} on P(chi2_n > (1+eps) n)."""
    if eps <= 0:
        raise GapError("eps must be positive")
    if n < 1:
        raise GapError("n must be >= 1")
    return float(np.exp(-(n / 2.0) * (eps - np.log1p(eps))))


def ordering_overflow_gap(n, n_out, peak_snr, o_n_term=0.0) -> float:
    """Rate loss from best-effort ordering: (n_out/n) log2(1 + peak SNR) + o(n)/n.

    ``peak_snr`` is the largest per-symbol P* h^2; the o(n)/n diagnostic is
    caller-supplied (default 0, i.e. reported asymptotically).
    """
    if not 0 <= n_out <= n:
        raise GapError("need 0 <= n_out <= n")
    return float((n_out / n) * np.log2(1.0 + peak_snr) + o_n_term / n)
