"""Nested lattice codebooks built from a prime-field Construction-A code.

The coarse (shaping) lattice is the scaled cubic lattice eta*Z^n, whose
fundamental region is the hypercube [-eta/2, eta/2)^n with second moment
eta^2/12 per dimension.  The fine (coding) lattice lifts a rank-one linear
code over F_q into R^n, giving q cosets of the coarse lattice and rate
log2(q)/n bits per dimension.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LatticeError(ValueError):
    pass


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


def _round_half_down(x: np.ndarray) -> np.ndarray:
    # nearest integer, ties toward -inf (0.5 -> 0, -0.5 -> -1)
    return np.ceil(x - 0.5)


@dataclass(frozen=True)
class NestedLatticePair:
    """Coarse/fine lattice pair with q messages.

    The fine lattice is eta * (C/q + Z^n) with C = {g*beta mod q}; the coarse
    lattice eta*Z^n is the beta=0 coset, so nesting is exact by construction.
    """

    n: int
    q: int
    g: np.ndarray            # generator row, entries in {0..q-1}
    eta: float               # coarse scaling; second moment = eta^2/12
    target_power: float      # per-dimension second moment of the coarse lattice
    coset_offsets: np.ndarray  # (q, n) coset representatives inside the shaping region

    @property
    def rate(self) -> float:
        """Code rate in bits per dimension: log2(q)/n."""
        return float(np.log2(self.q) / self.n)

    @property
    def codebook_size(self) -> int:
        return self.q


@dataclass(frozen=True)
class LatticePoint:
    coords: np.ndarray
    coset_index: int


@dataclass(frozen=True)
class Dither:
    d: np.ndarray


def build_nested_pair(n, q, g_or_seed=None, target_power=1.0 / 12.0) -> NestedLatticePair:
    """Construct a nested pair with q messages and coarse second moment rho.

    ``g_or_seed`` is either an explicit generator row (length n, entries in
    {0..q-1}, not all zero mod q) or an integer seed used to draw one
    uniformly, redrawing until some entry is coprime to q.
    """
    if not _is_prime(q):
        raise LatticeError(f"q must be prime, got {q}")
    if n < 1:
        raise LatticeError(f"n must be >= 1, got {n}")
    if target_power <= 0:
        raise LatticeError(f"target power must be positive, got {target_power}")

    if g_or_seed is None or np.isscalar(g_or_seed):
        rng = np.random.default_rng(g_or_seed)
        g = rng.integers(0, q, size=n)
        while not np.any(g % q):
            g = rng.integers(0, q, size=n)
    else:
        g = np.asarray(g_or_seed, dtype=np.int64) % q
        if g.shape != (n,):
            raise LatticeError(f"generator must have length {n}")
        if not np.any(g):
            raise LatticeError("generator is zero mod q")

    eta = float(np.sqrt(12.0 * target_power))
    # representatives of the q fine cosets, folded into [-eta/2, eta/2)^n
    frac = (np.outer(np.arange(q), g) % q) / q          # in [0, 1)
    offsets = eta * frac
    offsets = offsets - eta * _round_half_down(offsets / eta)
    return NestedLatticePair(n=n, q=int(q), g=g.astype(np.int64), eta=eta,
                             target_power=float(target_power), coset_offsets=offsets)


def rescale_pair(pair: NestedLatticePair, target_power: float) -> NestedLatticePair:
    """Same code, rescaled so the coarse second moment equals target_power."""
    if target_power <= 0:
        raise LatticeError(f"target power must be positive, got {target_power}")
    eta = float(np.sqrt(12.0 * target_power))
    scale = eta / pair.eta
    return NestedLatticePair(n=pair.n, q=pair.q, g=pair.g, eta=eta,
                             target_power=float(target_power),
                             coset_offsets=pair.coset_offsets * scale)


def _check_dim(pair: NestedLatticePair, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.shape != (pair.n,):
        raise LatticeError(f"expected length-{pair.n} vector, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise LatticeError("non-finite input")
    return s


def quantize_coarse(pair: NestedLatticePair, s) -> LatticePoint:
    """Nearest coarse-lattice point, per-coordinate ties rounded half-down."""
    s = _check_dim(pair, s)
    coords = pair.eta * _round_half_down(s / pair.eta)
    return LatticePoint(coords=coords, coset_index=0)


def mod_coarse(pair: NestedLatticePair, s) -> np.ndarray:
    """Fold s into the fundamental region of the coarse lattice."""
    s = _check_dim(pair, s)
    return s - pair.eta * _round_half_down(s / pair.eta)


def sample_dither(pair: NestedLatticePair, seed) -> Dither:
    """Uniform dither over the shaping hypercube, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    half = pair.eta / 2.0
    return Dither(d=rng.uniform(-half, half, size=pair.n))


def fine_point(pair: NestedLatticePair, beta: int) -> LatticePoint:
    """Codebook point for message beta (coset representative inside the region)."""
    beta = int(beta) % pair.q
    return LatticePoint(coords=pair.coset_offsets[beta].copy(), coset_index=beta)


def coset_index_of(pair: NestedLatticePair, coords, tol=1e-9) -> int:
    """Coset index of a fine-lattice point; raises if not on the fine lattice."""
    folded = mod_coarse(pair, coords)
    scaled = folded * pair.q / pair.eta
    digits = np.rint(scaled).astype(np.int64) % pair.q
    if not np.allclose(scaled, np.rint(scaled), atol=tol * pair.q / pair.eta):
        raise LatticeError("point is not on the fine lattice")
    # solve g*beta = digits (mod q) from any invertible generator entry
    i = int(np.flatnonzero(pair.g % pair.q)[0])
    beta = (int(digits[i]) * pow(int(pair.g[i]), -1, pair.q)) % pair.q
    if np.any((pair.g * beta) % pair.q != digits):
        raise LatticeError("point is not on the fine lattice")
    return beta


def encode(pair: NestedLatticePair, t: LatticePoint, d: Dither) -> np.ndarray:
    """Dithered channel input [t - d] mod-coarse; uniform over the region."""
    coset_index_of(pair, t.coords)  # rejects off-lattice points
    return mod_coarse(pair, t.coords - d.d)


def recover_message(pair: NestedLatticePair, t_hat: LatticePoint) -> int:
    """Strip the coarse component of a decoded fine point and return its message."""
    return coset_index_of(pair, t_hat.coords)


def second_moment_estimate(pair: NestedLatticePair, samples: int, seed=None) -> float:
    """Monte Carlo estimate of the per-dimension second moment of the region."""
    if samples < 1:
        raise LatticeError("need at least one sample")
    rng = np.random.default_rng(seed)
    half = pair.eta / 2.0
    u = rng.uniform(-half, half, size=(samples, pair.n))
    return float(np.mean(np.sum(u * u, axis=1)) / pair.n)


def dump_codebook(pair: NestedLatticePair, path) -> None:
    """Write coset representatives as CSV: beta,coord_0,...,coord_{n-1}."""
    header = "beta," + ",".join(f"coord_{i}" for i in range(pair.n))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for beta in range(pair.q):
            row = ",".join(f"{c:.6f}" for c in pair.coset_offsets[beta])
            fh.write(f"{beta},{row}\n")


# ---------------------------------------------------------------------------
# weighted closest-point decoding


def weighted_nearest_fine(pair: NestedLatticePair, y, W) -> LatticePoint:
    """argmin over the fine lattice of (y-t)' W (y-t).

    ``W`` is either a length-n vector (diagonal metric; solved exactly by
    per-coordinate rounding within each coset) or an array of shape
    (n_blocks, M, M) of positive-definite blocks with M <= 4 (solved exactly
    by per-block enumeration with radius pruning).
    """
    y = _check_dim(pair, y)
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        if W.shape != (pair.n,):
            raise LatticeError("diagonal metric has wrong length")
        if np.any(W <= 0):
            raise LatticeError("metric is not positive definite")
        return _nearest_fine_diagonal(pair, y, W)
    if W.ndim == 3:
        n_blocks, M, M2 = W.shape
        if M != M2 or n_blocks * M != pair.n:
            raise LatticeError("block metric does not tile the dimension")
        if M > 4:
            raise LatticeError(f"block size {M} unsupported (exact search limited to M <= 4)")
        return _nearest_fine_blocks(pair, y, W)
    raise LatticeError("metric must be a vector or a stack of blocks")


def _nearest_fine_diagonal(pair, y, w) -> LatticePoint:
    r = y[None, :] - pair.coset_offsets            # (q, n)
    k = np.rint(r / pair.eta)
    resid = r - pair.eta * k
    costs = resid * resid @ w
    beta = int(np.argmin(costs))
    coords = pair.coset_offsets[beta] + pair.eta * k[beta]
    return LatticePoint(coords=coords, coset_index=beta)


def _nearest_fine_blocks(pair, y, W_blocks) -> LatticePoint:
    n_blocks, M, _ = W_blocks.shape
    chol_t = []
    for Wb in W_blocks:
        try:
            L = np.linalg.cholesky(Wb)
        except np.linalg.LinAlgError as exc:
            raise LatticeError("metric block is not positive definite") from exc
        chol_t.append(L.T)                          # upper triangular factor
    best_cost = np.inf
    best = None
    for beta in range(pair.q):
        r = (y - pair.coset_offsets[beta]).reshape(n_blocks, M)
        cost = 0.0
        ks = np.empty((n_blocks, M))
        for bi in range(n_blocks):
            c, k = _cvp_cubic(r[bi], chol_t[bi], pair.eta)
            cost += c
            ks[bi] = k
            if cost >= best_cost:
                break
        if cost < best_cost:
            best_cost = cost
            best = (beta, ks.reshape(-1).copy())
    beta, k = best
    coords = pair.coset_offsets[beta] + pair.eta * k
    return LatticePoint(coords=coords, coset_index=beta)


def _cvp_cubic(r, U, eta):
    """Exact min over k in Z^M of ||U (r - eta k)||^2, U upper triangular.

    Depth-first enumeration from the last coordinate with radius pruning,
    seeded with the per-coordinate rounding solution as the initial radius.
    """
    B = eta * U
    u = U @ r
    M = len(r)
    k0 = np.rint(r / eta)
    resid0 = u - B @ k0
    best = [float(resid0 @ resid0), k0.copy()]
    k = np.zeros(M)

    def descend(i, partial):
        budget = best[0] - partial
        if budget <= 0:
            return
        center = (u[i] - B[i, i + 1:] @ k[i + 1:]) / B[i, i]
        rad = np.sqrt(budget) / abs(B[i, i])
        lo = int(np.ceil(center - rad))
        hi = int(np.floor(center + rad))
        for cand in sorted(range(lo, hi + 1), key=lambda c: abs(c - center)):
            inc = (B[i, i] * (cand - center)) ** 2
            if partial + inc >= best[0]:
                break  # nearest-first order: the rest only cost more
            k[i] = cand
            if i == 0:
                best[0] = partial + inc
                best[1] = k.copy()
            else:
                descend(i - 1, partial + inc)

    descend(M - 1, 0.0)
    return best[0], best[1]
