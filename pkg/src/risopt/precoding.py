"""Precoder optimizers under the total-power constraint tr(F F^H) <= p_max.

  * mser_precoding: projected gradient on the power sphere driven by the
    stationarity weight matrix Omega(f); minimizes the union bound directly.
  * mmed_precoding: maximizes the minimum pairwise distance f^H Chat f via
    projected gradient on a softmin-smoothed objective with geometric
    mu-continuation; the high-SNR surrogate design.
  * eigen_precoding: power-scaled dominant eigenvectors of H^H H.
  * zf_precoding: power-scaled right pseudo-inverse restricted to the first
    n_streams columns.
  * random_precoding: scaled complex-Gaussian baseline.

The sphere schemes never leave tr(f f^H) = p_max: updates move along great
circles, so the constraint holds by the cos^2 + sin^2 identity.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._search import sphere_line_search
from .errors import ConfigurationError, ContractViolationError, IllConditionedChannelError
from .metrics import (
    ChannelSet,
    PrecodePairCache,
    Precoder,
    effective_channel,
    pair_weights,
    ser_union_bound,
    ser_union_bound_batch,
)

EPS4_DEFAULT = 1e-6  # projected-direction ratio tolerance
MSER_MAX_ITERS_DEFAULT = 200
MMED_MAX_ITERS_DEFAULT = 100
MMED_STAGES = 6
BETA_GRID = 64
BETA_REFINE_ITERS = 20
COND_LIMIT = 1e12


@dataclass
class PrecodeOptReport:
    """Convergence record of one precoding-stage run.

    objective_trace holds P_S for mser_precoding and the minimum pairwise
    squared distance for mmed_precoding.
    """

    precoder_out: Precoder
    objective_trace: list
    iterations: int
    wall_time: float
    converged: bool = True


def _flat_of(f0, cache: PrecodePairCache) -> np.ndarray:
    if isinstance(f0, Precoder):
        return f0.flat.copy()
    f = np.asarray(f0, dtype=complex)
    if f.ndim == 2:
        return f.reshape(-1).copy()
    if f.size != cache.dim:
        raise ContractViolationError(f"f0 length {f.size} != n_tx*n_streams = {cache.dim}")
    return f.reshape(-1).copy()


def _require_on_sphere(f: np.ndarray, p_max_power: float):
    power = float(np.real(np.vdot(f, f)))
    if abs(power - p_max_power) > 1e-9 * max(1.0, p_max_power):
        raise ContractViolationError(
            f"f0 must satisfy trace(f f^H) = p_max ({p_max_power}), got {power}"
        )


def omega_matrix(
    cache: PrecodePairCache, f: np.ndarray, rho: float, noise_var: float
) -> np.ndarray:
    """Stationarity weight matrix: sum_p w_p * Chat_p with the shared pair weight."""
    f = np.asarray(f, dtype=complex).reshape(-1)
    d2 = cache.distances(f)
    w = pair_weights(d2, rho, noise_var)
    return np.einsum("p,pkl->kl", w, cache.chat_mats, optimize=True)


def mser_search_direction(
    cache: PrecodePairCache, f: np.ndarray, rho: float, noise_var: float
) -> np.ndarray:
    """Omega(f) f / V: the negative union-bound gradient in f.

    Convention g_k = dP/dRe(f_k) + j*dP/dIm(f_k); this function returns -g,
    which matches central finite differences of the bound (tested).
    """
    f = np.asarray(f, dtype=complex).reshape(-1)
    d2 = cache.distances(f)
    w = pair_weights(d2, rho, noise_var)
    cf = np.einsum("pkl,l->pk", cache.chat_mats, f, optimize=True)
    return np.einsum("p,pk->k", w, cf) / cache.n_vectors


def mser_precoding(
    cache: PrecodePairCache,
    f0,
    rho: float,
    noise_var: float,
    p_max_power: float,
    eps4: float = EPS4_DEFAULT,
    max_iters: int = MSER_MAX_ITERS_DEFAULT,
) -> PrecodeOptReport:
    """Minimum-SER precoding: projected gradient on the power sphere.

    Each iteration projects r = Omega(f) f / V onto the tangent space of the
    sphere, then line-searches P_S along the great circle (beta = 0 is a
    candidate, so the trace is non-increasing).  Stops when the projected
    component falls to eps4 of the direction norm.
    """
    t_start = time.perf_counter()
    f = _flat_of(f0, cache)
    _require_on_sphere(f, p_max_power)
    v = cache.n_vectors
    radius = np.sqrt(p_max_power)

    def ps_batch(cands):
        return ser_union_bound_batch(cache.distances_batch(cands), rho, noise_var, v)

    ps_cur = ser_union_bound(cache.distances(f), rho, noise_var, v)
    trace = [ps_cur]
    converged = False
    iters = 0
    for _ in range(max_iters):
        r = mser_search_direction(cache, f, rho, noise_var)
        norm_r = np.linalg.norm(r)
        if norm_r == 0.0:
            converged = True  # exactly stationary
            break
        r_perp = r - f * (np.vdot(f, r) / float(np.real(np.vdot(f, f))))
        if np.linalg.norm(r_perp) / norm_r <= eps4:
            converged = True
            break
        f_new, ps_new, _ = sphere_line_search(
            ps_batch, f, r_perp, radius, BETA_GRID, BETA_REFINE_ITERS
        )
        iters += 1
        improvement = ps_cur - ps_new
        f = f_new * (radius / np.linalg.norm(f_new))
        ps_cur = ser_union_bound(cache.distances(f), rho, noise_var, v)
        trace.append(ps_cur)
        if improvement <= 0.0:
            converged = True  # no progress along the projected arc
            break
    return PrecodeOptReport(
        precoder_out=Precoder.from_flat(f, cache.n_tx, cache.n_streams),
        objective_trace=trace,
        iterations=iters,
        wall_time=time.perf_counter() - t_start,
        converged=converged,
    )


def mmed_precoding(
    cache: PrecodePairCache,
    f0,
    p_max_power: float,
    smoothing_mu: float = 1.0,
    max_iters: int = MMED_MAX_ITERS_DEFAULT,
) -> PrecodeOptReport:
    """Maximize the minimum pairwise squared distance on the power sphere.

    Ascends the softmin surrogate -mu*log(sum_p exp(-d2_p/mu)) with mu halved
    over six stages; the line search scores candidates by the true minimum
    distance, so the reported trace is non-decreasing.  mu is normalized by
    the mean initial distance, which makes the iteration path equivariant
    under power rescaling (doubling p_max scales the output by sqrt(2)).
    """
    t_start = time.perf_counter()
    f = _flat_of(f0, cache)
    _require_on_sphere(f, p_max_power)
    radius = np.sqrt(p_max_power)

    def min_d2(ff):
        return float(np.min(cache.distances(ff)))

    def neg_min_batch(cands):
        return -np.min(cache.distances_batch(cands), axis=1)

    def softmin_ascent_dir(ff, mu):
        d2 = cache.distances(ff)
        z = np.exp(-(d2 - np.min(d2)) / mu)
        w = z / np.sum(z)
        g = np.einsum("p,pkl,l->k", w, cache.chat_mats, ff, optimize=True)
        return g - ff * (np.vdot(ff, g) / float(np.real(np.vdot(ff, ff))))

    # Degenerate start: every pair distance zero and no usable gradient.
    scale = float(np.mean(cache.distances(f)))
    converged = True
    if scale <= 0.0:
        rng = np.random.default_rng(0)
        w = rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size)
        w_perp = w - f * (np.vdot(f, w) / float(np.real(np.vdot(f, f))))
        if np.linalg.norm(w_perp) > 0:
            step = 1e-6
            f = np.cos(step) * f + np.sin(step) * radius * w_perp / np.linalg.norm(w_perp)
            f *= radius / np.linalg.norm(f)
            scale = float(np.mean(cache.distances(f)))
        if scale <= 0.0:
            return PrecodeOptReport(
                precoder_out=Precoder.from_flat(f, cache.n_tx, cache.n_streams),
                objective_trace=[0.0],
                iterations=0,
                wall_time=time.perf_counter() - t_start,
                converged=False,
            )

    trace = [min_d2(f)]
    iters = 0
    for stage in range(MMED_STAGES):
        mu = smoothing_mu * scale * 0.5**stage
        for _ in range(max_iters):
            g_perp = softmin_ascent_dir(f, mu)
            if np.linalg.norm(g_perp) <= 1e-14 * radius:
                break
            f_new, neg_best, _ = sphere_line_search(
                neg_min_batch, f, g_perp, radius, BETA_GRID, BETA_REFINE_ITERS
            )
            iters += 1
            improvement = -neg_best - trace[-1]
            if improvement <= 0.0:
                break
            f = f_new * (radius / np.linalg.norm(f_new))
            trace.append(max(min_d2(f), trace[-1]))
    f *= radius / np.linalg.norm(f)
    return PrecodeOptReport(
        precoder_out=Precoder.from_flat(f, cache.n_tx, cache.n_streams),
        objective_trace=trace,
        iterations=iters,
        wall_time=time.perf_counter() - t_start,
        converged=converged,
    )


def eigen_precoding(
    channels: ChannelSet, phi, n_streams: int, p_max_power: float
) -> Precoder:
    """Power-scaled dominant eigenvectors of H^H H, H = H2 diag(phi) H1 + Hd.

    Columns sorted by decreasing eigenvalue; each eigenvector's phase is
    fixed so its largest-magnitude entry is real positive, making the output
    deterministic up to degenerate eigenspaces.
    """
    phi_arr = phi.phases if hasattr(phi, "phases") else np.asarray(phi, dtype=complex)
    h_eff = effective_channel(channels, phi_arr)
    gram = h_eff.conj().T @ h_eff
    eigvals, eigvecs = np.linalg.eigh(gram)
    eigvals = eigvals[::-1]
    eigvecs = eigvecs[:, ::-1]
    lam_max = max(float(eigvals[0]), 0.0)
    rank = int(np.sum(eigvals > 1e-12 * max(lam_max, 1e-300)))
    if rank < n_streams:
        raise IllConditionedChannelError(
            f"effective channel rank {rank} is below n_streams={n_streams}"
        )
    w = eigvecs[:, :n_streams].copy()
    for k in range(n_streams):
        idx = int(np.argmax(np.abs(w[:, k])))
        pivot = w[idx, k]
        w[:, k] *= np.conj(pivot) / abs(pivot)
    return Precoder(matrix=np.sqrt(p_max_power / n_streams) * w)


def zf_precoding(
    channels: ChannelSet, phi, n_streams: int, p_max_power: float
) -> Precoder:
    """Zero-forcing: right pseudo-inverse columns, power-rescaled.

    F = H^H (H H^H)^(-1) restricted to the first n_streams columns; H F is
    then a scaled identity slice, so inter-stream interference is nulled.
    """
    phi_arr = phi.phases if hasattr(phi, "phases") else np.asarray(phi, dtype=complex)
    h_eff = effective_channel(channels, phi_arr)
    n_rx, n_tx = h_eff.shape
    if not (n_streams <= n_rx <= n_tx):
        raise ContractViolationError(
            f"zero-forcing needs n_streams <= n_rx <= n_tx, got ({n_streams}, {n_rx}, {n_tx})"
        )
    gram = h_eff @ h_eff.conj().T
    cond = float(np.linalg.cond(gram))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedChannelError(
            f"H H^H condition number {cond:.3e} exceeds {COND_LIMIT:.0e}"
        )
    f_full = np.linalg.solve(gram, h_eff).conj().T  # H^H (H H^H)^{-1}
    f_mat = f_full[:, :n_streams]
    f_mat = f_mat * np.sqrt(p_max_power / np.sum(np.abs(f_mat) ** 2))
    return Precoder(matrix=f_mat)


def random_precoding(n_tx: int, n_streams: int, p_max_power: float, seed: int) -> Precoder:
    """Complex-Gaussian precoder rescaled to trace(F F^H) = p_max exactly."""
    if n_tx < 1 or n_streams < 1:
        raise ConfigurationError("n_tx and n_streams must be >= 1")
    rng = np.random.default_rng(seed)
    f_mat = rng.standard_normal((n_tx, n_streams)) + 1j * rng.standard_normal(
        (n_tx, n_streams)
    )
    f_mat *= np.sqrt(p_max_power / np.sum(np.abs(f_mat) ** 2))
    return Precoder(matrix=f_mat)
