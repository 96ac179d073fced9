"""Reflecting-vector optimizers.

Four designs for the unit-modulus coefficients phi:

  * emser_reflecting: coordinate descent over the angles theta_n with an
    Armijo backtracking step; feasible at every iterate since it only ever
    moves angles.
  * vmser_reflecting: projected gradient over the sphere tr(phi phi^H) = N
    with an l_p-norm logarithmic barrier steering iterates toward equal
    modulus, followed by element-wise normalization.
  * sumdist_reflecting: maximizes the summed pairwise distance surrogate
    (the objective the SDP-style baseline relaxes) by closed-form per-element
    coordinate ascent.
  * random_reflecting: uniform random phases, the no-design baseline.

All objective evaluations go through a ReflectPairCache, so a run touches
the channel matrices only at cache-build time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._search import sphere_line_search
from .errors import ConfigurationError, ContractViolationError
from .metrics import (
    ReflectPairCache,
    ReflectVector,
    pair_weights,
    ser_union_bound,
    ser_union_bound_batch,
)

# Armijo backtracking defaults (shared with nothing else; coordinate steps only).
ARMIJO_INIT = 1.0
ARMIJO_SHRINK = 0.5
ARMIJO_DECREASE = 1e-4
ARMIJO_MAX_BACKTRACKS = 30

# Per-coordinate inner iteration cap; guards against a stalled coordinate,
# cannot break monotonicity because only decreasing steps are accepted.
COORD_ITER_CAP = 50

EPS0_DEFAULT = 1e-6  # per-coordinate gradient tolerance
EPS1_DEFAULT = 1e-8  # per-sweep objective improvement tolerance
MAX_SWEEPS_DEFAULT = 200

SUMDIST_TOL = 1e-10


@dataclass
class ReflectOptReport:
    """Convergence record of one reflecting-stage run."""

    phi_out: ReflectVector
    objective_trace: list
    iterations: int
    wall_time: float
    converged: bool = True
    final_ps: float | None = None


@dataclass(frozen=True)
class VmserParams:
    """Continuation, barrier and search knobs for vmser_reflecting."""

    p_init: float = 2.0
    p_step: float = 2.0
    p_max: float = 20.0
    barrier_t: float = 1e3
    eps2: float = 1e-8  # objective-change tolerance (normalized vs on-sphere)
    eps3: float = 1e-6  # projected-gradient ratio tolerance
    theta_grid: int = 64
    refine_iters: int = 20
    max_inner: int = 100  # per p-stage iteration cap

    def __post_init__(self):
        if not (2.0 <= self.p_init < self.p_max):
            raise ConfigurationError("require 2 <= p_init < p_max")
        if self.p_step <= 0 or self.barrier_t <= 0:
            raise ConfigurationError("p_step and barrier_t must be positive")
        if self.eps2 <= 0 or self.eps3 <= 0:
            raise ConfigurationError("eps2 and eps3 must be positive")


def _phases_of(phi0) -> np.ndarray:
    if isinstance(phi0, ReflectVector):
        return phi0.phases.copy()
    return np.asarray(phi0, dtype=complex).reshape(-1).copy()


def _ps(cache: ReflectPairCache, phi: np.ndarray, rho: float, noise_var: float) -> float:
    return ser_union_bound(cache.distances(phi), rho, noise_var, cache.n_vectors)


def ps_phi_gradient(
    cache: ReflectPairCache, phi: np.ndarray, rho: float, noise_var: float
) -> np.ndarray:
    """Gradient of the union bound with respect to phi on C^N.

    Convention: g_n = dP/dRe(phi_n) + j*dP/dIm(phi_n).  Closed form
    -(1/V) * sum_p w_p * (C_p phi + conj(a_p)) with the shared pair weight
    w_p; matches central finite differences (tested).
    """
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    d2 = cache.distances(phi)
    w = pair_weights(d2, rho, noise_var)
    c_phi = np.einsum("pnk,k->pn", cache.c_mats, phi, optimize=True)
    return -np.einsum("p,pn->n", w, c_phi + cache.lin.conj()) / cache.n_vectors


def ps_theta_gradient(
    cache: ReflectPairCache, phi: np.ndarray, rho: float, noise_var: float
) -> np.ndarray:
    """dP_S/dtheta_n for all coordinates at phi = exp(j*theta)."""
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    g = ps_phi_gradient(cache, phi, rho, noise_var)
    # chain rule through phi_n = exp(j theta_n): dP/dtheta_n = Re(conj(g_n) * j phi_n)
    return np.real(g.conj() * (1j * phi))


def emser_reflecting(
    cache: ReflectPairCache,
    phi0,
    rho: float,
    noise_var: float,
    eps0: float = EPS0_DEFAULT,
    eps1: float = EPS1_DEFAULT,
    max_sweeps: int = MAX_SWEEPS_DEFAULT,
) -> ReflectOptReport:
    """Element-wise minimum-SER reflecting design (coordinate descent).

    Sweeps the angles theta_1..theta_N; each coordinate takes Armijo
    backtracking steps along its negative gradient direction until the
    coordinate gradient falls below eps0 relative to the current P_S.
    Sweeping stops when a full sweep improves P_S by less than eps1
    relative.  Iterates are unit-modulus by construction.
    """
    t_start = time.perf_counter()
    phi = _phases_of(phi0)
    dev = np.max(np.abs(np.abs(phi) - 1.0))
    if dev > 1e-9:
        raise ContractViolationError(f"phi0 must be unit-modulus, off by {dev:.2e}")
    theta = np.angle(phi)
    phi = np.exp(1j * theta)
    n = phi.size
    v = cache.n_vectors

    d2 = cache.distances(phi)
    trace = [ser_union_bound(d2, rho, noise_var, v)]
    converged = False
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        for idx in range(n):
            # d2_p(theta_n) = beta_p + 2Re(conj(phi_n) b_p) + 2Re(phi_n a_pn)
            b = cache.c_mats[:, idx, :] @ phi - cache.c_mats[:, idx, idx] * phi[idx]
            a_n = cache.lin[:, idx]
            beta = (
                d2
                - 2.0 * np.real(np.conj(phi[idx]) * b)
                - 2.0 * np.real(phi[idx] * a_n)
            )

            def d2_of(ph):
                return np.maximum(
                    beta + 2.0 * np.real(np.conj(ph) * b) + 2.0 * np.real(ph * a_n), 0.0
                )

            for _ in range(COORD_ITER_CAP):
                ps_cur = ser_union_bound(d2, rho, noise_var, v)
                w = pair_weights(d2, rho, noise_var)
                dd = 2.0 * np.imag(np.conj(phi[idx]) * b) - 2.0 * np.imag(phi[idx] * a_n)
                grad = -np.sum(w * dd) / (2.0 * v)
                if abs(grad) < eps0 * max(ps_cur, 1e-300):
                    break
                # backtrack along the normalized descent direction; the raw
                # gradient scales with P_S itself and at small P_S a step
                # proportional to it moves less than one float ulp, so the
                # trial step is an angle (radians), not a gradient multiple
                direction = -1.0 if grad > 0 else 1.0
                step = ARMIJO_INIT
                accepted = False
                for _ in range(ARMIJO_MAX_BACKTRACKS):
                    cand = np.exp(1j * (theta[idx] + step * direction))
                    d2_new = d2_of(cand)
                    ps_new = ser_union_bound(d2_new, rho, noise_var, v)
                    if (
                        ps_new <= ps_cur - ARMIJO_DECREASE * step * abs(grad)
                        and ps_new < ps_cur
                    ):
                        theta[idx] = theta[idx] + step * direction
                        phi[idx] = cand
                        d2 = d2_new
                        accepted = True
                        break
                    step *= ARMIJO_SHRINK
                if not accepted:
                    break  # no representable descent along this coordinate
        d2 = cache.distances(phi)  # refresh against incremental drift
        trace.append(ser_union_bound(d2, rho, noise_var, v))
        # relative improvement test: P_S spans many decades across instances,
        # so an absolute threshold would stop deep-SNR runs immediately
        if trace[-2] - trace[-1] < eps1 * max(trace[-2], 1e-300):
            converged = True
            break
    return ReflectOptReport(
        phi_out=ReflectVector.from_angles(theta),
        objective_trace=trace,
        iterations=sweeps,
        wall_time=time.perf_counter() - t_start,
        converged=converged,
        final_ps=trace[-1],
    )


def _barrier_gradient(phi: np.ndarray, p: float, barrier_t: float) -> np.ndarray:
    """Gradient of -(1/t) ln(1 - ||phi||_p / sqrt(N)), ps_phi_gradient convention.

    The raw barrier argument 1 - ||phi||_p is negative on the whole sphere
    tr(phi phi^H) = N (the l_p norm of any sphere point is at least 1), so
    the norm is measured relative to the l_2 radius sqrt(N).  For p > 2 that
    keeps equal-modulus points strictly inside the barrier and blows up only
    toward sparse iterates, which is the regularizing role the l_p
    continuation plays.  The argument is still clamped at 1e-12 as a guard.
    """
    mags = np.abs(phi)
    norm_p = np.sum(mags**p) ** (1.0 / p)
    root_n = np.sqrt(phi.size)
    u = max(1.0 - norm_p / root_n, 1e-12)
    p_phi = phi * np.where(mags > 0, mags ** (p - 2.0), 0.0)
    return norm_p ** (1.0 - p) * p_phi / (root_n * barrier_t * u)


def _normalized(phi: np.ndarray) -> np.ndarray:
    mags = np.abs(phi)
    safe = np.where(mags > 1e-300, mags, 1.0)
    return np.where(mags > 1e-300, phi / safe, 1.0 + 0j)


def vmser_reflecting(
    cache: ReflectPairCache,
    phi0,
    rho: float,
    noise_var: float,
    params: VmserParams | None = None,
) -> ReflectOptReport:
    """Vectorized minimum-SER reflecting design (projected gradient).

    Relaxes unit modulus to the sphere tr(phi phi^H) = N, descends the union
    bound plus an l_p barrier along tangent directions, line-searching the
    true P_S over the great circle, and continues p upward (p += p_step up
    to p_max).  Output is the best element-wise-normalized iterate seen, so
    P_S never regresses against a unit-modulus warm start.
    """
    if params is None:
        params = VmserParams()
    t_start = time.perf_counter()
    phi = _phases_of(phi0)
    n = phi.size
    sphere_dev = abs(float(np.sum(np.abs(phi) ** 2)) - n)
    if sphere_dev > 1e-6 * n:
        raise ContractViolationError(
            f"phi0 must satisfy trace(phi phi^H) = N, off by {sphere_dev:.2e}"
        )
    v = cache.n_vectors
    sqrt_n = np.sqrt(float(n))

    def ps_batch(cands):
        return ser_union_bound_batch(cache.distances_batch(cands), rho, noise_var, v)

    ps_cur = _ps(cache, phi, rho, noise_var)
    trace = [ps_cur]
    best_hat = _normalized(phi)
    best_hat_ps = _ps(cache, best_hat, rho, noise_var)
    total_inner = 0
    converged = True

    p = params.p_init
    while True:
        stage_hit_cap = True
        for _ in range(params.max_inner):
            g = ps_phi_gradient(cache, phi, rho, noise_var) + _barrier_gradient(
                phi, p, params.barrier_t
            )
            w = -g
            w_perp = w - phi * (np.vdot(phi, w) / float(np.real(np.vdot(phi, phi))))
            norm_w = np.linalg.norm(w)
            norm_perp = np.linalg.norm(w_perp)
            if norm_perp == 0.0 or norm_w == 0.0:
                stage_hit_cap = False
                break
            phi_new, ps_new, _ = sphere_line_search(
                ps_batch, phi, w_perp, sqrt_n, params.theta_grid, params.refine_iters
            )
            total_inner += 1
            improvement = ps_cur - ps_new
            phi, ps_cur = phi_new, ps_new
            trace.append(ps_cur)

            phi_hat = _normalized(phi)
            ps_hat = _ps(cache, phi_hat, rho, noise_var)
            if ps_hat < best_hat_ps:
                best_hat, best_hat_ps = phi_hat, ps_hat

            if norm_perp / norm_w <= params.eps3 and abs(ps_hat - ps_cur) < params.eps2:
                stage_hit_cap = False
                break
            if improvement <= 0.0:
                stage_hit_cap = False  # line search found no progress along this arc
                break
        if p >= params.p_max:
            converged = not stage_hit_cap
            break
        p = min(p + params.p_step, params.p_max)

    return ReflectOptReport(
        phi_out=ReflectVector(phases=best_hat),
        objective_trace=trace,
        iterations=total_inner,
        wall_time=time.perf_counter() - t_start,
        converged=converged,
        final_ps=best_hat_ps,
    )


def sumdist_reflecting(
    cache: ReflectPairCache,
    phi0,
    max_sweeps: int = MAX_SWEEPS_DEFAULT,
    rho: float | None = None,
    noise_var: float | None = None,
) -> ReflectOptReport:
    """Sum-distance baseline: maximize sum_p d2_p(phi) by coordinate ascent.

    The objective phi^H Gamma phi + 2 Re(phi^H gamma) with Gamma = sum_p C_p
    and gamma = sum_p conj(a_p) is, per element, const + 2 Re(conj(phi_n) c_n),
    so each update phi_n <- c_n/|c_n| is exact.  objective_trace holds the
    surrogate (non-decreasing); final_ps records the true P_S of the output
    when rho and noise_var are supplied.
    """
    t_start = time.perf_counter()
    phi = _phases_of(phi0)
    dev = np.max(np.abs(np.abs(phi) - 1.0))
    if dev > 1e-9:
        raise ContractViolationError(f"phi0 must be unit-modulus, off by {dev:.2e}")
    gamma_mat = np.sum(cache.c_mats, axis=0)
    gamma_vec = np.sum(cache.lin.conj(), axis=0)
    n = phi.size

    def surrogate(ph):
        return float(
            np.real(np.vdot(ph, gamma_mat @ ph)) + 2.0 * np.real(np.vdot(ph, gamma_vec))
        )

    trace = [surrogate(phi)]
    converged = False
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        for idx in range(n):
            c_n = gamma_mat[idx, :] @ phi - gamma_mat[idx, idx] * phi[idx] + gamma_vec[idx]
            mag = abs(c_n)
            if mag > 0:
                phi[idx] = c_n / mag
        trace.append(surrogate(phi))
        if trace[-1] - trace[-2] < SUMDIST_TOL:
            converged = True
            break
    final_ps = None
    if rho is not None and noise_var is not None:
        final_ps = _ps(cache, phi, rho, noise_var)
    return ReflectOptReport(
        phi_out=ReflectVector(phases=phi),
        objective_trace=trace,
        iterations=sweeps,
        wall_time=time.perf_counter() - t_start,
        converged=converged,
        final_ps=final_ps,
    )


def random_reflecting(n: int, seed: int) -> ReflectVector:
    """I.i.d. uniform phases on [0, 2*pi); the no-design baseline."""
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return ReflectVector.from_angles(rng.uniform(0.0, 2.0 * np.pi, size=n))


def quantize_phases(phi, bits: int) -> ReflectVector:
    """Snap each coefficient to the nearest of 2**bits uniform phase levels.

    Exact ties (half a grid step) resolve toward the smaller level index m,
    including across the 2*pi wrap.
    """
    if bits < 1:
        raise ConfigurationError(f"bits must be >= 1, got {bits}")
    if bits > 24:
        raise ConfigurationError(f"bits = {bits} exceeds the supported resolution (24)")
    phases = _phases_of(phi)
    levels = 1 << bits
    step = 2.0 * np.pi / levels
    x = np.mod(np.angle(phases), 2.0 * np.pi) / step
    lo = np.floor(x)
    frac = x - lo
    m_lo = lo.astype(np.int64) % levels
    m_hi = (lo.astype(np.int64) + 1) % levels
    m = np.where(frac < 0.5, m_lo, np.where(frac > 0.5, m_hi, np.minimum(m_lo, m_hi)))
    return ReflectVector.from_angles(m * step)
