"""Pairwise distances, the Gaussian tail function and the SER union bound.

The union bound evaluated everywhere in this package is

    P_S(phi, F) = (1 / V) * sum_{i} sum_{j != i} Q( sqrt( rho * d2_ij / (2 * noise_var) ) )

over all V = M**n_streams candidate symbol vectors, with pairwise squared
distances d2_ij = || (H2 diag(phi) H1 + Hd) F (s_i - s_j) ||^2.

Two cached quadratic forms reproduce d2_ij exactly:

  * reflecting view:   d2_ij(phi) = phi^H C_ij phi + 2 Re(phi^T a_ij) + const_ij
  * precoding view:    d2_ij(f)   = f^H Chat_ij f,  f = vec(F^T)

Both are verified against the direct norm in the test suite; the cached
matrices are Hermitian PSD so distances are clamped at zero from below to
absorb roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, log_ndtr, logsumexp

from .errors import ConfigurationError, ContractViolationError
from .model import ChannelSet, SymbolVectorSet


@dataclass(frozen=True)
class ReflectVector:
    """Unit-modulus reflecting coefficients phi_n = exp(j*theta_n)."""

    phases: np.ndarray  # (n_ris,) complex, |phases| == 1
    angles: np.ndarray = field(default=None)  # (n_ris,) real, radians

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=complex).reshape(-1)
        object.__setattr__(self, "phases", phases)
        if self.angles is None:
            object.__setattr__(self, "angles", np.angle(phases))
        else:
            object.__setattr__(self, "angles", np.asarray(self.angles, dtype=float).reshape(-1))
        dev = np.max(np.abs(np.abs(phases) - 1.0)) if phases.size else 0.0
        if dev > 1e-9:
            raise ConfigurationError(f"reflect coefficients off the unit circle by {dev:.2e}")

    @classmethod
    def from_angles(cls, angles) -> "ReflectVector":
        angles = np.asarray(angles, dtype=float).reshape(-1)
        return cls(phases=np.exp(1j * angles), angles=angles)

    @property
    def n_ris(self) -> int:
        return self.phases.shape[0]


@dataclass(frozen=True)
class Precoder:
    """Linear precoder F (n_tx x n_streams) and its row-major flattening.

    flat = vec(F^T): entries ordered [F[0,0], F[0,1], ..., F[1,0], ...] so
    that diag(flat) composes with the column-repeated channel expansion.
    """

    matrix: np.ndarray  # (n_tx, n_streams) complex

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.ndim != 2:
            raise ContractViolationError(f"precoder matrix must be 2-D, got ndim={matrix.ndim}")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_flat(cls, flat, n_tx: int, n_streams: int) -> "Precoder":
        flat = np.asarray(flat, dtype=complex).reshape(-1)
        if flat.size != n_tx * n_streams:
            raise ContractViolationError(
                f"flat length {flat.size} != n_tx*n_streams = {n_tx * n_streams}"
            )
        return cls(matrix=flat.reshape(n_tx, n_streams))

    @property
    def flat(self) -> np.ndarray:
        return self.matrix.reshape(-1)

    @property
    def n_tx(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_streams(self) -> int:
        return self.matrix.shape[1]

    @property
    def power(self) -> float:
        """tr(F F^H) = squared Frobenius norm."""
        return float(np.sum(np.abs(self.matrix) ** 2))


def q_function(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x) = 0.5 * erfc(x / sqrt(2))."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


def effective_channel(channels: ChannelSet, phi: np.ndarray) -> np.ndarray:
    """H(phi) = H2 diag(phi) H1 + Hd, shape (n_rx, n_tx)."""
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    return (channels.h2 * phi[None, :]) @ channels.h1 + channels.hd


def expanded_channel(h_eff: np.ndarray, n_streams: int) -> np.ndarray:
    """Column-repeated channel: each column of H repeated n_streams times.

    Shape (n_rx, n_tx * n_streams); composes with diag(vec(F^T)) and the
    n_tx-fold stacked symbol vector so that Hhat diag(f) shat = H F s.
    """
    return np.repeat(h_eff, n_streams, axis=1)


def stacked_symbols(vectors: np.ndarray, n_tx: int) -> np.ndarray:
    """n_tx copies of each symbol vector stacked end to end, shape (V, n_tx*Ns)."""
    return np.tile(vectors, (1, n_tx))


def distance_direct(
    channels: ChannelSet,
    phi: np.ndarray,
    precoder: Precoder | np.ndarray,
    s_i: np.ndarray,
    s_j: np.ndarray,
) -> float:
    """|| (H2 diag(phi) H1 + Hd) F (s_i - s_j) ||^2 computed with no caching."""
    f_mat = precoder.matrix if isinstance(precoder, Precoder) else np.asarray(precoder)
    phi_arr = np.asarray(phi, dtype=complex).reshape(-1)
    s_i = np.asarray(s_i).reshape(-1)
    s_j = np.asarray(s_j).reshape(-1)
    if (
        phi_arr.size != channels.n_ris
        or f_mat.shape[0] != channels.n_tx
        or s_i.size != f_mat.shape[1]
        or s_j.size != f_mat.shape[1]
    ):
        raise ContractViolationError(
            "dimension mismatch: phi/precoder/symbols inconsistent with channel shapes"
        )
    h_eff = effective_channel(channels, phi_arr)
    v = h_eff @ (f_mat @ (s_i - s_j))
    return float(np.real(np.vdot(v, v)))


@dataclass(frozen=True)
class ReflectPairCache:
    """Per-pair quadratic form of d2 in phi, for a fixed precoder.

    c_mats[p] is Hermitian PSD; lin[p] enters through 2*Re(phi^T lin[p]);
    const[p] = ||Hd F ds_p||^2.
    """

    c_mats: np.ndarray  # (P, N, N) complex
    lin: np.ndarray  # (P, N) complex
    const: np.ndarray  # (P,) float
    n_vectors: int

    @property
    def n_pairs(self) -> int:
        return self.c_mats.shape[0]

    @property
    def n_ris(self) -> int:
        return self.c_mats.shape[1]

    def distances(self, phi: np.ndarray) -> np.ndarray:
        """d2 for all pairs at one phi, shape (P,)."""
        phi = np.asarray(phi, dtype=complex).reshape(-1)
        quad = np.real(np.einsum("n,pnk,k->p", phi.conj(), self.c_mats, phi, optimize=True))
        cross = 2.0 * np.real(self.lin @ phi)
        return np.maximum(quad + cross + self.const, 0.0)

    def distances_batch(self, phis: np.ndarray) -> np.ndarray:
        """d2 for a batch of candidate phis, shape (B, P)."""
        phis = np.asarray(phis, dtype=complex)
        quad = np.real(
            np.einsum("bn,pnk,bk->bp", phis.conj(), self.c_mats, phis, optimize=True)
        )
        cross = 2.0 * np.real(phis @ self.lin.T)
        return np.maximum(quad + cross + self.const[None, :], 0.0)


def build_reflect_cache(
    channels: ChannelSet,
    precoder: Precoder | np.ndarray,
    symbol_set: SymbolVectorSet,
) -> ReflectPairCache:
    """Assemble C_ij, a_ij and the direct-path constant for every ordered pair.

    With x = F(s_i - s_j), q = H1 x and R = H2^H H2:
      C_ij  = R * (q q^H)^T      (elementwise)
      a_ij  = (x^H (Hd^H H2)) * q   (elementwise over surface elements)
      const = ||Hd x||^2
    """
    f_mat = precoder.matrix if isinstance(precoder, Precoder) else np.asarray(precoder)
    diffs = symbol_set.differences()  # (P, Ns)
    x = diffs @ f_mat.T  # (P, Nt)
    q = x @ channels.h1.T  # (P, N): q[p] = H1 x_p
    r_h2 = channels.h2.conj().T @ channels.h2  # (N, N)
    # C_p = R * (q_p q_p^H)^T = R * (conj(q_p) q_p^T)
    c_mats = r_h2[None, :, :] * (q.conj()[:, :, None] * q[:, None, :])
    g = channels.hd.conj().T @ channels.h2  # (Nt, N)
    u = x.conj() @ g  # (P, N): u[p,k] = x_p^H g_k
    lin = u * q
    hd_x = x @ channels.hd.T  # (P, Nr)
    const = np.sum(np.abs(hd_x) ** 2, axis=1)
    return ReflectPairCache(
        c_mats=c_mats, lin=lin, const=const, n_vectors=symbol_set.n_vectors
    )


@dataclass(frozen=True)
class PrecodePairCache:
    """Per-pair quadratic form of d2 in f = vec(F^T), for a fixed phi."""

    chat_mats: np.ndarray  # (P, K, K) complex, Hermitian PSD, K = n_tx*n_streams
    n_vectors: int
    n_tx: int
    n_streams: int

    @property
    def n_pairs(self) -> int:
        return self.chat_mats.shape[0]

    @property
    def dim(self) -> int:
        return self.chat_mats.shape[1]

    def distances(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f, dtype=complex).reshape(-1)
        d2 = np.real(np.einsum("k,pkl,l->p", f.conj(), self.chat_mats, f, optimize=True))
        return np.maximum(d2, 0.0)

    def distances_batch(self, fs: np.ndarray) -> np.ndarray:
        fs = np.asarray(fs, dtype=complex)
        d2 = np.real(np.einsum("bk,pkl,bl->bp", fs.conj(), self.chat_mats, fs, optimize=True))
        return np.maximum(d2, 0.0)


def build_precode_cache(
    channels: ChannelSet,
    phi: np.ndarray,
    symbol_set: SymbolVectorSet,
) -> PrecodePairCache:
    """Assemble Chat_ij = (Hhat^H Hhat) * (ds ds^H)^T for every ordered pair.

    The transpose on the difference outer product is what makes
    f^H Chat f reproduce the direct distance (verified in tests).
    """
    n_tx = channels.n_tx
    n_streams = symbol_set.n_streams
    h_eff = effective_channel(channels, phi)
    h_hat = expanded_channel(h_eff, n_streams)
    r_hat = h_hat.conj().T @ h_hat  # (K, K)
    diffs_hat = stacked_symbols(symbol_set.vectors, n_tx)  # (V, K)
    i = symbol_set.pair_index[:, 0]
    j = symbol_set.pair_index[:, 1]
    ds = diffs_hat[i] - diffs_hat[j]  # (P, K)
    chat = r_hat[None, :, :] * (ds.conj()[:, :, None] * ds[:, None, :])
    return PrecodePairCache(
        chat_mats=chat,
        n_vectors=symbol_set.n_vectors,
        n_tx=n_tx,
        n_streams=n_streams,
    )


def ser_union_bound(distances, rho: float, noise_var: float, n_vectors: int) -> float:
    """Union bound on vector SER from pairwise squared distances.

    distances holds d2 for all ordered pairs (i, j), i != j.  The bound may
    exceed 1 at low SNR; it is reported unclipped.
    """
    d2 = np.asarray(distances, dtype=float)
    args = np.sqrt(rho * d2 / (2.0 * noise_var))
    return float(np.sum(q_function(args)) / n_vectors)


def ser_union_bound_batch(d2_batch: np.ndarray, rho: float, noise_var: float, n_vectors: int) -> np.ndarray:
    """Union bound for a batch of distance rows, shape (B, P) -> (B,)."""
    args = np.sqrt(rho * np.asarray(d2_batch, dtype=float) / (2.0 * noise_var))
    return np.sum(q_function(args), axis=-1) / n_vectors


def ser_union_bound_log(distances, rho: float, noise_var: float, n_vectors: int) -> float:
    """Natural log of the union bound, stable far below float underflow.

    Large surfaces at moderate SNR push the bound below 1e-308, where
    ser_union_bound saturates at 0.0 and configurations can no longer be
    ranked.  Computing log Q through the log-CDF and combining pairs with
    logsumexp keeps the value exact (as a log) at any depth.  Agrees with
    log(ser_union_bound(...)) wherever the linear value is representable.
    """
    d2 = np.asarray(distances, dtype=float)
    args = np.sqrt(rho * d2 / (2.0 * noise_var))
    return float(logsumexp(log_ndtr(-args)) - np.log(n_vectors))


def union_bound_ps(
    channels: ChannelSet,
    phi: np.ndarray | ReflectVector,
    precoder: Precoder | np.ndarray,
    symbol_set: SymbolVectorSet,
    rho: float,
    noise_var: float,
) -> float:
    """Union bound straight from the channel triple, no caching."""
    if isinstance(phi, ReflectVector):
        phi = phi.phases
    f_mat = precoder.matrix if isinstance(precoder, Precoder) else np.asarray(precoder)
    h_eff = effective_channel(channels, phi)
    hf = h_eff @ f_mat  # (Nr, Ns)
    diffs = symbol_set.differences()  # (P, Ns)
    v = diffs @ hf.T  # (P, Nr)
    d2 = np.sum(np.abs(v) ** 2, axis=1)
    return ser_union_bound(d2, rho, noise_var, symbol_set.n_vectors)


# Derivative of Q(sqrt(rho*v/(2*noise_var))) with respect to v is
# -0.5 * pair_weights(v).  The weight reappears as-is in the precoder
# stationarity matrix, which is why it is shared here.
def pair_weights(d2, rho: float, noise_var: float, floor: float = 1e-30) -> np.ndarray:
    """w_p = sqrt(rho / (4*pi*noise_var*d2_p)) * exp(-rho*d2_p/(4*noise_var)).

    d2 is floored to keep the 1/sqrt(d2) factor finite when a pair is
    degenerate; such pairs carry a huge weight, which matches the true
    behaviour of the bound's slope near d2 = 0.
    """
    d2 = np.maximum(np.asarray(d2, dtype=float), floor)
    return np.sqrt(rho / (4.0 * np.pi * noise_var * d2)) * np.exp(
        -rho * d2 / (4.0 * noise_var)
    )
