"""Exhaustive grid search over phases and precoder entries for tiny systems.

Phase grids use uniform angles 2*pi*m/phase_points per element, so doubling
phase_points nests the old grid inside the new one.  Precoder grids sample
each real dimension of f uniformly on [-sqrt(Pmax), +sqrt(Pmax)] and rescale
every nonzero candidate onto the power sphere before evaluation.  Ties are
broken by the lowest flat grid index, phi-major then f-minor, so results are
deterministic and independent of chunking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigurationError
from .metrics import (
    PrecodePairCache,
    Precoder,
    ReflectPairCache,
    ReflectVector,
    q_function,
    ser_union_bound_batch,
)
from .model import ChannelSet, SystemConfig, SymbolVectorSet

MAX_TOTAL_DEFAULT = int(1e8)
# rough element budget for the largest temporary array in a chunk
_CHUNK_BUDGET = 30_000_000


@dataclass(frozen=True)
class GridSpec:
    phase_points: int = 8
    precoder_points: int = 5
    max_total: int = MAX_TOTAL_DEFAULT

    def __post_init__(self):
        # phase_points=1 is allowed: it pins every phase to angle 0, which
        # reduces a joint search to a precoder-only search.
        if self.phase_points < 1:
            raise ConfigurationError("phase_points must be >= 1")
        if self.precoder_points < 1:
            raise ConfigurationError("precoder_points must be >= 1")
        if self.max_total < 1:
            raise ConfigurationError("max_total must be >= 1")


def _check_capacity(total: float, grid: GridSpec, detail: str) -> None:
    if total > grid.max_total:
        raise CapacityError(
            f"grid needs {total:.3e} evaluations ({detail}); cap is "
            f"{grid.max_total:.3e}"
        )


def _digit_chunk(flat_idx: np.ndarray, base: int, width: int) -> np.ndarray:
    """Mixed-radix digits of flat indices, first column most significant."""
    digits = np.empty((flat_idx.size, width), dtype=np.int64)
    rem = flat_idx.copy()
    for k in range(width - 1, -1, -1):
        digits[:, k] = rem % base
        rem //= base
    return digits


def _phase_chunk(flat_idx: np.ndarray, n_points: int, n_elems: int) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(n_points) / n_points
    return np.exp(1j * angles[_digit_chunk(flat_idx, n_points, n_elems)])


def _precoder_chunk(
    flat_idx: np.ndarray, n_points: int, dim: int, p_max_power: float
):
    """Complex candidates (chunk, dim) rescaled to the power sphere.

    Real dimensions are ordered [Re f_1, Im f_1, Re f_2, Im f_2, ...] with the
    last one varying fastest.  Returns (candidates, valid) where valid is
    False for the all-zero grid point, which has no sphere projection.
    """
    vals = np.linspace(-np.sqrt(p_max_power), np.sqrt(p_max_power), n_points)
    parts = vals[_digit_chunk(flat_idx, n_points, 2 * dim)]
    cand = parts[:, 0::2] + 1j * parts[:, 1::2]
    norms = np.linalg.norm(cand, axis=1)
    valid = norms > 0
    scale = np.where(valid, np.sqrt(p_max_power) / np.where(valid, norms, 1.0), 0.0)
    return cand * scale[:, None], valid


def es_reflecting(
    cache: ReflectPairCache,
    grid: GridSpec,
    rho: float,
    noise_var: float,
) -> tuple[ReflectVector, float]:
    n = cache.c_mats.shape[1]
    total = float(grid.phase_points) ** n
    _check_capacity(total, grid, f"phase_points={grid.phase_points}, n_ris={n}")
    total = int(total)

    n_pairs = cache.c_mats.shape[0]
    chunk = max(1, min(total, _CHUNK_BUDGET // max(1, n_pairs * n)))
    best_ps = np.inf
    best_phi = None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        phis = _phase_chunk(idx, grid.phase_points, n)
        ps = ser_union_bound_batch(
            cache.distances_batch(phis), rho, noise_var, cache.n_vectors
        )
        k = int(np.argmin(ps))
        if ps[k] < best_ps:
            best_ps = float(ps[k])
            best_phi = phis[k].copy()
    return ReflectVector(phases=best_phi), best_ps


def es_precoder(
    cache: PrecodePairCache,
    grid: GridSpec,
    p_max_power: float,
    rho: float,
    noise_var: float,
) -> tuple[Precoder, float]:
    dim = cache.dim
    total = float(grid.precoder_points) ** (2 * dim)
    _check_capacity(
        total, grid, f"precoder_points={grid.precoder_points}, real_dims={2 * dim}"
    )
    total = int(total)

    n_pairs = cache.chat_mats.shape[0]
    chunk = max(1, min(total, _CHUNK_BUDGET // max(1, n_pairs * dim)))
    best_ps = np.inf
    best_f = None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        cand, valid = _precoder_chunk(idx, grid.precoder_points, dim, p_max_power)
        ps = np.full(idx.size, np.inf)
        if np.any(valid):
            ps[valid] = ser_union_bound_batch(
                cache.distances_batch(cand[valid]), rho, noise_var, cache.n_vectors
            )
        k = int(np.argmin(ps))
        if ps[k] < best_ps:
            best_ps = float(ps[k])
            best_f = cand[k].copy()
    if best_f is None:
        raise ConfigurationError(
            "precoder grid contains only the zero vector; increase precoder_points"
        )
    return (
        Precoder(matrix=best_f.reshape(cache.n_tx, cache.n_streams)),
        best_ps,
    )


def es_joint(
    config: SystemConfig,
    channels: ChannelSet,
    symbol_set: SymbolVectorSet,
    grid: GridSpec,
) -> tuple[ReflectVector, Precoder, float]:
    n = config.n_ris
    dim = config.n_tx * config.n_streams
    n_phi = float(grid.phase_points) ** n
    n_f = float(grid.precoder_points) ** (2 * dim)
    _check_capacity(
        n_phi * n_f,
        grid,
        f"phase_points={grid.phase_points}, n_ris={n}, "
        f"precoder_points={grid.precoder_points}, real_dims={2 * dim}",
    )
    n_phi, n_f = int(n_phi), int(n_f)

    diffs = symbol_set.differences()
    n_pairs = diffs.shape[0]
    rho, noise_var = config.rho, config.noise_var

    f_chunk = max(1, min(n_f, 8192))
    phi_chunk = max(
        1, min(n_phi, _CHUNK_BUDGET // max(1, f_chunk * n_pairs * config.n_rx))
    )

    best_ps = np.inf
    best_idx = -1
    best_phi = None
    best_f = None
    for f_start in range(0, n_f, f_chunk):
        f_idx = np.arange(f_start, min(f_start + f_chunk, n_f), dtype=np.int64)
        cand, valid = _precoder_chunk(f_idx, grid.precoder_points, dim, config.p_max)
        if not np.any(valid):
            continue
        f_mats = cand.reshape(-1, config.n_tx, config.n_streams)
        # precoded differences F (s_i - s_j) for every candidate and pair
        fd = np.einsum("fts,ps->fpt", f_mats, diffs, optimize=True)
        for p_start in range(0, n_phi, phi_chunk):
            p_idx = np.arange(p_start, min(p_start + phi_chunk, n_phi), dtype=np.int64)
            phis = _phase_chunk(p_idx, grid.phase_points, n)
            h_eff = (
                np.einsum("rn,bn,nt->brt", channels.h2, phis, channels.h1, optimize=True)
                + channels.hd[None, :, :]
            )
            y = np.einsum("brt,fpt->bfpr", h_eff, fd, optimize=True)
            d2 = np.sum(np.abs(y) ** 2, axis=-1)
            ps = np.sum(
                q_function(np.sqrt(rho * d2 / (2.0 * noise_var))), axis=-1
            ) / symbol_set.vectors.shape[0]
            ps[:, ~valid] = np.inf
            k = int(np.argmin(ps))
            b, f_local = divmod(k, ps.shape[1])
            flat = int(p_idx[b]) * n_f + int(f_idx[f_local])
            val = float(ps[b, f_local])
            # chunk blocks are not visited in global flat order, so break
            # exact ties by the flat index as well
            if val < best_ps or (val == best_ps and flat < best_idx):
                best_ps = val
                best_idx = flat
                best_phi = phis[b].copy()
                best_f = f_mats[f_local].copy()
    if best_f is None:
        raise ConfigurationError(
            "precoder grid contains only the zero vector; increase precoder_points"
        )
    return ReflectVector(phases=best_phi), Precoder(matrix=best_f), best_ps
