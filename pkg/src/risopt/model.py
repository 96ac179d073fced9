"""System model: configuration, constellations, symbol vectors and channel draws.

Link layout: a transmitter with n_tx antennas sends n_streams spatially
multiplexed streams through a reflecting surface with n_ris passive elements
plus a direct path, to a receiver with n_rx antennas.  The received signal is

    y = sqrt(rho) * (H2 @ diag(phi) @ H1 + Hd) @ F @ s + n,

with per-element unit-modulus reflection coefficients phi, precoder F subject
to tr(F F^H) <= p_max, symbol vector s drawn from an M-ary constellation on
each stream, and n ~ CN(0, noise_var * I).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigurationError

PSK_ORDERS = (2, 4, 8, 16, 64)
QAM_ORDERS = (4, 16, 64)

# Hard cap on enumerated symbol vectors (M ** n_streams); protects cache memory.
VECTOR_ENUM_CAP = 4096


@dataclass(frozen=True)
class SystemConfig:
    """Static description of one link instance.

    snr_db enters the model as rho = 10 ** (snr_db / 10) multiplying the
    effective channel; noise_var and p_max stay at their defaults of 1.0
    unless a study explicitly sweeps them.
    """

    n_rx: int
    n_ris: int
    n_tx: int
    n_streams: int
    mod_order: int
    mod_kind: str = "psk"  # "psk" | "qam"
    rician_k: float = 0.0  # same K on all three links
    snr_db: float = 10.0
    noise_var: float = 1.0
    p_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("n_rx", "n_ris", "n_tx", "n_streams"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_streams > min(self.n_tx, self.n_rx):
            raise ConfigurationError(
                f"n_streams={self.n_streams} exceeds min(n_tx, n_rx)="
                f"{min(self.n_tx, self.n_rx)}"
            )
        if self.mod_kind not in ("psk", "qam"):
            raise ConfigurationError(f"mod_kind must be 'psk' or 'qam', got {self.mod_kind!r}")
        allowed = PSK_ORDERS if self.mod_kind == "psk" else QAM_ORDERS
        if self.mod_order not in allowed:
            raise ConfigurationError(
                f"mod_order={self.mod_order} unsupported for {self.mod_kind} "
                f"(allowed: {allowed})"
            )
        if self.noise_var <= 0:
            raise ConfigurationError(f"noise_var must be > 0, got {self.noise_var}")
        if self.p_max <= 0:
            raise ConfigurationError(f"p_max must be > 0, got {self.p_max}")
        if self.rician_k < 0:
            raise ConfigurationError(f"rician_k must be >= 0, got {self.rician_k}")

    @property
    def rho(self) -> float:
        return float(10.0 ** (self.snr_db / 10.0))

    @property
    def n_vectors(self) -> int:
        return self.mod_order**self.n_streams


def make_constellation(mod_order: int, mod_kind: str = "psk") -> np.ndarray:
    """Return the M points of a unit-average-power constellation.

    PSK: point m is exp(j*2*pi*m/M), m = 0..M-1.
    QAM: square grid with odd integer coordinates, scaled so the mean of
    |s|^2 over all points is exactly 1 (e.g. 16-QAM scale 1/sqrt(10)).
    """
    if mod_kind == "psk":
        if mod_order not in PSK_ORDERS:
            raise ConfigurationError(f"psk mod_order must be in {PSK_ORDERS}")
        m = np.arange(mod_order)
        return np.exp(2j * np.pi * m / mod_order)
    if mod_kind == "qam":
        if mod_order not in QAM_ORDERS:
            raise ConfigurationError(f"qam mod_order must be in {QAM_ORDERS}")
        side = int(round(np.sqrt(mod_order)))
        levels = np.arange(-side + 1, side, 2).astype(float)
        re, im = np.meshgrid(levels, levels, indexing="ij")
        points = (re + 1j * im).ravel()
        scale = np.sqrt(np.mean(np.abs(points) ** 2))
        return points / scale
    raise ConfigurationError(f"mod_kind must be 'psk' or 'qam', got {mod_kind!r}")


@dataclass(frozen=True)
class SymbolVectorSet:
    """All M**n_streams candidate symbol vectors plus the ordered pair list."""

    vectors: np.ndarray  # (V, n_streams) complex
    pair_index: np.ndarray  # (V*(V-1), 2) int, all ordered pairs i != j

    @property
    def n_vectors(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_streams(self) -> int:
        return self.vectors.shape[1]

    def differences(self) -> np.ndarray:
        """Per-pair difference vectors s_i - s_j, shape (P, n_streams)."""
        i = self.pair_index[:, 0]
        j = self.pair_index[:, 1]
        return self.vectors[i] - self.vectors[j]


def enumerate_vectors(
    constellation: np.ndarray, n_streams: int, cap: int = VECTOR_ENUM_CAP
) -> SymbolVectorSet:
    """Enumerate all symbol vectors in lexicographic per-stream index order.

    The first stream is the most significant digit, so for BPSK with two
    streams the order is (+,+), (+,-), (-,+), (-,-).  Raises CapacityError
    when M**n_streams exceeds cap.
    """
    m = len(constellation)
    total = m**n_streams
    if total > cap:
        raise CapacityError(
            f"mod_order**n_streams = {m}**{n_streams} = {total} exceeds cap {cap}"
        )
    vectors = np.array(
        list(itertools.product(constellation, repeat=n_streams)), dtype=complex
    ).reshape(total, n_streams)
    idx = np.arange(total)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    mask = ii != jj
    pair_index = np.stack([ii[mask], jj[mask]], axis=1)
    return SymbolVectorSet(vectors=vectors, pair_index=pair_index)


def symbol_set_for(config: SystemConfig) -> SymbolVectorSet:
    """Symbol vector set implied by a config's constellation and stream count."""
    return enumerate_vectors(
        make_constellation(config.mod_order, config.mod_kind), config.n_streams
    )


@dataclass(frozen=True)
class ChannelSet:
    """One realization of the three channel matrices."""

    h1: np.ndarray  # (n_ris, n_tx) transmitter -> surface
    h2: np.ndarray  # (n_rx, n_ris) surface -> receiver
    hd: np.ndarray  # (n_rx, n_tx) direct path

    @property
    def n_rx(self) -> int:
        return self.hd.shape[0]

    @property
    def n_tx(self) -> int:
        return self.hd.shape[1]

    @property
    def n_ris(self) -> int:
        return self.h1.shape[0]


def _rician_matrix(rng: np.random.Generator, shape: tuple, k_factor: float) -> np.ndarray:
    """Rician block: deterministic all-ones LOS plus CN(0,1) scattering.

    E|h|^2 = K/(1+K) + 1/(1+K) = 1 for every entry.
    """
    los = np.ones(shape, dtype=complex)
    nlos = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    return np.sqrt(k_factor / (1.0 + k_factor)) * los + np.sqrt(1.0 / (1.0 + k_factor)) * nlos


def gen_channels(config: SystemConfig, seed: int | None = None) -> ChannelSet:
    """Draw H1, H2, Hd for one link instance, deterministically from seed.

    seed defaults to config.seed.  Draw order is fixed (h1, h2, hd) so a
    given seed always produces the same triple.
    """
    if seed is None:
        seed = config.seed
    rng = np.random.default_rng(seed)
    k = config.rician_k
    h1 = _rician_matrix(rng, (config.n_ris, config.n_tx), k)
    h2 = _rician_matrix(rng, (config.n_rx, config.n_ris), k)
    hd = _rician_matrix(rng, (config.n_rx, config.n_tx), k)
    return ChannelSet(h1=h1, h2=h2, hd=hd)


def perturb_csi(channels: ChannelSet, error_var: float, seed: int) -> ChannelSet:
    """Additive CN(0, error_var) estimation error on each matrix.

    Models the optimizer seeing H + E while the true link stays H; with
    error_var = 0 the input is returned unchanged.
    """
    if error_var < 0:
        raise ConfigurationError(f"error_var must be >= 0, got {error_var}")
    if error_var == 0:
        return channels
    rng = np.random.default_rng(seed)
    scale = np.sqrt(error_var / 2.0)

    def noisy(h: np.ndarray) -> np.ndarray:
        return h + scale * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape))

    return ChannelSet(h1=noisy(channels.h1), h2=noisy(channels.h2), hd=noisy(channels.hd))


