import itertools

import numpy as np
import pytest

from risopt.errors import (
    ConfigurationError,
    ContractViolationError,
    IllConditionedChannelError,
)
from risopt.metrics import (
    build_precode_cache,
    effective_channel,
    ser_union_bound,
)
from risopt.model import ChannelSet, SystemConfig, gen_channels, symbol_set_for
from risopt.oracle import GridSpec, es_precoder
from risopt.precoding import (
    eigen_precoding,
    mmed_precoding,
    mser_precoding,
    mser_search_direction,
    omega_matrix,
    random_precoding,
    zf_precoding,
)
from risopt.reflecting import random_reflecting


def setup_instance(seed, n_rx=2, n_ris=2, n_tx=2, n_streams=1, mod_order=2, snr_db=0.0):
    cfg = SystemConfig(
        n_rx=n_rx,
        n_ris=n_ris,
        n_tx=n_tx,
        n_streams=n_streams,
        mod_order=mod_order,
        snr_db=snr_db,
        seed=seed,
    )
    ch = gen_channels(cfg)
    ss = symbol_set_for(cfg)
    phi = random_reflecting(cfg.n_ris, seed + 300).phases
    cache = build_precode_cache(ch, phi, ss)
    return cfg, ch, phi, cache


def diag_channels(diag_entries, n_tx=None):
    """ChannelSet with h2 = 0 so the effective channel is exactly hd."""
    hd = np.diag(np.asarray(diag_entries, dtype=complex))
    if n_tx is not None and n_tx > hd.shape[1]:
        hd = np.hstack([hd, np.zeros((hd.shape[0], n_tx - hd.shape[1]), complex)])
    n_rx, n_cols = hd.shape
    return ChannelSet(
        h1=np.zeros((1, n_cols), complex),
        h2=np.zeros((n_rx, 1), complex),
        hd=hd,
    )


# --- search direction against central finite differences ---


@pytest.mark.parametrize("seed", range(5))
def test_mser_direction_matches_fd(seed):
    cfg, ch, phi, cache = setup_instance(seed, mod_order=4, snr_db=6.0)
    rng = np.random.default_rng(seed + 40)
    f = rng.standard_normal(cache.dim) + 1j * rng.standard_normal(cache.dim)
    f *= np.sqrt(cfg.p_max) / np.linalg.norm(f)
    r = mser_search_direction(cache, f, cfg.rho, cfg.noise_var)
    v = cache.n_vectors

    def ps(x):
        return ser_union_bound(cache.distances(x), cfg.rho, cfg.noise_var, v)

    h = 1e-6
    fd = np.zeros(cache.dim, dtype=complex)
    for k in range(cache.dim):
        e = np.zeros(cache.dim, dtype=complex)
        e[k] = 1.0
        fd[k] = (ps(f + h * e) - ps(f - h * e)) / (2 * h) + 1j * (
            ps(f + 1j * h * e) - ps(f - 1j * h * e)
        ) / (2 * h)
    # r is the NEGATIVE gradient
    assert np.max(np.abs(r + fd)) <= 1e-5 * np.max(np.abs(fd))


def test_omega_matrix_is_hermitian():
    cfg, ch, phi, cache = setup_instance(2)
    f = random_precoding(cfg.n_tx, cfg.n_streams, cfg.p_max, 9).flat
    om = omega_matrix(cache, f, cfg.rho, cfg.noise_var)
    assert np.allclose(om, om.conj().T)


# --- mser_precoding ---


@pytest.mark.parametrize("seed", range(5))
def test_mser_trace_nonincreasing_and_on_sphere(seed):
    cfg, ch, phi, cache = setup_instance(seed)
    f0 = random_precoding(cfg.n_tx, cfg.n_streams, cfg.p_max, seed + 77)
    rep = mser_precoding(cache, f0, cfg.rho, cfg.noise_var, cfg.p_max)
    trace = np.asarray(rep.objective_trace)
    assert np.all(np.diff(trace) <= 1e-12)
    power = float(np.real(np.vdot(rep.precoder_out.flat, rep.precoder_out.flat)))
    assert abs(power - cfg.p_max) <= 1e-9


def test_mser_scalar_system_phase_invariant():
    # Nt = Ns = 1: P_S depends only on |f|, so any unit-power start is optimal.
    cfg, ch, phi, cache = setup_instance(4, n_rx=1, n_tx=1)
    f0 = np.array([np.exp(1j * 0.7)])
    rep = mser_precoding(cache, f0, cfg.rho, cfg.noise_var, cfg.p_max)
    fout = rep.precoder_out.flat
    assert abs(np.real(np.vdot(fout, fout)) - cfg.p_max) < 1e-9
    ps_ref = ser_union_bound(
        cache.distances(np.array([np.sqrt(cfg.p_max)])),
        cfg.rho,
        cfg.noise_var,
        cache.n_vectors,
    )
    assert rep.objective_trace[-1] == pytest.approx(ps_ref, rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_mser_matches_precoder_grid_oracle(seed):
    cfg, ch, phi, cache = setup_instance(seed, n_rx=1)
    grid = GridSpec(phase_points=1, precoder_points=9)
    f_best, ps_best = es_precoder(cache, grid, cfg.p_max, cfg.rho, cfg.noise_var)
    f0 = eigen_precoding(ch, phi, cfg.n_streams, cfg.p_max)
    rep = mser_precoding(cache, f0, cfg.rho, cfg.noise_var, cfg.p_max)
    assert rep.objective_trace[-1] <= 1.1 * ps_best


def test_mser_rejects_off_sphere_start():
    cfg, ch, phi, cache = setup_instance(1)
    with pytest.raises(ContractViolationError):
        mser_precoding(
            cache,
            0.5 * random_precoding(cfg.n_tx, cfg.n_streams, cfg.p_max, 3).flat,
            cfg.rho,
            cfg.noise_var,
            cfg.p_max,
        )


def test_mser_stationary_zero_direction_returns_immediately():
    # All-zero channels: every Chat is zero, so r = 0 at the start.
    ss = symbol_set_for(
        SystemConfig(n_rx=1, n_ris=2, n_tx=2, n_streams=1, mod_order=2, snr_db=0.0, seed=0)
    )
    zero_ch = ChannelSet(
        h1=np.zeros((2, 2), complex),
        h2=np.zeros((1, 2), complex),
        hd=np.zeros((1, 2), complex),
    )
    cache = build_precode_cache(zero_ch, np.ones(2, complex), ss)
    f0 = random_precoding(2, 1, 1.0, 5)
    rep = mser_precoding(cache, f0, 1.0, 1.0, 1.0)
    assert rep.iterations == 0
    assert rep.converged
    assert len(rep.objective_trace) == 1


# --- mmed_precoding ---


@pytest.mark.parametrize("seed", range(5))
def test_mmed_trace_nondecreasing_and_on_sphere(seed):
    cfg, ch, phi, cache = setup_instance(seed)
    f0 = random_precoding(cfg.n_tx, cfg.n_streams, cfg.p_max, seed + 77)
    rep = mmed_precoding(cache, f0, cfg.p_max)
    trace = np.asarray(rep.objective_trace)
    assert np.all(np.diff(trace) >= -1e-12)
    power = float(np.real(np.vdot(rep.precoder_out.flat, rep.precoder_out.flat)))
    assert abs(power - cfg.p_max) <= 1e-9


def test_mmed_scalar_system():
    cfg, ch, phi, cache = setup_instance(4, n_rx=1, n_tx=1)
    f0 = np.array([np.sqrt(cfg.p_max)])
    rep = mmed_precoding(cache, f0, cfg.p_max)
    ref = cfg.p_max * float(np.min([np.real(c[0, 0]) for c in cache.chat_mats]))
    assert rep.objective_trace[-1] == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_mmed_beats_grid_max_min(seed):
    cfg, ch, phi, cache = setup_instance(seed, n_rx=1)
    pts = np.linspace(-np.sqrt(cfg.p_max), np.sqrt(cfg.p_max), 9)
    cands = []
    for parts in itertools.product(pts, repeat=2 * cache.dim):
        v = np.asarray(parts[0::2]) + 1j * np.asarray(parts[1::2])
        n = np.linalg.norm(v)
        if n > 0:
            cands.append(v * (np.sqrt(cfg.p_max) / n))
    grid_best = float(np.max(np.min(cache.distances_batch(np.asarray(cands)), axis=1)))
    f0 = random_precoding(cfg.n_tx, cfg.n_streams, cfg.p_max, seed + 77)
    rep = mmed_precoding(cache, f0, cfg.p_max)
    assert rep.objective_trace[-1] >= 0.95 * grid_best


def test_mmed_power_doubling_scales_by_sqrt2():
    cfg, ch, phi, cache = setup_instance(6, n_rx=1)
    f0 = random_precoding(cfg.n_tx, cfg.n_streams, 1.0, 11)
    rep1 = mmed_precoding(cache, f0, 1.0)
    f0_2 = np.sqrt(2.0) * f0.flat
    rep2 = mmed_precoding(cache, f0_2, 2.0)
    assert np.allclose(
        rep2.precoder_out.flat, np.sqrt(2.0) * rep1.precoder_out.flat, atol=1e-8
    )
    assert rep2.objective_trace[-1] == pytest.approx(
        2.0 * rep1.objective_trace[-1], rel=1e-8
    )


def test_mmed_degenerate_start_recovers_by_perturbation():
    # f0 in the null space of the rank-1 effective channel: every pair
    # distance is zero and the softmin gradient vanishes.
    cfg, ch, phi_vec, cache = setup_instance(3, n_rx=1)
    phi = np.ones(cfg.n_ris, complex)
    cache = build_precode_cache(ch, phi, symbol_set_for(cfg))
    h = effective_channel(ch, phi)
    null = np.array([-h[0, 1], h[0, 0]], complex)
    null *= np.sqrt(cfg.p_max) / np.linalg.norm(null)
    assert np.max(cache.distances(null)) == 0.0
    rep = mmed_precoding(cache, null, cfg.p_max)
    assert rep.converged
    assert rep.objective_trace[-1] > 0.0


def test_mmed_all_zero_channel_flags_not_converged():
    ss = symbol_set_for(
        SystemConfig(n_rx=1, n_ris=2, n_tx=2, n_streams=1, mod_order=2, snr_db=0.0, seed=0)
    )
    zero_ch = ChannelSet(
        h1=np.zeros((2, 2), complex),
        h2=np.zeros((1, 2), complex),
        hd=np.zeros((1, 2), complex),
    )
    cache = build_precode_cache(zero_ch, np.ones(2, complex), ss)
    rep = mmed_precoding(cache, random_precoding(2, 1, 1.0, 5), 1.0)
    assert not rep.converged
    assert rep.objective_trace == [0.0]


def test_mmed_tracks_mser_at_high_snr():
    # At 20 dB the min-distance design should be close to the direct SER
    # minimizer: within 1.5x union-bound P_S in at least 90% of draws.
    wins = 0
    for seed in range(20):
        cfg = SystemConfig(
            n_rx=2, n_ris=2, n_tx=2, n_streams=1, mod_order=2, snr_db=20.0, seed=seed
        )
        ch = gen_channels(cfg)
        ss = symbol_set_for(cfg)
        cache = build_precode_cache(ch, np.ones(cfg.n_ris, complex), ss)
        f0 = random_precoding(cfg.n_tx, cfg.n_streams, cfg.p_max, seed + 77)
        rep_mser = mser_precoding(cache, f0, cfg.rho, cfg.noise_var, cfg.p_max)
        rep_mmed = mmed_precoding(cache, f0, cfg.p_max)
        ps_mmed = ser_union_bound(
            cache.distances(rep_mmed.precoder_out.flat),
            cfg.rho,
            cfg.noise_var,
            cache.n_vectors,
        )
        wins += ps_mmed <= 1.5 * rep_mser.objective_trace[-1]
    assert wins >= 18


# --- eigen_precoding ---


def test_eigen_dominant_direction():
    ch = diag_channels([2.0, 1.0])
    f = eigen_precoding(ch, np.ones(1, complex), 1, 1.0)
    assert np.allclose(np.abs(f.matrix), [[1.0], [0.0]], atol=1e-12)


def test_eigen_degenerate_spectrum_invariants():
    ch = diag_channels([1.0, 1.0])
    f = eigen_precoding(ch, np.ones(1, complex), 2, 1.0)
    gram = f.matrix @ f.matrix.conj().T
    assert np.allclose(gram, np.eye(2) / 2.0, atol=1e-12)
    assert abs(np.trace(f.matrix.conj().T @ f.matrix).real - 1.0) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_eigen_residual(seed):
    cfg = SystemConfig(
        n_rx=3, n_ris=2, n_tx=3, n_streams=2, mod_order=2, snr_db=0.0, seed=seed
    )
    ch = gen_channels(cfg)
    phi = random_reflecting(cfg.n_ris, seed).phases
    f = eigen_precoding(ch, phi, cfg.n_streams, cfg.p_max)
    h = effective_channel(ch, phi)
    gram = h.conj().T @ h
    lam_max = float(np.linalg.eigvalsh(gram)[-1])
    w = f.matrix / np.linalg.norm(f.matrix, axis=0, keepdims=True)
    for k in range(cfg.n_streams):
        lam = float(np.real(np.vdot(w[:, k], gram @ w[:, k])))
        assert np.linalg.norm(gram @ w[:, k] - lam * w[:, k]) <= 1e-9 * lam_max


def test_eigen_rank_deficient_raises():
    ch = diag_channels([1.0, 0.0])
    with pytest.raises(IllConditionedChannelError, match="rank"):
        eigen_precoding(ch, np.ones(1, complex), 2, 1.0)


def test_eigen_power_exact():
    cfg = SystemConfig(
        n_rx=2, n_ris=3, n_tx=2, n_streams=2, mod_order=2, snr_db=0.0, seed=8
    )
    ch = gen_channels(cfg)
    f = eigen_precoding(ch, np.ones(cfg.n_ris, complex), cfg.n_streams, 2.5)
    assert abs(np.trace(f.matrix.conj().T @ f.matrix).real - 2.5) < 1e-9


# --- zf_precoding ---


def test_zf_identity_channel():
    ch = diag_channels([1.0, 1.0])
    f = zf_precoding(ch, np.ones(1, complex), 2, 1.0)
    assert np.allclose(f.matrix, np.sqrt(0.5) * np.eye(2), atol=1e-12)


def test_zf_nulls_interference_on_diag_channel():
    ch = diag_channels([2.0, 1.0])
    f = zf_precoding(ch, np.ones(1, complex), 2, 1.0)
    prod = ch.hd @ f.matrix
    off = prod - np.diag(np.diag(prod))
    assert np.max(np.abs(off)) < 1e-12


@pytest.mark.parametrize("seed", range(3))
def test_zf_off_diagonal_suppression_random_wide_channel(seed):
    cfg = SystemConfig(
        n_rx=2, n_ris=2, n_tx=3, n_streams=2, mod_order=2, snr_db=0.0, seed=seed
    )
    ch = gen_channels(cfg)
    phi = random_reflecting(cfg.n_ris, seed).phases
    f = zf_precoding(ch, phi, cfg.n_streams, cfg.p_max)
    prod = effective_channel(ch, phi) @ f.matrix
    diag_mag = np.min(np.abs(np.diag(prod)))
    off = prod - np.diag(np.diag(prod))
    assert np.max(np.abs(off)) < 1e-9 * diag_mag
    assert abs(np.trace(f.matrix.conj().T @ f.matrix).real - cfg.p_max) < 1e-9


def test_zf_rejects_too_many_streams():
    ch = diag_channels([1.0, 1.0])  # 2x2
    with pytest.raises(ContractViolationError):
        zf_precoding(ch, np.ones(1, complex), 3, 1.0)


def test_zf_ill_conditioned_raises():
    hd = np.array([[1.0, 0.0, 0.0], [1.0 + 1e-14, 0.0, 0.0]], complex)
    ch = ChannelSet(
        h1=np.zeros((1, 3), complex), h2=np.zeros((2, 1), complex), hd=hd
    )
    with pytest.raises(IllConditionedChannelError):
        zf_precoding(ch, np.ones(1, complex), 2, 1.0)


# --- random_precoding ---


def test_random_precoding_power_exact():
    f = random_precoding(3, 2, 1.7, 12)
    assert abs(np.trace(f.matrix.conj().T @ f.matrix).real - 1.7) < 1e-12


def test_random_precoding_deterministic():
    a = random_precoding(2, 2, 1.0, 42)
    b = random_precoding(2, 2, 1.0, 42)
    assert np.array_equal(a.matrix, b.matrix)


def test_random_precoding_seeds_differ():
    a = random_precoding(2, 2, 1.0, 1)
    b = random_precoding(2, 2, 1.0, 2)
    assert np.linalg.norm(a.matrix - b.matrix) > 0


def test_random_precoding_rejects_bad_dims():
    with pytest.raises(ConfigurationError):
        random_precoding(0, 1, 1.0, 0)
