"""Alternating optimization: any reflecting scheme composed with any precoder scheme.

Each outer iteration fixes the precoder and updates phi, then fixes phi and
updates the precoder, rebuilding the pair caches between stages.  Stages
warm-start from the previous outer iterate.  For stages that optimize a
surrogate rather than P_S itself (MMED, Eigen, ZF, Random), the loop tracks
the best-so-far pair by union-bound P_S and returns that, so the reported
design never loses to any visited iterate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigurationError, ContractViolationError
from .metrics import (
    Precoder,
    ReflectVector,
    build_precode_cache,
    build_reflect_cache,
    union_bound_ps,
)
from .model import ChannelSet, SystemConfig, symbol_set_for
from .precoding import (
    PrecodeOptReport,
    eigen_precoding,
    mmed_precoding,
    mser_precoding,
    random_precoding,
    zf_precoding,
)
from .reflecting import (
    ReflectOptReport,
    VmserParams,
    emser_reflecting,
    random_reflecting,
    sumdist_reflecting,
    vmser_reflecting,
)

EPS_T_DEFAULT = 1e-8
MAX_OUTER_DEFAULT = 30


class ReflectScheme(Enum):
    EMSER = "eMSER"
    VMSER = "vMSER"
    SUMDIST = "SumDist"
    RANDOM = "Random"
    FIXED = "Fixed"


class PrecodeScheme(Enum):
    MSER = "MSER"
    MMED = "MMED"
    EIGEN = "Eigen"
    ZF = "ZF"
    RANDOM = "Random"
    FIXED = "Fixed"


@dataclass(frozen=True)
class SchemeCombo:
    reflect_scheme: ReflectScheme
    precode_scheme: PrecodeScheme

    @classmethod
    def parse(cls, label: str) -> "SchemeCombo":
        """Parse a combo label like "vMSER-MMED" (reflect-precode)."""
        parts = label.split("-")
        if len(parts) != 2:
            raise ConfigurationError(f"combo label must be 'Reflect-Precode', got {label!r}")
        try:
            reflect = ReflectScheme(parts[0])
        except ValueError:
            raise ConfigurationError(
                f"unknown reflect scheme {parts[0]!r}; valid: "
                f"{[s.value for s in ReflectScheme]}"
            ) from None
        try:
            precode = PrecodeScheme(parts[1])
        except ValueError:
            raise ConfigurationError(
                f"unknown precode scheme {parts[1]!r}; valid: "
                f"{[s.value for s in PrecodeScheme]}"
            ) from None
        return cls(reflect_scheme=reflect, precode_scheme=precode)

    @property
    def label(self) -> str:
        return f"{self.reflect_scheme.value}-{self.precode_scheme.value}"


@dataclass
class AlternatingReport:
    phi_out: ReflectVector
    precoder_out: Precoder
    outer_trace: list
    outer_iterations: int
    stage_reports: list  # (reflect_report | None, precode_report | None) per iteration
    wall_time: float
    ps_out: float


def _derived_seed(base_seed: int, tag: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), tag]).generate_state(1, np.uint64)[0])


def alternate(
    config: SystemConfig,
    channels: ChannelSet,
    combo: SchemeCombo,
    phi0=None,
    f0=None,
    eps_t: float = EPS_T_DEFAULT,
    max_outer: int = MAX_OUTER_DEFAULT,
    vmser_params: VmserParams | None = None,
) -> AlternatingReport:
    """Run the outer loop until the P_S improvement falls below eps_t.

    phi0 defaults to all-ones, f0 to a seeded random precoder at full power.
    An f0 inside the power ball is scaled up to the sphere when the precode
    stage needs the equality constraint (more transmit power never increases
    the bound).  Baseline stages (Random) draw from a per-call seed derived
    from config.seed, so repeating an iteration reproduces the same draw and
    the loop terminates instead of random-searching.
    """
    t_start = time.perf_counter()
    symbol_set = symbol_set_for(config)
    rho = config.rho
    noise_var = config.noise_var
    p_max = config.p_max

    if phi0 is None:
        phi = np.ones(config.n_ris, dtype=complex)
    else:
        phi = phi0.phases.copy() if isinstance(phi0, ReflectVector) else np.asarray(
            phi0, dtype=complex
        ).reshape(-1).copy()
    if np.max(np.abs(np.abs(phi) - 1.0)) > 1e-9:
        raise ContractViolationError("phi0 must be unit-modulus")

    if f0 is None:
        f_mat = random_precoding(
            config.n_tx, config.n_streams, p_max, _derived_seed(config.seed, 0xF0)
        ).matrix
    else:
        f_mat = f0.matrix.copy() if isinstance(f0, Precoder) else np.asarray(
            f0, dtype=complex
        ).copy()
    power = float(np.sum(np.abs(f_mat) ** 2))
    if power > p_max + 1e-9:
        raise ContractViolationError(f"f0 power {power} exceeds p_max {p_max}")
    if combo.precode_scheme in (PrecodeScheme.MSER, PrecodeScheme.MMED) and power > 0:
        f_mat = f_mat * np.sqrt(p_max / power)

    def outer_ps() -> float:
        return union_bound_ps(channels, phi, f_mat, symbol_set, rho, noise_var)

    trace = [outer_ps()]
    best_phi, best_f, best_ps = phi.copy(), f_mat.copy(), trace[0]
    stage_reports = []
    outer_iterations = 0

    both_fixed = (
        combo.reflect_scheme is ReflectScheme.FIXED
        and combo.precode_scheme is PrecodeScheme.FIXED
    )
    if not both_fixed:
        reflect_seed = _derived_seed(config.seed, 0x1F)
        precode_seed = _derived_seed(config.seed, 0x2F)
        for _ in range(max_outer):
            outer_iterations += 1

            r_report = None
            if combo.reflect_scheme is not ReflectScheme.FIXED:
                if combo.reflect_scheme is ReflectScheme.RANDOM:
                    phi = random_reflecting(config.n_ris, reflect_seed).phases
                else:
                    r_cache = build_reflect_cache(channels, f_mat, symbol_set)
                    if combo.reflect_scheme is ReflectScheme.EMSER:
                        r_report = emser_reflecting(r_cache, phi, rho, noise_var)
                    elif combo.reflect_scheme is ReflectScheme.VMSER:
                        r_report = vmser_reflecting(
                            r_cache, phi, rho, noise_var, vmser_params
                        )
                    elif combo.reflect_scheme is ReflectScheme.SUMDIST:
                        r_report = sumdist_reflecting(
                            r_cache, phi, rho=rho, noise_var=noise_var
                        )
                    phi = r_report.phi_out.phases
                if np.max(np.abs(np.abs(phi) - 1.0)) > 1e-9:
                    raise ContractViolationError(
                        f"reflect stage {combo.reflect_scheme.value} returned "
                        "non-unit-modulus phi"
                    )

            p_report = None
            if combo.precode_scheme is not PrecodeScheme.FIXED:
                if combo.precode_scheme is PrecodeScheme.RANDOM:
                    f_mat = random_precoding(
                        config.n_tx, config.n_streams, p_max, precode_seed
                    ).matrix
                elif combo.precode_scheme is PrecodeScheme.EIGEN:
                    f_mat = eigen_precoding(channels, phi, config.n_streams, p_max).matrix
                elif combo.precode_scheme is PrecodeScheme.ZF:
                    f_mat = zf_precoding(channels, phi, config.n_streams, p_max).matrix
                else:
                    p_cache = build_precode_cache(channels, phi, symbol_set)
                    if combo.precode_scheme is PrecodeScheme.MSER:
                        p_report = mser_precoding(
                            p_cache, f_mat.reshape(-1), rho, noise_var, p_max
                        )
                    else:  # MMED
                        p_report = mmed_precoding(p_cache, f_mat.reshape(-1), p_max)
                    f_mat = p_report.precoder_out.matrix
                if float(np.sum(np.abs(f_mat) ** 2)) > p_max + 1e-9:
                    raise ContractViolationError(
                        f"precode stage {combo.precode_scheme.value} returned "
                        "an over-power precoder"
                    )

            stage_reports.append((r_report, p_report))
            trace.append(outer_ps())
            if trace[-1] < best_ps:
                best_phi, best_f, best_ps = phi.copy(), f_mat.copy(), trace[-1]
            if trace[-2] - trace[-1] < eps_t:
                break

    return AlternatingReport(
        phi_out=ReflectVector(phases=best_phi),
        precoder_out=Precoder(matrix=best_f),
        outer_trace=trace,
        outer_iterations=outer_iterations,
        stage_reports=stage_reports,
        wall_time=time.perf_counter() - t_start,
        ps_out=best_ps,
    )
