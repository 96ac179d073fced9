"""Experiment sweeps: channel draws x CSI error levels x scheme combos x SNR.

Emits results.csv (RFC-4180, UTF-8) plus manifest.json capturing the spec and
every resolved tunable, so a run is reproducible from the manifest alone.
All randomness is derived from master_seed with counter-style tags, so the
output is byte-identical across reruns and worker counts, except for the
wall_time_s column.

CSI-error semantics: the optimizer sees the perturbed channels, while the
union bound and the Monte-Carlo evaluation use the true ones.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .alternating import (
    EPS_T_DEFAULT,
    MAX_OUTER_DEFAULT,
    SchemeCombo,
    alternate,
)
from .errors import ConfigurationError, SpecValidationError
from .metrics import union_bound_ps
from .model import SystemConfig, gen_channels, perturb_csi, symbol_set_for
from .oracle import GridSpec
from .precoding import (
    EPS4_DEFAULT,
    MMED_MAX_ITERS_DEFAULT,
    MMED_STAGES,
    MSER_MAX_ITERS_DEFAULT,
    eigen_precoding,
    random_precoding,
)
from .reflecting import (
    ARMIJO_DECREASE,
    ARMIJO_INIT,
    ARMIJO_MAX_BACKTRACKS,
    ARMIJO_SHRINK,
    EPS0_DEFAULT,
    EPS1_DEFAULT,
    MAX_SWEEPS_DEFAULT,
    SUMDIST_TOL,
    VmserParams,
)
from .simulate import BATCH_TRIALS, simulate_ser

RESULT_COLUMNS = (
    "experiment",
    "combo",
    "snr_db",
    "csi_error_var",
    "channel_seed",
    "union_bound_ser",
    "mc_ser",
    "mc_stderr",
    "outer_iterations",
    "wall_time_s",
)

# tags for counter-based seed derivation; all cell seeds are
# SeedSequence([master_seed, draw, ...tags]) so draws can run on any worker
_TAG_F0 = 0xF0
_TAG_CSI = 0xCE
_TAG_STAGE = 0xA1
_TAG_MC = 0x3C

_PRECODER_INITS = ("random", "eigen")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    combo: str
    snr_db: float
    csi_error_var: float
    channel_seed: int
    union_bound_ser: float
    mc_ser: float
    mc_stderr: float
    outer_iterations: int
    wall_time_s: float


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    config: SystemConfig
    snr_db_list: tuple
    combos: tuple
    n_channel_draws: int
    mc_trials: int
    csi_error_vars: tuple = (0.0,)
    output_dir: str = "results"
    master_seed: int = 0
    n_ris_list: tuple | None = None
    oracle_grid: GridSpec | None = None
    precoder_init: str = "random"

    def __post_init__(self):
        if not self.name:
            raise SpecValidationError("name must be a non-empty string")
        if len(self.snr_db_list) == 0:
            raise SpecValidationError("snr_db_list must be non-empty")
        if len(self.combos) == 0:
            raise SpecValidationError("combos must be non-empty")
        if self.n_channel_draws < 1:
            raise SpecValidationError("n_channel_draws must be >= 1")
        if self.mc_trials < 1:
            raise SpecValidationError("mc_trials must be >= 1")
        if len(self.csi_error_vars) == 0:
            raise SpecValidationError("csi_error_vars must be non-empty")
        if any(v < 0 for v in self.csi_error_vars):
            raise SpecValidationError("csi_error_vars entries must be >= 0")
        if self.precoder_init not in _PRECODER_INITS:
            raise SpecValidationError(
                f"precoder_init must be one of {_PRECODER_INITS}"
            )
        if self.n_ris_list is not None and (
            len(self.n_ris_list) == 0 or any(n < 1 for n in self.n_ris_list)
        ):
            raise SpecValidationError("n_ris_list must be non-empty positive integers")


_TOP_KEYS_REQUIRED = (
    "name",
    "config",
    "snr_db_list",
    "combos",
    "n_channel_draws",
    "mc_trials",
    "master_seed",
)
_TOP_KEYS_OPTIONAL = (
    "csi_error_vars",
    "output_dir",
    "n_ris_list",
    "oracle_grid",
    "precoder_init",
)
_CONFIG_KEYS_REQUIRED = ("n_rx", "n_ris", "n_tx", "n_streams", "mod_order")
_CONFIG_KEYS_OPTIONAL = ("mod_kind", "rician_k", "noise_var", "p_max")
_GRID_KEYS = ("phase_points", "precoder_points", "max_total")


def _require_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SpecValidationError(f"{key} must be an integer, got {value!r}")
    return value


def _require_number(value, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SpecValidationError(f"{key} must be a number, got {value!r}")
    return float(value)


def _check_keys(data: dict, required, optional, where: str) -> None:
    unknown = sorted(set(data) - set(required) - set(optional))
    if unknown:
        raise SpecValidationError(f"unknown keys in {where}: {unknown}")
    missing = sorted(set(required) - set(data))
    if missing:
        raise SpecValidationError(f"missing keys in {where}: {missing}")


def load_spec(path, out_override=None, seed_override=None) -> ExperimentSpec:
    """Load and strictly validate a JSON experiment spec."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SpecValidationError(f"cannot read spec file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SpecValidationError(f"spec file is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SpecValidationError("spec file must contain a JSON object")
    _check_keys(data, _TOP_KEYS_REQUIRED, _TOP_KEYS_OPTIONAL, "spec")

    cfg_data = data["config"]
    if not isinstance(cfg_data, dict):
        raise SpecValidationError("config must be a JSON object")
    _check_keys(cfg_data, _CONFIG_KEYS_REQUIRED, _CONFIG_KEYS_OPTIONAL, "config")
    try:
        config = SystemConfig(
            n_rx=_require_int(cfg_data["n_rx"], "config.n_rx"),
            n_ris=_require_int(cfg_data["n_ris"], "config.n_ris"),
            n_tx=_require_int(cfg_data["n_tx"], "config.n_tx"),
            n_streams=_require_int(cfg_data["n_streams"], "config.n_streams"),
            mod_order=_require_int(cfg_data["mod_order"], "config.mod_order"),
            mod_kind=cfg_data.get("mod_kind", "psk"),
            rician_k=_require_number(cfg_data.get("rician_k", 0.0), "config.rician_k"),
            noise_var=_require_number(cfg_data.get("noise_var", 1.0), "config.noise_var"),
            p_max=_require_number(cfg_data.get("p_max", 1.0), "config.p_max"),
        )
    except ConfigurationError as exc:
        raise SpecValidationError(f"invalid config: {exc}") from None

    combos_data = data["combos"]
    if not isinstance(combos_data, list) or not all(
        isinstance(c, str) for c in combos_data
    ):
        raise SpecValidationError("combos must be a list of 'Reflect-Precode' strings")
    try:
        combos = tuple(SchemeCombo.parse(c) for c in combos_data)
    except ConfigurationError as exc:
        raise SpecValidationError(str(exc)) from None

    snr_list = data["snr_db_list"]
    if not isinstance(snr_list, list):
        raise SpecValidationError("snr_db_list must be a list of numbers")
    snrs = tuple(_require_number(v, "snr_db_list entry") for v in snr_list)

    csi_list = data.get("csi_error_vars", [0.0])
    if not isinstance(csi_list, list):
        raise SpecValidationError("csi_error_vars must be a list of numbers")
    csi = tuple(_require_number(v, "csi_error_vars entry") for v in csi_list)

    n_ris_list = None
    if "n_ris_list" in data:
        raw = data["n_ris_list"]
        if not isinstance(raw, list):
            raise SpecValidationError("n_ris_list must be a list of integers")
        n_ris_list = tuple(_require_int(v, "n_ris_list entry") for v in raw)

    oracle_grid = None
    if "oracle_grid" in data:
        grid_data = data["oracle_grid"]
        if not isinstance(grid_data, dict):
            raise SpecValidationError("oracle_grid must be a JSON object")
        _check_keys(grid_data, (), _GRID_KEYS, "oracle_grid")
        try:
            oracle_grid = GridSpec(
                phase_points=_require_int(
                    grid_data.get("phase_points", 8), "oracle_grid.phase_points"
                ),
                precoder_points=_require_int(
                    grid_data.get("precoder_points", 5), "oracle_grid.precoder_points"
                ),
                max_total=_require_int(
                    grid_data.get("max_total", int(1e8)), "oracle_grid.max_total"
                ),
            )
        except ConfigurationError as exc:
            raise SpecValidationError(f"invalid oracle_grid: {exc}") from None

    name = data["name"]
    if not isinstance(name, str):
        raise SpecValidationError("name must be a string")
    output_dir = data.get("output_dir", "results")
    if not isinstance(output_dir, str):
        raise SpecValidationError("output_dir must be a string")
    precoder_init = data.get("precoder_init", "random")
    if not isinstance(precoder_init, str):
        raise SpecValidationError("precoder_init must be a string")

    return ExperimentSpec(
        name=name,
        config=config,
        snr_db_list=snrs,
        combos=combos,
        n_channel_draws=_require_int(data["n_channel_draws"], "n_channel_draws"),
        mc_trials=_require_int(data["mc_trials"], "mc_trials"),
        csi_error_vars=csi,
        output_dir=out_override if out_override is not None else output_dir,
        master_seed=(
            seed_override
            if seed_override is not None
            else _require_int(data["master_seed"], "master_seed")
        ),
        n_ris_list=n_ris_list,
        oracle_grid=oracle_grid,
        precoder_init=precoder_init,
    )


def _derive_seed(master: int, *tags) -> int:
    seq = np.random.SeedSequence([int(master), *[int(t) for t in tags]])
    return int(seq.generate_state(1, np.uint64)[0])


def _draw_rows(spec: ExperimentSpec, draw: int) -> list:
    """All result rows for one channel draw, in (csi, combo, snr) order."""
    base = spec.config
    channel_seed = _derive_seed(spec.master_seed, draw)
    f0_seed = _derive_seed(spec.master_seed, draw, _TAG_F0)
    n_list = spec.n_ris_list if spec.n_ris_list is not None else (base.n_ris,)
    expanded = [(n, combo) for n in n_list for combo in spec.combos]

    true_ch = {
        n: gen_channels(replace(base, n_ris=n), channel_seed) for n in n_list
    }

    rows = []
    for csi_idx, err_var in enumerate(spec.csi_error_vars):
        opt_ch = {
            n: perturb_csi(
                true_ch[n],
                err_var,
                _derive_seed(spec.master_seed, draw, csi_idx, _TAG_CSI, n),
            )
            for n in n_list
        }
        for combo_idx, (n, combo) in enumerate(expanded):
            label = combo.label if spec.n_ris_list is None else f"{combo.label}[N={n}]"
            for snr_idx, snr in enumerate(spec.snr_db_list):
                cell_seed = _derive_seed(
                    spec.master_seed, draw, csi_idx, combo_idx, snr_idx, _TAG_STAGE
                )
                cfg = replace(base, n_ris=n, snr_db=float(snr), seed=cell_seed)
                symbol_set = symbol_set_for(cfg)
                phi0 = np.ones(n, dtype=complex)
                if spec.precoder_init == "eigen":
                    f0 = eigen_precoding(opt_ch[n], phi0, cfg.n_streams, cfg.p_max)
                else:
                    f0 = random_precoding(cfg.n_tx, cfg.n_streams, cfg.p_max, f0_seed)
                report = alternate(cfg, opt_ch[n], combo, phi0=phi0, f0=f0)
                bound = union_bound_ps(
                    true_ch[n],
                    report.phi_out.phases,
                    report.precoder_out.matrix,
                    symbol_set,
                    cfg.rho,
                    cfg.noise_var,
                )
                mc = simulate_ser(
                    true_ch[n],
                    report.phi_out,
                    report.precoder_out,
                    symbol_set,
                    cfg.rho,
                    cfg.noise_var,
                    spec.mc_trials,
                    _derive_seed(
                        spec.master_seed, draw, csi_idx, combo_idx, snr_idx, _TAG_MC
                    ),
                )
                rows.append(
                    ResultRow(
                        experiment=spec.name,
                        combo=label,
                        snr_db=float(snr),
                        csi_error_var=float(err_var),
                        channel_seed=channel_seed,
                        union_bound_ser=float(bound),
                        mc_ser=mc.ser_hat,
                        mc_stderr=mc.std_err,
                        outer_iterations=report.outer_iterations,
                        wall_time_s=report.wall_time,
                    )
                )
    return rows


def _collect_rows(spec: ExperimentSpec, workers: int) -> list:
    draws = range(spec.n_channel_draws)
    if workers <= 1:
        per_draw = [_draw_rows(spec, d) for d in draws]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_draw = list(pool.map(_draw_rows, [spec] * spec.n_channel_draws, draws))
    return [row for rows in per_draw for row in rows]


def resolved_defaults() -> dict:
    """Every tunable the optimizers use, for the run manifest."""
    return {
        "phi0": "all-ones",
        "f0": "precoder_init scheme, per-draw seed tag 0xF0, full power",
        "alternating": {"eps_t": EPS_T_DEFAULT, "max_outer": MAX_OUTER_DEFAULT},
        "emser": {
            "armijo_init": ARMIJO_INIT,
            "armijo_shrink": ARMIJO_SHRINK,
            "armijo_decrease": ARMIJO_DECREASE,
            "armijo_max_backtracks": ARMIJO_MAX_BACKTRACKS,
            "eps0": EPS0_DEFAULT,
            "eps1": EPS1_DEFAULT,
            "max_sweeps": MAX_SWEEPS_DEFAULT,
        },
        "vmser": asdict(VmserParams()),
        "sumdist": {"tol": SUMDIST_TOL, "max_sweeps": MAX_SWEEPS_DEFAULT},
        "mser": {"eps4": EPS4_DEFAULT, "max_iters": MSER_MAX_ITERS_DEFAULT},
        "mmed": {
            "smoothing_mu": 1.0,
            "stages": MMED_STAGES,
            "max_iters": MMED_MAX_ITERS_DEFAULT,
        },
        "mc_batch_trials": BATCH_TRIALS,
        "seed_tags": {
            "channel": "[master, draw]",
            "f0": "[master, draw, 0xF0]",
            "csi_perturb": "[master, draw, csi_idx, 0xCE, n_ris]",
            "stage_random": "[master, draw, csi_idx, combo_idx, snr_idx, 0xA1]",
            "monte_carlo": "[master, draw, csi_idx, combo_idx, snr_idx, 0x3C]",
        },
        "wall_time_s": "alternate() wall time only; excluded from determinism",
    }


def _spec_as_manifest(spec: ExperimentSpec) -> dict:
    return {
        "name": spec.name,
        "config": asdict(spec.config),
        "snr_db_list": list(spec.snr_db_list),
        "combos": [c.label for c in spec.combos],
        "n_channel_draws": spec.n_channel_draws,
        "mc_trials": spec.mc_trials,
        "csi_error_vars": list(spec.csi_error_vars),
        "output_dir": str(spec.output_dir),
        "master_seed": spec.master_seed,
        "n_ris_list": list(spec.n_ris_list) if spec.n_ris_list is not None else None,
        "oracle_grid": asdict(spec.oracle_grid) if spec.oracle_grid else None,
        "precoder_init": spec.precoder_init,
    }


def write_outputs(spec: ExperimentSpec, rows) -> str:
    """Write results.csv and manifest.json; returns the output directory."""
    out_dir = str(spec.output_dir)
    os.makedirs(out_dir, exist_ok=True)

    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.experiment,
                    r.combo,
                    repr(float(r.snr_db)),
                    repr(float(r.csi_error_var)),
                    str(int(r.channel_seed)),
                    repr(float(r.union_bound_ser)),
                    repr(float(r.mc_ser)),
                    repr(float(r.mc_stderr)),
                    str(int(r.outer_iterations)),
                    repr(float(r.wall_time_s)),
                ]
            )

    manifest = {
        "spec": _spec_as_manifest(spec),
        "resolved_defaults": resolved_defaults(),
        "result_columns": list(RESULT_COLUMNS),
        "n_rows": len(rows),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> list:
    """Run the full sweep and emit results.csv + manifest.json."""
    rows = _collect_rows(spec, workers)
    write_outputs(spec, rows)
    return rows


def run_large_n_study(spec: ExperimentSpec, workers: int = 1) -> list:
    """Sweep surface sizes; rows are labeled 'Combo[N=<n>]'."""
    if spec.n_ris_list is None:
        raise SpecValidationError("large-N study needs n_ris_list in the spec")
    return run_experiment(spec, workers=workers)
