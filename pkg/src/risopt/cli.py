"""Command-line entry points.

Exit codes: 0 success, 2 spec validation failure, 3 grid capacity exceeded.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .alternating import SchemeCombo, alternate
from .errors import CapacityError, SpecValidationError
from .experiments import load_spec, run_experiment
from .metrics import union_bound_ps
from .model import SystemConfig, gen_channels, symbol_set_for
from .oracle import GridSpec, es_joint
from .reflecting import quantize_phases


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risopt",
        description=(
            "Joint reflecting-surface and precoder optimization experiments "
            "for finite-alphabet MIMO links."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment sweep from a JSON spec")
    p_run.add_argument("--spec", required=True, help="path to the JSON spec file")
    p_run.add_argument("--out", help="override the spec's output_dir")
    p_run.add_argument("--seed", type=int, help="override the spec's master_seed")
    p_run.add_argument(
        "--workers", type=int, default=1, help="parallel channel-draw workers"
    )

    p_oracle = sub.add_parser(
        "oracle",
        help="compare each combo against the exhaustive-search optimum (tiny systems)",
    )
    p_oracle.add_argument("--spec", required=True, help="path to the JSON spec file")

    p_quant = sub.add_parser(
        "quantize-study",
        help="phase-quantization sweep on a small built-in system (1..B bits)",
    )
    p_quant.add_argument("--bits", type=int, required=True, help="max bits per phase")
    p_quant.add_argument("--seed", type=int, default=0, help="master seed")
    return parser


def _cmd_run(args) -> None:
    spec = load_spec(args.spec, out_override=args.out, seed_override=args.seed)
    rows = run_experiment(spec, workers=args.workers)
    print(
        f"wrote {len(rows)} rows to {os.path.join(str(spec.output_dir), 'results.csv')}"
    )


def _cmd_oracle(args) -> None:
    spec = load_spec(args.spec)
    grid = spec.oracle_grid if spec.oracle_grid is not None else GridSpec()
    base = spec.config
    channel_seed = int(np.random.SeedSequence([spec.master_seed, 0]).generate_state(1)[0])
    channels = gen_channels(base, channel_seed)
    print(
        f"oracle comparison on draw 0 (channel_seed={channel_seed}), grid "
        f"phase_points={grid.phase_points} precoder_points={grid.precoder_points}"
    )
    for snr in spec.snr_db_list:
        cfg = replace(base, snr_db=float(snr))
        symbol_set = symbol_set_for(cfg)
        _, _, ps_es = es_joint(cfg, channels, symbol_set, grid)
        print(f"snr_db={snr:g} es_joint={ps_es:.6e}")
        for combo in spec.combos:
            report = alternate(cfg, channels, combo)
            bound = union_bound_ps(
                channels,
                report.phi_out.phases,
                report.precoder_out.matrix,
                symbol_set,
                cfg.rho,
                cfg.noise_var,
            )
            ratio = bound / ps_es if ps_es > 0 else float("inf")
            print(f"snr_db={snr:g} {combo.label}={bound:.6e} ratio={ratio:.4f}")


def _cmd_quantize(args) -> None:
    if args.bits < 1 or args.bits > 24:
        raise SpecValidationError("--bits must be in 1..24")
    # 0 dB keeps the optimized bound in a readable range; at high SNR the
    # continuous optimum underflows and the ratios stop meaning anything
    config = SystemConfig(
        n_rx=2, n_ris=8, n_tx=2, n_streams=1, mod_order=4, snr_db=0.0
    )
    combo = SchemeCombo.parse("vMSER-MSER")
    n_draws = 5
    print(
        f"phase-quantization sweep: (n_rx,n_ris,n_tx,n_streams,M)="
        f"(2,8,2,1,4-PSK), 0 dB, {n_draws} draws"
    )
    quantized = {b: [] for b in range(1, args.bits + 1)}
    continuous = []
    for draw in range(n_draws):
        channel_seed = int(
            np.random.SeedSequence([args.seed, draw]).generate_state(1)[0]
        )
        cfg = replace(config, seed=channel_seed)
        channels = gen_channels(cfg, channel_seed)
        symbol_set = symbol_set_for(cfg)
        report = alternate(cfg, channels, combo)
        f_mat = report.precoder_out.matrix
        continuous.append(
            union_bound_ps(
                channels, report.phi_out.phases, f_mat, symbol_set, cfg.rho, cfg.noise_var
            )
        )
        for bits in range(1, args.bits + 1):
            phi_q = quantize_phases(report.phi_out.phases, bits)
            quantized[bits].append(
                union_bound_ps(
                    channels, phi_q.phases, f_mat, symbol_set, cfg.rho, cfg.noise_var
                )
            )
    mean_cont = float(np.mean(continuous))
    print(f"continuous mean_union_bound={mean_cont:.6e}")
    for bits in range(1, args.bits + 1):
        mean_q = float(np.mean(quantized[bits]))
        ratio = mean_q / mean_cont if mean_cont > 0 else float("inf")
        print(
            f"bits={bits} mean_union_bound={mean_q:.6e} ratio_vs_continuous={ratio:.4f}"
        )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            _cmd_run(args)
        elif args.command == "oracle":
            _cmd_oracle(args)
        else:
            _cmd_quantize(args)
    except SpecValidationError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
