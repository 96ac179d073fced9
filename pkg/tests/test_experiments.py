import csv
import json

import numpy as np
import pytest

from risopt.alternating import SchemeCombo
from risopt.cli import main
from risopt.errors import SpecValidationError
from risopt.experiments import (
    RESULT_COLUMNS,
    ExperimentSpec,
    load_spec,
    resolved_defaults,
    run_experiment,
    run_large_n_study,
)
from risopt.model import SystemConfig


def small_config(**overrides):
    fields = dict(n_rx=2, n_ris=2, n_tx=2, n_streams=1, mod_order=2)
    fields.update(overrides)
    return SystemConfig(**fields)


def small_spec(tmp_path, **overrides):
    fields = dict(
        name="unit",
        config=small_config(),
        snr_db_list=(4.0,),
        combos=(SchemeCombo.parse("Fixed-Fixed"),),
        n_channel_draws=1,
        mc_trials=2000,
        output_dir=str(tmp_path / "out"),
        master_seed=7,
    )
    fields.update(overrides)
    return ExperimentSpec(**fields)


def spec_json(tmp_path, **overrides):
    data = {
        "name": "unit",
        "config": {"n_rx": 2, "n_ris": 2, "n_tx": 2, "n_streams": 1, "mod_order": 2},
        "snr_db_list": [4.0],
        "combos": ["Fixed-Fixed"],
        "n_channel_draws": 1,
        "mc_trials": 2000,
        "output_dir": str(tmp_path / "out"),
        "master_seed": 7,
    }
    data.update(overrides)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def read_rows(out_dir):
    with open(str(out_dir) + "/results.csv", newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# --- ExperimentSpec validation ---


@pytest.mark.parametrize(
    "overrides",
    [
        {"name": ""},
        {"snr_db_list": ()},
        {"combos": ()},
        {"n_channel_draws": 0},
        {"mc_trials": 0},
        {"csi_error_vars": ()},
        {"csi_error_vars": (-0.1,)},
        {"precoder_init": "zeros"},
        {"n_ris_list": ()},
        {"n_ris_list": (0,)},
    ],
)
def test_spec_validation_rejects(tmp_path, overrides):
    with pytest.raises(SpecValidationError):
        small_spec(tmp_path, **overrides)


# --- load_spec ---


def test_load_spec_round_trip(tmp_path):
    path = spec_json(tmp_path, csi_error_vars=[0.0, 0.1], precoder_init="eigen")
    spec = load_spec(path)
    assert spec.name == "unit"
    assert spec.config.n_ris == 2
    assert spec.snr_db_list == (4.0,)
    assert spec.combos[0].label == "Fixed-Fixed"
    assert spec.csi_error_vars == (0.0, 0.1)
    assert spec.precoder_init == "eigen"
    assert spec.master_seed == 7


def test_load_spec_overrides(tmp_path):
    path = spec_json(tmp_path)
    spec = load_spec(path, out_override=str(tmp_path / "elsewhere"), seed_override=99)
    assert spec.output_dir == str(tmp_path / "elsewhere")
    assert spec.master_seed == 99


def test_load_spec_rejects_unknown_top_key(tmp_path):
    path = spec_json(tmp_path, snr_list=[1.0])
    with pytest.raises(SpecValidationError, match="unknown keys.*snr_list"):
        load_spec(path)


def test_load_spec_rejects_missing_key(tmp_path):
    data = json.loads(open(spec_json(tmp_path), encoding="utf-8").read())
    del data["mc_trials"]
    path = tmp_path / "missing.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(SpecValidationError, match="missing keys.*mc_trials"):
        load_spec(str(path))


def test_load_spec_rejects_unknown_config_key(tmp_path):
    path = spec_json(
        tmp_path,
        config={
            "n_rx": 2,
            "n_ris": 2,
            "n_tx": 2,
            "n_streams": 1,
            "mod_order": 2,
            "snr_db": 4.0,
        },
    )
    with pytest.raises(SpecValidationError, match="unknown keys.*snr_db"):
        load_spec(path)


def test_load_spec_rejects_bool_as_int(tmp_path):
    path = spec_json(tmp_path, n_channel_draws=True)
    with pytest.raises(SpecValidationError, match="n_channel_draws"):
        load_spec(path)


def test_load_spec_rejects_bad_combo(tmp_path):
    path = spec_json(tmp_path, combos=["Fixed-Nonsense"])
    with pytest.raises(SpecValidationError, match="precode"):
        load_spec(path)


def test_load_spec_rejects_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(SpecValidationError, match="not valid JSON"):
        load_spec(str(path))


def test_load_spec_rejects_missing_file(tmp_path):
    with pytest.raises(SpecValidationError, match="cannot read"):
        load_spec(str(tmp_path / "nope.json"))


def test_load_spec_parses_oracle_grid(tmp_path):
    path = spec_json(tmp_path, oracle_grid={"phase_points": 16, "precoder_points": 7})
    spec = load_spec(path)
    assert spec.oracle_grid.phase_points == 16
    assert spec.oracle_grid.precoder_points == 7


# --- run_experiment ---


def test_trivial_run_produces_one_row(tmp_path):
    spec = small_spec(tmp_path)
    rows = run_experiment(spec)
    assert len(rows) == 1
    data = read_rows(spec.output_dir)
    assert data[0] == list(RESULT_COLUMNS)
    assert len(data) == 2
    row = dict(zip(data[0], data[1]))
    assert row["experiment"] == "unit"
    assert row["combo"] == "Fixed-Fixed"
    assert float(row["snr_db"]) == 4.0
    assert row["outer_iterations"] == "0"
    assert np.isfinite(float(row["union_bound_ser"]))
    assert np.isfinite(float(row["mc_ser"]))


def test_rerun_identical_except_wall_time(tmp_path):
    spec1 = small_spec(
        tmp_path,
        combos=(SchemeCombo.parse("eMSER-MSER"), SchemeCombo.parse("Random-Random")),
        snr_db_list=(0.0, 8.0),
        n_channel_draws=2,
        output_dir=str(tmp_path / "a"),
    )
    spec2 = small_spec(
        tmp_path,
        combos=(SchemeCombo.parse("eMSER-MSER"), SchemeCombo.parse("Random-Random")),
        snr_db_list=(0.0, 8.0),
        n_channel_draws=2,
        output_dir=str(tmp_path / "b"),
    )
    run_experiment(spec1)
    run_experiment(spec2)
    rows_a = read_rows(spec1.output_dir)
    rows_b = read_rows(spec2.output_dir)
    wall_col = RESULT_COLUMNS.index("wall_time_s")
    for ra, rb in zip(rows_a, rows_b):
        assert ra[:wall_col] == rb[:wall_col]


def test_worker_pool_matches_serial(tmp_path):
    kwargs = dict(
        combos=(SchemeCombo.parse("eMSER-MSER"),),
        snr_db_list=(4.0,),
        n_channel_draws=3,
    )
    spec_serial = small_spec(tmp_path, output_dir=str(tmp_path / "serial"), **kwargs)
    spec_pool = small_spec(tmp_path, output_dir=str(tmp_path / "pool"), **kwargs)
    rows_serial = run_experiment(spec_serial, workers=1)
    rows_pool = run_experiment(spec_pool, workers=2)
    for a, b in zip(rows_serial, rows_pool):
        assert a.union_bound_ser == b.union_bound_ser
        assert a.mc_ser == b.mc_ser
        assert a.channel_seed == b.channel_seed


def test_row_order_and_csi_sweep(tmp_path):
    spec = small_spec(
        tmp_path,
        combos=(SchemeCombo.parse("Fixed-Fixed"), SchemeCombo.parse("Random-Random")),
        snr_db_list=(0.0, 4.0),
        csi_error_vars=(0.0, 0.1),
        n_channel_draws=2,
    )
    rows = run_experiment(spec)
    assert len(rows) == 2 * 2 * 2 * 2
    # (draw, csi, combo, snr) nesting, snr fastest
    expect = []
    for _draw in range(2):
        for err in (0.0, 0.1):
            for combo in ("Fixed-Fixed", "Random-Random"):
                for snr in (0.0, 4.0):
                    expect.append((err, combo, snr))
    got = [(r.csi_error_var, r.combo, r.snr_db) for r in rows]
    assert got == expect


def test_rows_satisfy_bound_consistency(tmp_path):
    spec = small_spec(
        tmp_path,
        config=small_config(mod_order=4),
        combos=(SchemeCombo.parse("eMSER-MSER"), SchemeCombo.parse("Random-Random")),
        snr_db_list=(8.0,),
        n_channel_draws=2,
        mc_trials=20000,
    )
    for row in run_experiment(spec):
        assert row.mc_ser <= row.union_bound_ser + 3 * row.mc_stderr


# --- large-N study ---


def test_large_n_labels_and_row_count(tmp_path):
    spec = small_spec(
        tmp_path,
        combos=(SchemeCombo.parse("Fixed-Fixed"),),
        n_ris_list=(2, 3),
    )
    rows = run_large_n_study(spec)
    assert [r.combo for r in rows] == ["Fixed-Fixed[N=2]", "Fixed-Fixed[N=3]"]


def test_large_n_requires_n_ris_list(tmp_path):
    spec = small_spec(tmp_path)
    with pytest.raises(SpecValidationError, match="n_ris_list"):
        run_large_n_study(spec)


# --- manifest ---


def test_manifest_captures_spec_and_defaults(tmp_path):
    spec = small_spec(tmp_path)
    run_experiment(spec)
    with open(str(spec.output_dir) + "/manifest.json", encoding="utf-8") as fh:
        manifest = json.load(fh)
    assert manifest["spec"]["name"] == "unit"
    assert manifest["spec"]["master_seed"] == 7
    assert manifest["spec"]["mc_trials"] == 2000
    assert manifest["result_columns"] == list(RESULT_COLUMNS)
    assert manifest["n_rows"] == 1
    defaults = manifest["resolved_defaults"]
    for key in (
        "alternating",
        "emser",
        "vmser",
        "sumdist",
        "mser",
        "mmed",
        "mc_batch_trials",
        "seed_tags",
        "phi0",
        "f0",
    ):
        assert key in defaults
    assert defaults == resolved_defaults()


# --- CLI ---


def test_cli_run_success(tmp_path, capsys):
    path = spec_json(tmp_path)
    out = tmp_path / "cli_out"
    assert main(["run", "--spec", path, "--out", str(out)]) == 0
    assert (out / "results.csv").exists()
    assert (out / "manifest.json").exists()
    assert "wrote 1 rows" in capsys.readouterr().out


def test_cli_run_bad_spec_exits_2(tmp_path, capsys):
    path = spec_json(tmp_path, combos=["Fixed-Nonsense"])
    assert main(["run", "--spec", path]) == 2
    assert "spec error" in capsys.readouterr().err


def test_cli_run_missing_spec_exits_2(tmp_path, capsys):
    assert main(["run", "--spec", str(tmp_path / "absent.json")]) == 2
    assert "spec error" in capsys.readouterr().err


def test_cli_oracle_capacity_exits_3(tmp_path, capsys):
    path = spec_json(
        tmp_path,
        config={
            "n_rx": 1,
            "n_ris": 20,
            "n_tx": 2,
            "n_streams": 1,
            "mod_order": 2,
        },
    )
    assert main(["oracle", "--spec", path]) == 3
    assert "capacity error" in capsys.readouterr().err


def test_cli_oracle_success(tmp_path, capsys):
    path = spec_json(
        tmp_path,
        config={"n_rx": 1, "n_ris": 2, "n_tx": 2, "n_streams": 1, "mod_order": 2},
        combos=["Fixed-Fixed"],
        snr_db_list=[0.0],
        oracle_grid={"phase_points": 4, "precoder_points": 3},
    )
    assert main(["oracle", "--spec", path]) == 0
    out = capsys.readouterr().out
    assert "es_joint=" in out
    assert "Fixed-Fixed=" in out


def test_cli_quantize_study_success(capsys):
    assert main(["quantize-study", "--bits", "2", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "bits=1" in out
    assert "bits=2" in out


def test_cli_quantize_study_rejects_bad_bits(capsys):
    assert main(["quantize-study", "--bits", "0"]) == 2
