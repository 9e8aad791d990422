import csv
import json
import os

import numpy as np
import pytest

from spectral_lab.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, instance_specs, load_config, main
from spectral_lab.ensembles import SparsePauliSum, sample_pauli_string_ensemble
from spectral_lab.errors import ConfigError
from spectral_lab.models import EnsembleSpec, ExperimentConfig
from spectral_lab.persistence import MANIFEST_NAME, load_instance, read_json, save_instance


def write_config(directory, payload, name="run.json"):
    path = os.path.join(str(directory), name)
    with open(path, "w") as f:
        json.dump(payload, f)
    return path


def run_cli(subcommand, config_path, *extra):
    return main([subcommand, "--config", config_path, *extra])


def single_run_dir(root):
    names = [name for name in os.listdir(root) if not name.startswith(".")]
    assert len(names) == 1, f"expected one run directory, found {names}"
    return os.path.join(root, names[0])


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


# --- Config handling ---

def test_missing_config_file_exits_with_config_error(tmp_path):
    assert run_cli("sample", str(tmp_path / "absent.json")) == EXIT_CONFIG, "missing file"


def test_missing_seed_exits_with_config_error(tmp_path):
    path = write_config(tmp_path, {"ensemble": {"variant": "gue", "N": 4}})
    assert run_cli("sample", path, "--out", str(tmp_path / "out")) == EXIT_CONFIG, "seed has no default"
    assert not os.path.exists(tmp_path / "out"), "nothing written for an invalid config"


def test_command_line_overrides(tmp_path):
    path = write_config(tmp_path, {"seed": 1, "threads": 1})
    config = load_config(path, seed=9, out="elsewhere", threads=4)
    assert (config.seed, config.output_dir, config.threads) == (9, "elsewhere", 4), "overrides applied"
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "list.json"))


def test_instance_seeding_rule():
    fixed = ExperimentConfig(seed=5, ensemble=EnsembleSpec(variant="pauli", n=2, m=3, seed=11))
    assert [s.seed for s in instance_specs(fixed)] == [11], "a fixed seed is used for a single instance"
    derived = ExperimentConfig(seed=5, trials=3, ensemble=EnsembleSpec(variant="pauli", n=2, m=3, seed=11))
    seeds = [s.seed for s in instance_specs(derived)]
    assert len(set(seeds)) == 3 and 11 not in seeds, "multiple instances derive their seeds from the master"


# --- Subcommands ---

def test_sample_is_reproducible(tmp_path):
    out = tmp_path / "out"
    path = write_config(tmp_path, {"experiment": "pauli", "seed": 1,
                                   "ensemble": {"variant": "pauli", "n": 4, "m": 10, "seed": 7}})
    assert run_cli("sample", path, "--out", str(out)) == EXIT_OK
    run_dir = single_run_dir(out)
    first = read_bytes(os.path.join(run_dir, "instance-000.json"))
    assert run_cli("sample", path, "--out", str(out)) == EXIT_OK
    assert read_bytes(os.path.join(run_dir, "instance-000.json")) == first, "byte-identical instance files"

    loaded, _ = load_instance(os.path.join(run_dir, "instance-000.json"))
    assert np.array_equal(loaded.to_dense(), sample_pauli_string_ensemble(4, 10, seed=7).to_dense()), "seed 7 instance"
    manifest = read_json(os.path.join(run_dir, MANIFEST_NAME))
    assert {e["name"] for e in manifest["outputs"]} == {"instance-000.json", "instances.csv"}, "manifest lists outputs"


def test_sample_gue_file_parses_back_hermitian(tmp_path, capsys):
    out = tmp_path / "out"
    path = write_config(tmp_path, {"seed": 3, "ensemble": {"variant": "gue", "N": 8}})
    assert run_cli("sample", path, "--out", str(out)) == EXIT_OK
    run_dir = capsys.readouterr().out.strip()
    assert run_dir == single_run_dir(out), "the run directory is printed"
    h, header = load_instance(os.path.join(run_dir, "instance-000.json"))
    assert header["N"] == 8 and np.array_equal(h.matrix, h.matrix.conj().T), "Hermitian GUE payload"


def test_pnorm_of_identity_instance(tmp_path):
    save_instance(SparsePauliSum.from_text([(1.0, "II")]), str(tmp_path), "identity")
    path = write_config(tmp_path, {"seed": 0, "instance_path": str(tmp_path / "identity.json"), "p_grid": [4]})
    assert run_cli("pnorm", path, "--out", str(tmp_path / "out")) == EXIT_OK
    rows = read_rows(os.path.join(single_run_dir(tmp_path / "out"), "pnorm.csv"))
    assert [(r["instance"], r["p"], float(r["value"])) for r in rows] == [("identity", "4", 1.0)], "|||I|||_4 = 1"


def test_bound_table(tmp_path):
    path = write_config(tmp_path, {"seed": 0, "n": 20, "m_grid": [10000], "epsilon": 0.25,
                                   "params": {"t_grid": [0.1, 0.5]}})
    assert run_cli("bound", path, "--out", str(tmp_path / "out")) == EXIT_OK
    run_dir = single_run_dir(tmp_path / "out")
    row, = read_rows(os.path.join(run_dir, "bound.csv"))
    assert float(row["g_threshold"]) == pytest.approx(2.71, abs=0.01) and row["valid"] == "true", "G at eps=1/4"
    assert row["units"] == "normalized", "units column"
    assert len(read_rows(os.path.join(run_dir, "bernstein.csv"))) == 2, "one tail row per t"


def test_dos_histogram_mass(tmp_path):
    path = write_config(tmp_path, {"seed": 2, "trials": 3, "ensemble": {"variant": "gue", "N": 200},
                                   "epsilon": 0.2, "p_grid": [4], "omega_grid": [0.0], "eta_grid": [0.5]})
    assert run_cli("dos", path, "--out", str(tmp_path / "out")) == EXIT_OK
    run_dir = single_run_dir(tmp_path / "out")
    summary = read_json(os.path.join(run_dir, "summary.json"))
    assert summary["mass_in_support"] >= 0.99 and summary["instances"] == 3, "GUE mass inside [-2, 2]"
    assert len(read_rows(os.path.join(run_dir, "histogram.csv"))) == 80, "default bin count"
    assert len(read_rows(os.path.join(run_dir, "dos_proxy.csv"))) == 3, "one proxy row per instance"


def test_results_do_not_depend_on_thread_count(tmp_path):
    path = write_config(tmp_path, {"seed": 4, "n": 4, "p_grid": [4], "m_grid": [4, 16], "trials": 8,
                                   "params": {"kind": "moments"}})
    outputs = []
    for threads in ("1", "4", "16"):
        assert run_cli("universality", path, "--out", str(tmp_path / "out"), "--threads", threads) == EXIT_OK
        outputs.append(read_bytes(os.path.join(single_run_dir(tmp_path / "out"), "moments.csv")))
    assert outputs[0] == outputs[1] == outputs[2], "identical CSV bytes for 1, 4 and 16 threads"


def test_moment_matching_table(tmp_path):
    path = write_config(tmp_path, {"seed": 0, "ensemble": {"variant": "complex_signed_perm_sum", "N": 3, "m": 1},
                                   "params": {"kind": "matching", "k": [1, 2]}})
    assert run_cli("universality", path, "--out", str(tmp_path / "out")) == EXIT_OK
    rows = read_rows(os.path.join(single_run_dir(tmp_path / "out"), "matching.csv"))
    assert [int(r["k"]) for r in rows] == [1, 2] and all(float(r["deviation"]) <= 1e-12 for r in rows)


def test_qpe_and_witness_runs(tmp_path):
    ensemble = {"variant": "pauli", "n": 4, "m": 30}
    qpe = write_config(tmp_path, {"experiment": "qpe", "seed": 6, "trials": 2, "ensemble": ensemble,
                                  "epsilon": 0.2, "params": {"shots": 200}}, "qpe.json")
    witness = write_config(tmp_path, {"experiment": "witness", "seed": 6, "ensemble": ensemble, "epsilon": 0.3,
                                      "params": {"baseline": True, "restarts": 2}}, "witness.json")
    assert run_cli("qpe", qpe, "--out", str(tmp_path / "qpe")) == EXIT_OK
    assert run_cli("witness", witness, "--out", str(tmp_path / "witness")) == EXIT_OK
    qpe_rows = read_rows(os.path.join(single_run_dir(tmp_path / "qpe"), "qpe.csv"))
    assert len(qpe_rows) == 2 and all(int(r["shots"]) == 200 for r in qpe_rows), "one row per instance"
    row, = read_rows(os.path.join(single_run_dir(tmp_path / "witness"), "witness.csv"))
    assert float(row["trace_error"]) <= 1e-8 and row["baseline_energy"], "witness and baseline reported"


def test_numeric_failure_exits_with_code_three(tmp_path):
    path = write_config(tmp_path, {"seed": 0, "ensemble": {"variant": "pauli", "n": 8, "m": 300, "seed": 21},
                                   "params": {"norm_estimate": True, "lanczos_max_iters": 2}})
    assert run_cli("spectrum", path, "--out", str(tmp_path / "out")) == EXIT_NUMERIC
    assert os.listdir(tmp_path / "out") == [], "failed run leaves no directory"


def test_subcommands_on_one_config_keep_separate_runs(tmp_path):
    out = tmp_path / "out"
    path = write_config(tmp_path, {"experiment": "shared", "seed": 5, "p_grid": [4],
                                   "ensemble": {"variant": "pauli", "n": 4, "m": 10}})
    assert run_cli("spectrum", path, "--out", str(out)) == EXIT_OK
    assert run_cli("pnorm", path, "--out", str(out)) == EXIT_OK
    names = sorted(name for name in os.listdir(out) if not name.startswith("."))
    assert len(names) == 2 and names[0].startswith("shared-pnorm-") and names[1].startswith("shared-spectrum-")
    assert os.path.exists(os.path.join(out, names[1], "summary.json")), "spectrum outputs survive the pnorm run"
    assert len(read_rows(os.path.join(out, names[0], "pnorm.csv"))) == 1, "one pnorm row"
