import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from locnoise import cli, experiment
from locnoise.errors import ValidationError
from locnoise.experiment import ExperimentConfig


def _rows_without_timing(path):
    return [{k: v for k, v in r.items() if k != "seconds"} for r in experiment.read_results(path)]


def tiny_config(**kw):
    base = dict(
        noise=[[0.0, 0.0], [0.0, 0.1]],
        n_grid=[200],
        k_grid=[2],
        delta_grid=[0.0],
        runs=2,
        draws=1,
        bandwidth=1.0,
        seed=3,
    )
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def _quantile(sorted_vals, q):
    pos = q * (len(sorted_vals) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (pos - lo) * (sorted_vals[hi] - sorted_vals[lo])


# -- config ------------------------------------------------------------------


def test_config_defaults_mirror_experiment_grid():
    c = ExperimentConfig()
    assert c.n_grid == [200, 500, 1000]
    assert c.k_grid == [1, 2, 4, 8, 16]
    assert c.delta_grid == [0.0, 0.05, 0.10, 0.20]
    assert [(n.alpha, n.beta) for n in c.noise] == [(0, 0), (0, 0.1), (0.2, 0.1), (0.3, 0.1)]
    assert c.runs == 100 and c.draws == 10


@pytest.mark.parametrize("key", ["n_grid", "k_grid", "delta_grid", "noise"])
def test_empty_grid_rejected(key):
    with pytest.raises(ValidationError) as exc:
        tiny_config(**{key: []})
    assert exc.value.field == key


def test_config_validation():
    with pytest.raises(ValidationError):
        tiny_config(runs=0)
    with pytest.raises(ValidationError):
        tiny_config(method="bayes")
    with pytest.raises(ValidationError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_config_json_roundtrip(tmp_path):
    c = tiny_config(mixture="asymmetric_xor", fit_options={"max_iterations": 20})
    c.to_json(tmp_path / "c.json")
    again = ExperimentConfig.from_json(tmp_path / "c.json")
    assert again.to_dict() == c.to_dict()
    assert again.fit_options.max_iterations == 20


def test_seed_streams_independent():
    c = tiny_config()
    a = c.anchor_seed(200, 0, 2, 0.0, 0).generate_state(2)
    assert not np.array_equal(a, c.anchor_seed(200, 1, 2, 0.0, 0).generate_state(2))
    assert not np.array_equal(a, c.anchor_seed(200, 0, 2, 0.0, 1).generate_state(2))
    assert not np.array_equal(c.data_seed(200, 0).generate_state(2), c.data_seed(500, 0).generate_state(2))


# -- simulate ----------------------------------------------------------------


def test_simulate_file_counts_and_determinism(tmp_path):
    c = tiny_config()
    m = experiment.simulate(c, tmp_path / "a")
    files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert len(files) == 4
    assert sum("clean" in f for f in files) == 2
    assert (tmp_path / "a" / "manifest.json").exists()
    assert len(m["files"]) == 4
    experiment.simulate(c, tmp_path / "b")
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()


def test_simulated_files_match_sweep_data(tmp_path):
    from locnoise.dataset import NoiseSpec, load_csv

    c = tiny_config()
    experiment.simulate(c, tmp_path)
    noisy = load_csv(tmp_path / "symmetric_xor_N200_run001_CCN_0_0.1.csv")
    assert noisy == experiment.training_dataset(c, 200, 1, NoiseSpec.ccn(0, 0.1))


# -- sweep -------------------------------------------------------------------


def test_sweep_record_count(tmp_path):
    c = tiny_config(noise=[[0.0, 0.1]], runs=3, draws=2, method="both")
    summary = experiment.sweep(c, tmp_path)
    rows = experiment.read_results(tmp_path / "results.csv")
    assert len(rows) == 12
    assert all(r["status"] == "ok" for r in rows)
    assert {r["method"] for r in rows} == {"nonparametric", "parametric"}
    assert len(summary["cells"]) == 2
    assert json.loads((tmp_path / "summary.json").read_text()) == summary


def test_summary_recomputable(tmp_path):
    c = tiny_config(noise=[[0.0, 0.1]], runs=4, draws=2, k_grid=[1, 2])
    summary = experiment.sweep(c, tmp_path)
    with open(tmp_path / "results.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    for cell in summary["cells"]:
        ps = sorted(
            float(r["p_value"]) for r in rows
            if int(r["k"]) == cell["k"] and r["method"] == cell["method"] and r["status"] == "ok"
        )
        for key, q in (("p_q1", 0.25), ("p_median", 0.5), ("p_q3", 0.75)):
            assert abs(cell[key] - _quantile(ps, q)) <= 1e-12
        assert cell["reject_05"] == sum(p <= 0.05 for p in ps) / len(ps)
        assert cell["reject_10"] == sum(p <= 0.10 for p in ps) / len(ps)


def test_sweep_resume_after_interruption(tmp_path, monkeypatch):
    c = tiny_config(runs=3)
    full_dir = tmp_path / "full"
    experiment.sweep(c, full_dir)
    expected = _rows_without_timing(full_dir / "results.csv")

    real = experiment.run_unit
    calls = {"n": 0}

    def dying(config, N, run):
        calls["n"] += 1
        if calls["n"] == 2:
            raise KeyboardInterrupt
        return real(config, N, run)

    part = tmp_path / "part"
    monkeypatch.setattr(experiment, "run_unit", dying)
    with pytest.raises(KeyboardInterrupt):
        experiment.sweep(c, part)
    monkeypatch.setattr(experiment, "run_unit", real)
    # a torn write: rows of an unfinished unit without a manifest entry
    with open(part / "results.csv", "a") as fh:
        fh.write(open(full_dir / "results.csv").read().splitlines()[-1] + "\n")
    done_before = json.loads((part / "manifest.json").read_text())["completed"]
    assert len(done_before) == 1
    experiment.sweep(c, part)
    assert _rows_without_timing(part / "results.csv") == expected
    # a second resume is a no-op
    before = (part / "results.csv").read_bytes()
    experiment.sweep(c, part)
    assert (part / "results.csv").read_bytes() == before


def test_resume_rejects_changed_config(tmp_path):
    experiment.sweep(tiny_config(runs=1), tmp_path)
    with pytest.raises(ValidationError):
        experiment.sweep(tiny_config(runs=1, seed=99), tmp_path)


def test_sweep_independent_of_worker_count(tmp_path):
    c = tiny_config(runs=3)
    experiment.sweep(c, tmp_path / "one", workers=1)
    experiment.sweep(c, tmp_path / "two", workers=2)
    assert (tmp_path / "one" / "results.csv").read_text().replace("\r", "").split("\n")[0] == ",".join(
        experiment.RESULT_COLUMNS
    )
    assert _rows_without_timing(tmp_path / "one" / "results.csv") == _rows_without_timing(
        tmp_path / "two" / "results.csv"
    )


def test_worker_env(monkeypatch):
    monkeypatch.setenv(experiment.WORKERS_ENV, "3")
    assert experiment.worker_count() == 3
    monkeypatch.setenv(experiment.WORKERS_ENV, "zero")
    assert experiment.worker_count() == 1


def test_rerun_record_bit_exact(tmp_path):
    c = tiny_config(delta_grid=[0.0, 0.1], bandwidth=None, bandwidth_grid=[0.5, 1.0], subsample=30)
    experiment.sweep(c, tmp_path)
    rows = experiment.read_results(tmp_path / "results.csv")
    for r in rows[::3]:
        rep = experiment.rerun_record(c, r)
        assert repr(rep.p_value) == r["p_value"]


def test_failures_recorded_in_row(tmp_path):
    c = tiny_config(bandwidth=0.05, method="nonparametric", runs=1)
    experiment.sweep(c, tmp_path)
    rows = experiment.read_results(tmp_path / "results.csv")
    assert len(rows) == 2
    assert all(r["status"] == "error" and r["error"] for r in rows)


# -- plot data -----------------------------------------------------------------


def _fake_rows(n_values, deltas):
    rows = []
    for N in n_values:
        for d in deltas:
            for method in ("nonparametric", "parametric"):
                rec = experiment._record(tiny_config(), N, tiny_config().noise[1], 4, d, 0, 0, method, 1.0)
                rec["p_value"] = 0.5
                rows.append(rec)
    return rows


def test_plotdata_panels(tmp_path):
    rows = _fake_rows([200, 500, 1000], [0.0, 0.05, 0.1, 0.2])
    experiment._write_rows(tmp_path / "r.csv", rows)
    n = experiment.write_plotdata(tmp_path / "r.csv", tmp_path / "p.csv")
    with open(tmp_path / "p.csv", newline="") as fh:
        out = list(csv.DictReader(fh))
    assert n == len(out) == len(rows)
    assert len({r["panel"] for r in out}) == 12


def test_plotdata_empty(tmp_path):
    experiment._write_rows(tmp_path / "r.csv", [])
    assert experiment.write_plotdata(tmp_path / "r.csv", tmp_path / "p.csv") == 0
    assert (tmp_path / "p.csv").read_text().strip() == ",".join(experiment.PLOT_COLUMNS)


def test_plotdata_unknown_column(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text(",".join(experiment.RESULT_COLUMNS + ["mystery"]) + "\n")
    with pytest.raises(ValidationError):
        experiment.write_plotdata(p, tmp_path / "p.csv")
    assert cli.main(["plotdata", str(p), "--output", str(tmp_path / "p.csv")]) == 2


# -- CLI -----------------------------------------------------------------------


@pytest.fixture
def data_files(tmp_path):
    from locnoise.anchors import draw_anchors
    from locnoise.dataset import NoiseSpec, gen_mixture, inject_noise, save_csv, symmetric_xor

    ds = inject_noise(gen_mixture(symmetric_xor(), 500, 1), NoiseSpec.ccn(0, 0.1), 2)
    save_csv(ds, tmp_path / "d.csv")
    draw_anchors(symmetric_xor(), (-4, 4), 0.0, 4, 3).to_csv(tmp_path / "a.csv")
    return tmp_path


def test_cli_test_command(data_files, capsys):
    out = data_files / "r.json"
    rc = cli.main(["test", str(data_files / "d.csv"), str(data_files / "a.csv"),
                   "--bandwidth", "1.0", "--threshold", "0.05", "--output", str(out)])
    assert rc == 0
    rep = json.loads(out.read_text())
    assert rep["k"] == 4 and 0 <= rep["p_value"] <= 1
    line = capsys.readouterr().out.strip()
    assert line.startswith("reject" if rep["p_value"] <= 0.05 else "fail-to-reject")


def test_cli_test_grid_parametric_and_flags(data_files, capsys):
    rc = cli.main(["test", str(data_files / "d.csv"), str(data_files / "a.csv"),
                   "--bandwidth-grid", "0.5,1.0", "--subsample", "40", "--standardize"])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["metadata"]["bandwidth_selection"]["h"] in (0.5, 1.0)
    assert rep["metadata"]["standardized"] is True
    rc = cli.main(["test", str(data_files / "d.csv"), str(data_files / "a.csv"), "--method", "parametric",
                   "--delta", "0.1", "--variance-convention", "recomputed"])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["method"] == "parametric" and rep["anchor_kind"] == "relaxed"
    assert rep["convention"] == "recomputed"


def test_cli_missing_anchor_file(data_files, capsys):
    rc = cli.main(["test", str(data_files / "d.csv"), str(data_files / "missing.csv"), "--bandwidth", "1"])
    assert rc == 2
    assert "anchor file not found" in capsys.readouterr().err


def test_cli_statistical_failure(data_files, capsys):
    far = data_files / "far.csv"
    far.write_text("x1,x2\n40,40\n")
    rc = cli.main(["test", str(data_files / "d.csv"), str(far), "--bandwidth", "0.1"])
    assert rc == 1
    diag = json.loads(capsys.readouterr().err)
    assert diag["error"] == "AnchorFitError" and diag["anchor_index"] == 0


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main([]) == 2
    assert cli.main(["sweep", "--output-dir", str(tmp_path), "--n-grid", ""]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text('{"runs": 1, "unknown": 2}')
    assert cli.main(["simulate", "--config", str(cfg), "--output-dir", str(tmp_path / "o")]) == 2
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.json"), "--output-dir", str(tmp_path)]) == 2


def test_cli_bandwidth_and_anchors(data_files, capsys):
    assert cli.main(["bandwidth", str(data_files / "d.csv"), "--bandwidth-grid", "0.5,1,2", "--subsample", "30"]) == 0
    sel = json.loads(capsys.readouterr().out)
    assert sel["h"] in (0.5, 1.0, 2.0) and len(sel["scores"]) == 3
    out = data_files / "an.json"
    assert cli.main(["anchors", "-k", "3", "--delta", "0.1", "--seed", "1", "--output", str(out)]) == 0
    assert len(json.loads(out.read_text())["points"]) == 3


def test_cli_simulate_sweep_plotdata(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    tiny_config(runs=1).to_json(cfg)
    assert cli.main(["simulate", "--config", str(cfg), "--output-dir", str(tmp_path / "sim")]) == 0
    assert cli.main(["sweep", "--config", str(cfg), "--output-dir", str(tmp_path / "sw"), "--draws", "2"]) == 0
    assert cli.main(["plotdata", str(tmp_path / "sw" / "results.csv"), "--output", str(tmp_path / "p.csv")]) == 0
    rows = experiment.read_results(tmp_path / "sw" / "results.csv")
    assert len(rows) == 2 * 2 * 2  # noise x draws x methods


def test_help_lists_flags():
    out = subprocess.run([sys.executable, "-m", "locnoise", "test", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for flag in ("--threshold", "--standardize", "--variance-convention", "--bandwidth-grid", "--mode", "--method"):
        assert flag in out.stdout
    top = subprocess.run([sys.executable, "-m", "locnoise", "--help"], capture_output=True, text=True)
    for sub in ("simulate", "test", "sweep", "plotdata", "bandwidth"):
        assert sub in top.stdout


# -- real-data runs ------------------------------------------------------------------


@pytest.fixture
def real_data(tmp_path):
    from locnoise.anchors import draw_anchors
    from locnoise.dataset import gen_mixture, save_csv, symmetric_xor

    save_csv(gen_mixture(symmetric_xor(), 600, 11), tmp_path / "real.csv")
    draw_anchors(symmetric_xor(), (-4, 4), 0.0, 6, 12).to_csv(tmp_path / "pool.csv")
    return tmp_path


def test_input_csv_needs_anchor_source(real_data):
    with pytest.raises(ValidationError) as exc:
        ExperimentConfig.from_dict({"input_csv": str(real_data / "real.csv")})
    assert exc.value.field == "anchors_file"


def test_input_csv_sweep_with_anchor_pool(real_data):
    from locnoise.dataset import load_csv

    c = ExperimentConfig.from_dict(dict(
        input_csv=str(real_data / "real.csv"), anchors_file=str(real_data / "pool.csv"),
        noise=[[0.0, 0.1]], n_grid=[300], k_grid=[2, 6], delta_grid=[0.0, 0.1],
        runs=2, draws=2, bandwidth=1.0, method="nonparametric",
    ))
    assert c.mixture is None and c.dataset_name == "real"
    full = load_csv(real_data / "real.csv")
    sub = experiment.clean_dataset(c, 300, 0)
    assert sub.n == 300
    rows = {tuple(r) for r in np.column_stack([full.instances, full.labels])}
    assert all(tuple(r) in rows for r in np.column_stack([sub.instances, sub.labels]))
    a = experiment.anchors_for(c, 300, 0, 2, 0.0, 1)
    pool = experiment._load_anchor_pool(str(real_data / "pool.csv"))
    assert a.k == 2 and all(any(np.array_equal(p, q) for q in pool.points) for p in a.points)
    assert experiment.anchors_for(c, 300, 0, 2, 0.1, 1).kind == "relaxed"
    experiment.sweep(c, real_data / "out")
    out = experiment.read_results(real_data / "out" / "results.csv")
    assert len(out) == 2 * 2 * 2 * 2
    assert all(r["status"] == "ok" and r["dataset"] == "real" for r in out)
    for r in out[::5]:
        assert repr(experiment.rerun_record(c, r).p_value) == r["p_value"]


def test_anchor_pool_too_small(real_data):
    c = ExperimentConfig.from_dict(dict(
        input_csv=str(real_data / "real.csv"), anchors_file=str(real_data / "pool.csv"),
        noise=[[0.0, 0.0]], n_grid=[300], k_grid=[8], delta_grid=[0.0], runs=1, draws=1, bandwidth=1.0,
    ))
    with pytest.raises(ValidationError):
        experiment.anchors_for(c, 300, 0, 8, 0.0, 0)


def test_cli_sweep_on_csv(real_data, capsys):
    rc = cli.main(["sweep", "--input-csv", str(real_data / "real.csv"), "--anchors-file", str(real_data / "pool.csv"),
                   "--noise", "0:0.1", "--n-grid", "200", "--k-grid", "4", "--delta-grid", "0",
                   "--runs", "1", "--draws", "1", "--bandwidth", "1", "--method", "nonparametric",
                   "--output-dir", str(real_data / "o")])
    assert rc == 0
    assert len(experiment.read_results(real_data / "o" / "results.csv")) == 1
