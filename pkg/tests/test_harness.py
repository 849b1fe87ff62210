import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from nuts_engine.errors import ConfigurationError
from nuts_engine.harness import (ExperimentConfig, chain_seed, compare_samplers, load_summaries,
                                 log_spaced, model_from_spec, parse_model_spec, read_draws,
                                 read_stats, run_experiment)
from nuts_engine.model import HierarchicalLogisticModel, MvnModel, StochasticVolatilityModel


def small(tmp_path, **kw):
    base = dict(model="mvn:dim=2,seed=1", samplers=["nuts"], n_iter=200, n_adapt=100,
                seed=1, out_dir=str(tmp_path / "run"), workers=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_parse_model_spec():
    assert parse_model_spec("mvn:dim=10,seed=3") == ("mvn", {"dim": "10", "seed": "3"})
    assert parse_model_spec("normal") == ("normal", {})
    with pytest.raises(ConfigurationError):
        parse_model_spec("mvn:dim")
    with pytest.raises(ConfigurationError):
        parse_model_spec("tree:dim=2")


def test_desk_scale_defaults():
    mvn = model_from_spec("mvn")
    assert isinstance(mvn, MvnModel) and mvn.dim == 10
    assert model_from_spec("logreg").dim == 9
    hlr = model_from_spec("hlr")
    assert isinstance(hlr, HierarchicalLogisticModel) and hlr.dim == 8 + 28 + 2
    sv = model_from_spec("sv")
    assert isinstance(sv, StochasticVolatilityModel) and sv.dim == 201


def test_paper_scale_needs_credit_file():
    assert model_from_spec("sv", paper_scale=True).dim == 3001
    with pytest.raises(ConfigurationError):
        model_from_spec("logreg", paper_scale=True)


def test_lambda_grid_ratio():
    grid = log_spaced(0.1, 40.0, 10)
    ratios = np.diff(np.log(grid))
    np.testing.assert_allclose(np.exp(ratios), 40 ** (1 / 9))
    assert grid[-1] == pytest.approx(4.0)


def test_chain_seed_stable_and_distinct():
    assert chain_seed(1, 2, 3) == chain_seed(1, 2, 3)
    assert len({chain_seed(1, g, r) for g in range(5) for r in range(5)}) == 25


def test_config_invariants(tmp_path):
    with pytest.raises(ConfigurationError):
        small(tmp_path, samplers=["hmc"])
    with pytest.raises(ConfigurationError):
        small(tmp_path, lambdas=[1.0])
    with pytest.raises(ConfigurationError):
        small(tmp_path, deltas=[])
    with pytest.raises(ConfigurationError):
        small(tmp_path, samplers=["slice"])
    with pytest.raises(ConfigurationError):
        small(tmp_path, samplers=["hmc-fixed"])
    assert small(tmp_path).burn_in == 100


def test_gibbs_on_non_gaussian_rejected_before_running(tmp_path):
    with pytest.raises(ConfigurationError):
        small(tmp_path, model="sv:T=20", samplers=["gibbs"])
    assert not (tmp_path / "run").exists()


def test_grid_artifact_count(tmp_path):
    cfg = small(tmp_path, samplers=["nuts", "nuts-naive"], deltas=[0.6, 0.8], replications=3)
    summary = run_experiment(cfg)
    dirs = sorted(p.name for p in (tmp_path / "run").iterdir() if p.is_dir())
    assert len(dirs) == 12 and len(summary["chains"]) == 12
    for d in dirs:
        assert {p.name for p in (tmp_path / "run" / d).iterdir()} == {
            "draws.csv", "stats.csv", "chain.json"}
    assert not (tmp_path / "run" / "INCOMPLETE").exists()


def test_artifacts_consistent(tmp_path):
    cfg = small(tmp_path, samplers=["hmc", "rwm"], lambdas=[0.5, 1.0], deltas=[0.65])
    summary = run_experiment(cfg)
    for chain in summary["chains"]:
        folder = tmp_path / "run" / chain["name"]
        draws = read_draws(folder / "draws.csv")
        stats = read_stats(folder / "stats.csv")
        assert draws.shape == (100, 2)
        assert len(stats["iteration"]) == 200
        assert chain["total_grads"] == int(stats["grads"].sum())
        assert chain["kept_grads"] == int(stats["grads"][100:].sum())
        assert chain["ess"]["grads"] == chain["kept_grads"]
        assert chain["ess"]["ess_per_grad"] == pytest.approx(
            chain["ess"]["min_ess"] / chain["ess"]["grads"])
        if chain["sampler"] == "hmc":
            assert chain["h_discrepancy"] == pytest.approx(
                stats["accept_stat"][100:].mean() - 0.65)
            assert len(chain["step_size_avg_trace"]) == 100
    with open(tmp_path / "run" / "summary.json") as fh:
        on_disk = json.load(fh)
    assert on_disk["config"]["lambdas"] == [0.5, 1.0]
    assert "wall_time" in on_disk


def test_runs_are_byte_identical(tmp_path):
    a = run_experiment(small(tmp_path, out_dir=str(tmp_path / "a")))
    b = run_experiment(small(tmp_path, out_dir=str(tmp_path / "b")))
    for chain in a["chains"]:
        for name in ("draws.csv", "stats.csv", "chain.json"):
            assert ((tmp_path / "a" / chain["name"] / name).read_bytes()
                    == (tmp_path / "b" / chain["name"] / name).read_bytes())
    assert b["chains"][0]["seed"] == a["chains"][0]["seed"]


def test_parallel_workers_match_serial(tmp_path, monkeypatch):
    serial = run_experiment(small(tmp_path, out_dir=str(tmp_path / "s"), replications=2))
    monkeypatch.setenv("NUTS_ENGINE_WORKERS", "2")
    run_experiment(small(tmp_path, out_dir=str(tmp_path / "p"), replications=2, workers=None))
    for chain in serial["chains"]:
        assert ((tmp_path / "s" / chain["name"] / "draws.csv").read_bytes()
                == (tmp_path / "p" / chain["name"] / "draws.csv").read_bytes())


def test_reference_run_cached_for_non_gaussian(tmp_path):
    cfg = small(tmp_path, model="logreg:N=40,K=2,seed=2", n_iter=120, n_adapt=60)
    run_experiment(cfg)
    ref = json.loads((tmp_path / "run" / "reference.json").read_text())
    assert len(ref["mean"]) == 3 and "NUTS delta=0.5" in ref["mean"][0]["provenance"]


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        run_experiment(small(tmp_path, out_dir=str(blocker / "sub")))


def test_compare_table(tmp_path):
    cfg = small(tmp_path, samplers=["nuts", "hmc"], lambdas=[0.5, 1.5], deltas=[0.6])
    summary = run_experiment(cfg)
    rows = compare_samplers([summary], tmp_path / "cmp.csv")
    assert len(rows) == 3
    best = max(r["ess_per_grad"] for r in rows if r["sampler"] == "hmc")
    nuts = next(r for r in rows if r["sampler"] == "nuts")
    assert nuts["ratio_to_best_hmc"] == pytest.approx(nuts["ess_per_grad"] / best)
    assert nuts["best_hmc_ess_per_grad"] == best
    with open(tmp_path / "cmp.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 3


def test_compare_single_summary_single_row(tmp_path):
    rows = compare_samplers([run_experiment(small(tmp_path))])
    assert len(rows) == 1 and rows[0]["ratio_to_best_hmc"] is None


def test_compare_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        compare_samplers([])
    a = run_experiment(small(tmp_path, out_dir=str(tmp_path / "a")))
    b = run_experiment(small(tmp_path, out_dir=str(tmp_path / "b"), model="normal:dim=2"))
    with pytest.raises(ConfigurationError):
        compare_samplers([a, b])
    assert len(load_summaries(tmp_path / "a")) == 1


def test_toml_config(tmp_path):
    path = tmp_path / "cfg.toml"
    path.write_text('model = "normal:dim=1"\nsampler = "hmc"\ndelta = 0.7\n'
                    'lambdas = [0.5, 1.0]\nn_iter = 50\nn_adapt = 20\n'
                    f'out_dir = "{tmp_path / "t"}"\n')
    cfg = ExperimentConfig.from_toml(path)
    assert cfg.samplers == ["hmc"] and cfg.deltas == [0.7] and len(cfg.grid()) == 2
    path.write_text('model = "normal"\nsamplers = ["nuts"]\nbogus = 1\n')
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_toml(path)


# --- command line ---------------------------------------------------------------

def cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "nuts_engine", *args], capture_output=True,
                          text=True, cwd=cwd)


def test_cli_sample_and_ess(tmp_path):
    out = tmp_path / "cli"
    res = cli("sample", "--model", "mvn:dim=2,seed=1", "--sampler", "nuts", "--iters", "200",
              "--adapt", "100", "--delta", "0.6", "--seed", "3", "--out", str(out),
              "--max-depth", "8")
    assert res.returncode == 0, res.stderr
    draws = out / "nuts_g000_r00" / "draws.csv"
    assert draws.exists()
    res = cli("ess", "--draws", str(draws), "--ref", "analytic", "--model", "mvn:dim=2,seed=1")
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["min_ess"] > 0


def test_cli_fixed_step_samplers(tmp_path):
    res = cli("sample", "--model", "normal", "--sampler", "hmc-fixed", "--epsilon", "0.3",
              "--steps", "5", "--iters", "50", "--adapt", "0", "--out", str(tmp_path / "h"))
    assert res.returncode == 0, res.stderr
    res = cli("sample", "--model", "normal", "--sampler", "nuts", "--epsilon", "0.3",
              "--iters", "50", "--out", str(tmp_path / "n"))
    assert res.returncode == 0, res.stderr
    stats = read_stats(tmp_path / "n" / "nuts_g000_r00" / "stats.csv")
    assert np.all(stats["step_size"] == 0.3)


def test_cli_benchmark_and_compare(tmp_path):
    cfg = tmp_path / "bench.toml"
    cfg.write_text('model = "normal:dim=2"\nsamplers = ["nuts", "hmc"]\ndeltas = [0.6]\n'
                   'lambdas = [0.5, 1.0]\nn_iter = 120\nn_adapt = 60\nworkers = 1\n'
                   f'out_dir = "{tmp_path / "bench"}"\n')
    res = cli("benchmark", "--config", str(cfg))
    assert res.returncode == 0, res.stderr
    res = cli("compare", "--in", str(tmp_path / "bench"))
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "bench" / "comparison.csv").exists()
    assert "NUTS/best-HMC" in res.stdout


def test_cli_reports_configuration_errors(tmp_path):
    res = cli("sample", "--model", "sv:T=20", "--sampler", "gibbs", "--out", str(tmp_path / "g"))
    assert res.returncode == 2 and "gibbs" in res.stderr
    res = cli("sample", "--model", "normal", "--sampler", "hmc", "--out", str(tmp_path / "h"))
    assert res.returncode == 2 and "lambda" in res.stderr
