"""Experiment grids: run samplers over (delta, lambda) grids, persist draws and summaries."""
from __future__ import annotations

import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .baselines import RwmConfig, gibbs_mvn_run, rwm_run, rwm_tune_scale
from .datasets import load_dataset
from .diagnostics import (ReferenceMoments, ess_report, gaussian_reference, h_discrepancy,
                          reference_from_draws, trajectory_histogram)
from .errors import ConfigurationError
from .hamiltonian import RngStream
from .hmc import HmcConfig, hmc_run
from .model import MvnModel, build_target
from .nuts import NutsConfig, nuts_run

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

SAMPLERS = ("hmc", "hmc-fixed", "nuts", "nuts-naive", "rwm", "gibbs")
WORKERS_ENV = "NUTS_ENGINE_WORKERS"
REFERENCE_SEED_KEY = 2**31 - 1
INCOMPLETE_MARKER = "INCOMPLETE"

DESK_DEFAULTS = {
    "mvn": {"dim": 10, "seed": 1},
    "logreg": {"N": 200, "K": 8, "seed": 1},
    "hlr": {"N": 200, "K": 8, "seed": 1},
    "sv": {"T": 200, "seed": 1},
    "normal": {"dim": 1},
    "flat": {"dim": 1},
}
PAPER_DEFAULTS = {
    "mvn": {"dim": 250, "seed": 1},
    "sv": {"T": 3000, "seed": 1},
}


# --------------------------------------------------------------------------
# Model specs


def parse_model_spec(text):
    """``"mvn:dim=10,seed=3"`` -> ``("mvn", {"dim": "10", "seed": "3"})``."""
    kind, _, rest = text.partition(":")
    options = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigurationError(f"model option {item!r} is not key=value")
        options[key.strip()] = value.strip()
    kind = kind.strip().lower()
    if kind not in DESK_DEFAULTS:
        raise ConfigurationError(f"unknown model {kind!r}; choose from {sorted(DESK_DEFAULTS)}")
    return kind, options


def model_from_spec(text, paper_scale=False):
    """Build a target from a spec string, filling in desk-scale (or paper-scale) defaults."""
    kind, options = parse_model_spec(text)
    defaults = dict(DESK_DEFAULTS[kind])
    if paper_scale:
        defaults.update(PAPER_DEFAULTS.get(kind, {}))
        if kind in ("logreg", "hlr") and "file" not in options:
            raise ConfigurationError(f"paper-scale {kind} needs file=<german credit data>")
    opts = {**defaults, **options}
    if kind in ("mvn", "normal", "flat"):
        kw = {"dim": int(opts["dim"])}
        if kind == "mvn":
            kw["seed"] = int(opts["seed"])
            if "dof" in opts:
                kw["dof"] = int(opts["dof"])
        return build_target(kind, **kw)
    if kind in ("logreg", "hlr"):
        if "file" in opts:
            data = load_dataset(opts["file"], kind="german")
        else:
            data = load_dataset("synthetic-logreg", N=opts["N"], K=opts["K"], seed=opts["seed"])
        extra = {"rate": float(opts["rate"])} if "rate" in opts else {}
        return build_target(kind, data=data, **extra)
    if "file" in opts:
        data = load_dataset(opts["file"], kind="prices")
    else:
        data = load_dataset("synthetic-sv", T=opts["T"], seed=opts["seed"])
    return build_target("sv", data=data)


# --------------------------------------------------------------------------
# Configuration


@dataclass
class ExperimentConfig:
    """One experiment grid.

    Every sampler in ``samplers`` is run at each of its grid points:
    ``hmc`` over deltas x lambdas, ``nuts``/``nuts-naive`` over deltas, the
    rest at a single point.  ``burn_in`` defaults to ``n_adapt``.
    """

    model: str
    samplers: list
    n_iter: int = 2000
    n_adapt: int = 1000
    deltas: list = field(default_factory=lambda: [0.6])
    lambdas: list | None = None
    replications: int = 1
    seed: int = 0
    out_dir: str = "runs"
    burn_in: int | None = None
    max_depth: int = 10
    step_size: float | None = None
    n_steps: int | None = None
    proposal_scale: float | None = None
    reference: str = "auto"
    reference_iters: int | None = None
    paper_scale: bool = False
    workers: int | None = None

    def __post_init__(self):
        if isinstance(self.samplers, str):
            self.samplers = [self.samplers]
        unknown = [s for s in self.samplers if s not in SAMPLERS]
        if unknown or not self.samplers:
            raise ConfigurationError(f"unknown samplers {unknown}; choose from {SAMPLERS}")
        if "hmc" in self.samplers:
            if not self.lambdas:
                raise ConfigurationError("sampler 'hmc' needs a nonempty lambda grid")
        elif self.lambdas:
            raise ConfigurationError("a lambda grid is only meaningful for sampler 'hmc'")
        if any(s in self.samplers for s in ("hmc", "nuts", "nuts-naive")) and not self.deltas:
            raise ConfigurationError("delta grid must be nonempty")
        if "hmc-fixed" in self.samplers and (self.step_size is None or self.n_steps is None):
            raise ConfigurationError("hmc-fixed needs step_size and n_steps")
        if self.replications < 1:
            raise ConfigurationError("replications must be positive")
        if not 0 <= self.n_adapt < self.n_iter:
            raise ConfigurationError("need 0 <= n_adapt < n_iter")
        if self.burn_in is None:
            self.burn_in = self.n_adapt
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigurationError("burn_in must leave at least one kept draw")
        kind, _ = parse_model_spec(self.model)
        if "gibbs" in self.samplers and kind not in ("mvn", "normal"):
            raise ConfigurationError("gibbs is only available for Gaussian targets")

    @classmethod
    def from_toml(cls, path):
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        if "sampler" in data and "samplers" not in data:
            data["samplers"] = data.pop("sampler")
        if "delta" in data and "deltas" not in data:
            data["deltas"] = data.pop("delta")
        if "lambda" in data and "lambdas" not in data:
            data["lambdas"] = data.pop("lambda")
        for key in ("deltas", "lambdas"):
            if key in data and not isinstance(data[key], list):
                data[key] = [data[key]]
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        return cls(**data)

    def grid(self):
        """Ordered list of (sampler, delta, lambda) grid points."""
        points = []
        for sampler in self.samplers:
            if sampler == "hmc":
                points += [(sampler, d, lam) for d in self.deltas for lam in self.lambdas]
            elif sampler in ("nuts", "nuts-naive"):
                points += [(sampler, d, None) for d in self.deltas]
            else:
                points.append((sampler, None, None))
        return points


def log_spaced(smallest, ratio=40.0, count=10):
    """``count`` log-spaced values from ``smallest`` to ``ratio * smallest``."""
    return list(np.geomspace(smallest, smallest * ratio, count))


def chain_seed(root_seed, grid_index, replication):
    """Stable 64-bit seed for one chain."""
    seq = np.random.SeedSequence([int(root_seed), int(grid_index), int(replication)])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


# --------------------------------------------------------------------------
# Running chains


def run_chain(model, sampler, config, delta=None, path_length=None, rng=None, theta0=None):
    """Run one chain of ``sampler`` on ``model`` according to ``config``."""
    theta0 = np.zeros(model.dim) if theta0 is None else np.asarray(theta0, dtype=float)
    if sampler in ("nuts", "nuts-naive"):
        variant = "efficient" if sampler == "nuts" else "naive"
        cfg = NutsConfig(config.n_iter, config.n_adapt, delta, max_depth=config.max_depth,
                         step_size=config.step_size if config.n_adapt == 0 else None)
        return nuts_run(model, theta0, cfg, rng, variant=variant)
    if sampler == "hmc":
        cfg = HmcConfig(config.n_iter, config.n_adapt, delta=delta, path_length=path_length)
        return hmc_run(model, theta0, cfg, rng)
    if sampler == "hmc-fixed":
        cfg = HmcConfig(config.n_iter, 0, step_size=config.step_size, n_steps=config.n_steps)
        return hmc_run(model, theta0, cfg, rng)
    if sampler == "rwm":
        scale = config.proposal_scale
        if scale is None:
            scale = rwm_tune_scale(model, theta0, 0.234, rng.substream(1))
        return rwm_run(model, theta0, RwmConfig(scale, config.n_iter), rng)
    if sampler == "gibbs":
        if not isinstance(model, MvnModel):
            raise ConfigurationError("gibbs is only available for Gaussian targets")
        return gibbs_mvn_run(model.spec, theta0, config.n_iter, rng)
    raise ConfigurationError(f"unknown sampler {sampler!r}")


def _fmt(x):
    return repr(float(x))


def write_draws(path, draws):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"theta_{d}" for d in range(draws.shape[1])])
        for row in draws:
            writer.writerow([_fmt(v) for v in row])


def read_draws(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return np.array(rows, dtype=float).reshape(-1, len(header))


def write_stats(path, chain):
    cols = chain.stats_table()
    names = list(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(chain.n_iter):
            row = []
            for name in names:
                v = cols[name][i]
                if isinstance(v, (bool, np.bool_)):
                    row.append(str(int(v)))
                elif isinstance(v, (int, np.integer)):
                    row.append(str(int(v)))
                else:
                    row.append(_fmt(v))
            writer.writerow(row)


def read_stats(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return {k: np.array([float(r[k]) for r in rows]) for k in (reader.fieldnames or [])}


def references_for(model, config, out_dir):
    """Reference moments: analytic for Gaussians, else a long NUTS run at delta = 0.5.

    Returns None when ``config.reference == "none"``.
    """
    if config.reference == "none":
        return None
    if config.reference not in ("auto", "analytic"):
        with open(config.reference) as fh:
            return ReferenceMoments.from_dict(json.load(fh))
    if isinstance(model, MvnModel):
        return gaussian_reference(np.zeros(model.dim), model.spec.covariance)
    if config.reference == "analytic":
        raise ConfigurationError("analytic references exist only for Gaussian targets")
    cache = Path(out_dir) / "reference.json"
    if cache.exists():
        with open(cache) as fh:
            return ReferenceMoments.from_dict(json.load(fh))
    kept = config.n_iter - config.burn_in
    iters = config.reference_iters or max(25 * kept, 1000)
    adapt = min(config.n_adapt or 1000, iters)
    cfg = NutsConfig(iters + adapt, adapt, 0.5, max_depth=config.max_depth)
    chain = nuts_run(model, np.zeros(model.dim), cfg, RngStream(config.seed, REFERENCE_SEED_KEY))
    refs = reference_from_draws(chain.kept(), f"NUTS delta=0.5, {iters} draws")
    with open(cache, "w") as fh:
        json.dump(refs.to_dict(), fh, indent=2)
    return refs


def summarize_chain(chain, burn_in, delta=None, refs=None):
    kept_stats = chain.accept_stat[burn_in:]
    out = {
        "total_grads": int(chain.grads.sum()),
        "init_grads": int(chain.init_grads),
        "kept_grads": int(chain.grads[burn_in:].sum()),
        "mean_accept_stat": float(kept_stats.mean()),
        "final_step_size": None if chain.final_step_size is None else float(chain.final_step_size),
        "step_size_avg_trace": None if chain.step_size_avg is None else
        [float(x) for x in chain.step_size_avg[:chain.n_adapt]],
        "warnings": list(chain.warnings),
    }
    if delta is not None:
        out["delta"] = float(delta)
        out["h_discrepancy"] = h_discrepancy(kept_stats, delta)
    if chain.tree_depth is not None:
        traj = trajectory_histogram(chain.tree_depth[burn_in:], chain.n_states[burn_in:])
        out["trajectory"] = {
            "state_counts": {str(k): v for k, v in traj.histogram.items()},
            "depths": {str(k): v for k, v in traj.depth_histogram.items()},
            "power_of_two_fraction": traj.power_of_two_fraction,
        }
    if refs is not None:
        report = ess_report(chain.kept(burn_in), refs, out["kept_grads"])
        out["ess"] = report.to_dict()
    return out


def _run_task(task):
    config, index, point, rep, out_dir = task
    sampler, delta, lam = point
    model = model_from_spec(config.model, config.paper_scale)
    refs = None
    if config.reference != "none":
        refs = references_for(model, config, out_dir)
    seed = chain_seed(config.seed, index, rep)
    rng = RngStream(config.seed, index, rep)
    start = time.perf_counter()
    chain = run_chain(model, sampler, config, delta, lam, rng)
    wall = time.perf_counter() - start
    name = f"{sampler}_g{index:03d}_r{rep:02d}"
    chain_dir = Path(out_dir) / name
    chain_dir.mkdir(parents=True, exist_ok=True)
    write_draws(chain_dir / "draws.csv", chain.kept(config.burn_in))
    write_stats(chain_dir / "stats.csv", chain)
    summary = {
        "name": name, "sampler": sampler, "grid_index": index, "replication": rep,
        "delta": delta, "lambda": lam, "seed": seed, "n_iter": config.n_iter,
        "n_adapt": config.n_adapt, "burn_in": config.burn_in,
        **summarize_chain(chain, config.burn_in, delta, refs),
    }
    with open(chain_dir / "chain.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    summary["wall_time"] = wall
    return summary


def worker_count(config, n_tasks):
    limit = config.workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        limit = min(limit or int(env), int(env))
    if limit is None:
        limit = os.cpu_count() or 1
    return max(1, min(limit, n_tasks))


def run_experiment(config):
    """Run every grid point x replication and write artifacts under ``config.out_dir``.

    Layout: one ``<sampler>_g<grid>_r<rep>/`` directory per chain holding
    ``draws.csv`` (kept draws), ``stats.csv`` (all iterations) and
    ``chain.json``; a top-level ``summary.json``.  An ``INCOMPLETE`` marker
    is left behind if the run fails.
    """
    out_dir = Path(config.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        marker = out_dir / INCOMPLETE_MARKER
        marker.write_text("run in progress or aborted\n")
    except OSError as exc:
        raise OSError(f"cannot write to output directory {out_dir}: {exc}") from exc
    if config.paper_scale:
        logger.warning("paper-scale configuration: expect hours of runtime")
    model = model_from_spec(config.model, config.paper_scale)
    if config.reference != "none":
        references_for(model, config, out_dir)

    tasks = [(config, i, point, rep, str(out_dir))
             for i, point in enumerate(config.grid()) for rep in range(config.replications)]
    start = time.perf_counter()
    workers = worker_count(config, len(tasks))
    if workers == 1:
        chains = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chains = list(pool.map(_run_task, tasks))
    summary = {
        "config": asdict(config),
        "model": {"spec": config.model, "name": model.name, "dim": model.dim},
        "chains": chains,
        "wall_time": time.perf_counter() - start,
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    marker.unlink()
    return summary


# --------------------------------------------------------------------------
# Comparison


def compare_samplers(summaries, path=None):
    """Table of min-ESS per gradient by sampler/delta/lambda, averaged over replications.

    NUTS rows carry ``ratio_to_best_hmc``: their ESS per gradient divided by
    the best HMC grid point.  Written as CSV when ``path`` is given.
    """
    summaries = list(summaries)
    if not summaries:
        raise ConfigurationError("no summaries to compare")
    models = {s["model"]["spec"] for s in summaries}
    if len(models) > 1:
        raise ConfigurationError(f"summaries come from different models: {sorted(models)}")
    groups = {}
    for summary in summaries:
        for chain in summary["chains"]:
            if "ess" not in chain:
                raise ConfigurationError(f"chain {chain['name']} has no ESS report")
            key = (chain["sampler"], chain["delta"], chain["lambda"])
            groups.setdefault(key, []).append(chain)
    rows = []
    for (sampler, delta, lam), chains in groups.items():
        min_ess = float(np.mean([c["ess"]["min_ess"] for c in chains]))
        grads = float(np.mean([c["ess"]["grads"] for c in chains]))
        rows.append({"sampler": sampler, "delta": delta, "lambda": lam,
                     "replications": len(chains), "min_ess": min_ess, "grads": grads,
                     "ess_per_grad": min_ess / grads if grads else float("nan")})
    hmc = [r["ess_per_grad"] for r in rows if r["sampler"] == "hmc"]
    best_hmc = max(hmc) if hmc else None
    for row in rows:
        row["best_hmc_ess_per_grad"] = best_hmc
        row["ratio_to_best_hmc"] = (row["ess_per_grad"] / best_hmc
                                    if best_hmc and row["sampler"].startswith("nuts") else None)
    if path is not None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return rows


def load_summaries(directory):
    paths = sorted(Path(directory).rglob("summary.json"))
    if not paths:
        raise ConfigurationError(f"no summary.json found under {directory}")
    out = []
    for p in paths:
        with open(p) as fh:
            out.append(json.load(fh))
    return out
