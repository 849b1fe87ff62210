"""Data loading, synthetic generators and predictor preprocessing."""
from __future__ import annotations

from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataParseError
from .model import LogRegData, SvData

GERMAN_CREDIT_COLUMNS = 25


def standardize(X):
    """Center each column and scale it to unit (population) variance.

    Constant columns are centered and left at zero.
    """
    X = np.asarray(X, dtype=float)
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    Z = X - mean
    nonconstant = std > 1e-12
    Z[:, nonconstant] /= std[nonconstant]
    Z[:, ~nonconstant] = 0.0
    return Z


def expand_interactions(X):
    """Append every pairwise product x_a * x_b (a < b), re-standardized.

    Output has ``K + K (K - 1) / 2`` columns: the originals first, then the
    products in lexicographic (a, b) order.
    """
    X = np.asarray(X, dtype=float)
    K = X.shape[1]
    pairs = list(combinations(range(K), 2))
    products = np.empty((X.shape[0], len(pairs)))
    for col, (a, b) in enumerate(pairs):
        products[:, col] = X[:, a] * X[:, b]
    if X.shape[0] == 0:
        return np.hstack([X, products])
    return np.hstack([X, standardize(products)])


def load_german_credit(path, prior_variance=100.0):
    """Read the 24-numeric-predictor German credit file.

    Each line holds 25 whitespace-separated integers; the last is the class
    (1 = good credit -> +1, 2 = bad credit -> -1).
    """
    rows, labels = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != GERMAN_CREDIT_COLUMNS:
                raise DataParseError(
                    f"expected {GERMAN_CREDIT_COLUMNS} columns, found {len(fields)}", line=lineno)
            try:
                values = [float(v) for v in fields]
            except ValueError as exc:
                raise DataParseError(f"non-numeric field ({exc})", line=lineno) from None
            if values[-1] not in (1.0, 2.0):
                raise DataParseError(f"class label must be 1 or 2, got {fields[-1]}", line=lineno)
            rows.append(values[:-1])
            labels.append(1.0 if values[-1] == 1.0 else -1.0)
    if len(rows) < 2:
        raise ConfigurationError("German credit file needs at least two rows")
    return LogRegData(standardize(np.array(rows)), np.array(labels), prior_variance)


def load_price_series(path, rate=0.01):
    """Read a single-column CSV of positive prices into log-return differences.

    A non-numeric first line is treated as a header.
    """
    prices = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip().split(",")[0].strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError:
                if lineno == 1:
                    continue
                raise DataParseError(f"not a number: {text!r}", line=lineno) from None
            if not value > 0 or not np.isfinite(value):
                raise DataParseError(f"price must be positive and finite, got {text}", line=lineno)
            prices.append(value)
    if len(prices) < 2:
        raise ConfigurationError("price series needs at least two entries")
    return SvData(np.diff(np.log(prices)), rate=rate)


def synthetic_logreg(n_obs, n_predictors, seed, prior_variance=100.0):
    """Standardized Gaussian predictors with labels from a random logistic model."""
    if n_obs < 2:
        raise ConfigurationError("synthetic logistic regression needs N >= 2")
    rng = np.random.default_rng(seed)
    X = standardize(rng.standard_normal((n_obs, n_predictors)))
    alpha = rng.standard_normal()
    beta = rng.standard_normal(n_predictors)
    p = 1.0 / (1.0 + np.exp(-(alpha + X @ beta)))
    y = np.where(rng.random(n_obs) < p, 1.0, -1.0)
    return LogRegData(X, y, prior_variance)


def synthetic_sv(n_times, seed, rate=0.01):
    """Simulate the stochastic-volatility generative process.

    tau, nu, s_1 ~ Exponential(rate); log s_i is a Gaussian random walk with
    precision tau; each return difference is s_i times a t_nu draw.
    Returns the T - 1 log-return differences.
    """
    if n_times < 2:
        raise ConfigurationError("synthetic SV series needs T >= 2")
    rng = np.random.default_rng(seed)
    scale = 1.0 / rate
    tau, nu, s1 = rng.exponential(scale, size=3)
    steps = rng.standard_normal(n_times - 1) / np.sqrt(tau)
    log_s = np.log(s1) + np.concatenate([[0.0], np.cumsum(steps)])
    diffs = np.exp(log_s[1:]) * rng.standard_t(nu, size=n_times - 1)
    return SvData(diffs, rate=rate)


def load_dataset(source, **options):
    """Load a dataset from a file path or a synthetic specification.

    ``source`` is a path (``kind`` chooses ``"german"`` or ``"prices"``; the
    default guesses from the suffix) or one of ``"synthetic-logreg"`` (``N``,
    ``K``, ``seed``) and ``"synthetic-sv"`` (``T``, ``seed``).
    """
    if source == "synthetic-logreg":
        return synthetic_logreg(int(options["N"]), int(options["K"]), int(options.get("seed", 0)),
                                float(options.get("prior_variance", 100.0)))
    if source == "synthetic-sv":
        return synthetic_sv(int(options["T"]), int(options.get("seed", 0)),
                            float(options.get("rate", 0.01)))
    path = Path(source)
    if not path.exists():
        raise ConfigurationError(f"data file {path} does not exist")
    kind = options.get("kind") or ("prices" if path.suffix.lower() == ".csv" else "german")
    if kind == "german":
        return load_german_credit(path, float(options.get("prior_variance", 100.0)))
    if kind == "prices":
        return load_price_series(path, float(options.get("rate", 0.01)))
    raise ConfigurationError(f"unknown dataset kind {kind!r}")
