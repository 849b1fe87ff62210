"""Effective sample size, acceptance-statistic discrepancy and trajectory summaries.

Autocorrelations are measured against moments taken from a separate
long reference run (or known analytically), never from the chain itself.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError

ESS_CUTOFF = 0.05


@dataclass(frozen=True)
class MomentReference:
    """Mean and variance of a functional f(theta) under the target."""

    mean: float
    variance: float
    provenance: str = ""

    def __post_init__(self):
        if not self.variance > 0:
            raise ConfigurationError(f"reference variance must be positive, got {self.variance}")


def _centered_lag_sums(f, mean, max_lag):
    """sum_{m=s+1}^{M} (f_m - mean)(f_{m-s} - mean) for s = 0..max_lag, via FFT."""
    x = np.asarray(f, dtype=float) - mean
    M = x.size
    size = 1 << int(np.ceil(np.log2(2 * M)))
    spec = np.fft.rfft(x, size)
    acov = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1]
    return acov


def autocorrelation(chain, ref, max_lag=None):
    """Lag-s autocorrelations rho_0..rho_max_lag of ``chain`` relative to ``ref``.

    rho_s = sum_{m>s} (f_m - mu)(f_{m-s} - mu) / (sigma^2 (M - s)).
    """
    chain = np.asarray(chain, dtype=float)
    M = chain.size
    if M < 2:
        raise ConfigurationError("need at least two draws")
    max_lag = M - 1 if max_lag is None else int(max_lag)
    if not 0 <= max_lag < M:
        raise ConfigurationError("max_lag must lie in [0, M)")
    if not ref.variance > 0:
        raise ConfigurationError("reference variance must be positive")
    sums = _centered_lag_sums(chain, ref.mean, max_lag)
    return sums / (ref.variance * (M - np.arange(max_lag + 1)))


class EssEstimate(NamedTuple):
    ess: float
    cutoff: int
    flags: tuple = ()


def ess(chain, ref, cutoff=ESS_CUTOFF, include_cutoff_lag=True):
    """Effective sample size with the autocorrelation sum truncated at its first dip below ``cutoff``.

    ESS = M / (1 + 2 sum_{s=1}^{S} (1 - s/M) rho_s) where S is the first lag
    with rho_s < cutoff (that lag itself is summed unless
    ``include_cutoff_lag`` is False).  The denominator is floored at 1/M.
    """
    chain = np.asarray(chain, dtype=float)
    M = chain.size
    if M < 10:
        raise ConfigurationError("ESS needs at least 10 draws")
    flags = []
    if np.ptp(chain) == 0:
        flags.append("degenerate chain")
    rho = autocorrelation(chain, ref)
    below = np.flatnonzero(rho[1:] < cutoff)
    if below.size:
        lag = int(below[0]) + 1
        last = lag if include_cutoff_lag else lag - 1
    else:
        lag = last = M - 1
        flags.append("cutoff not reached")
    s = np.arange(1, last + 1)
    denom = 1.0 + 2.0 * np.sum((1.0 - s / M) * rho[1:last + 1])
    if denom < 1.0 / M:
        flags.append("super-efficient chain")
        denom = 1.0 / M
    return EssEstimate(M / denom, lag, tuple(flags))


@dataclass
class EssReport:
    ess_mean: np.ndarray
    ess_second: np.ndarray
    cutoff_mean: np.ndarray
    cutoff_second: np.ndarray
    min_ess: float
    grads: int
    ess_per_grad: float
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, np.ndarray):
                out[key] = value.tolist()
        return out

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class ReferenceMoments:
    """Per-dimension references for the mean and the second central moment."""

    mean: tuple
    second: tuple

    @property
    def dim(self):
        return len(self.mean)

    def means(self):
        return np.array([r.mean for r in self.mean])

    def to_dict(self):
        return {"mean": [asdict(r) for r in self.mean], "second": [asdict(r) for r in self.second]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(MomentReference(**r) for r in data["mean"]),
                   tuple(MomentReference(**r) for r in data["second"]))


def reference_from_draws(draws, provenance="reference run"):
    """Estimate mean/second-moment references from a long run."""
    draws = np.asarray(draws, dtype=float)
    mu = draws.mean(axis=0)
    var = draws.var(axis=0)
    sq = (draws - mu) ** 2
    return ReferenceMoments(
        tuple(MomentReference(float(m), float(v), provenance) for m, v in zip(mu, var)),
        tuple(MomentReference(float(v), float(w), provenance) for v, w in zip(var, sq.var(axis=0))),
    )


def gaussian_reference(mean, covariance, provenance="analytic Gaussian moments"):
    """Exact references for a Gaussian target: Var[(x - mu)^2] = 2 sigma^4."""
    mean = np.asarray(mean, dtype=float)
    var = np.diag(np.asarray(covariance, dtype=float))
    return ReferenceMoments(
        tuple(MomentReference(float(m), float(v), provenance) for m, v in zip(mean, var)),
        tuple(MomentReference(float(v), float(2 * v * v), provenance) for v in var),
    )


def ess_report(draws, refs, grads, cutoff=ESS_CUTOFF):
    """Per-dimension ESS of theta_d and (theta_d - mu_d)^2; report the minimum.

    The second-moment functional is centered with the reference mean.
    """
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[0] == 1 and refs.dim != 1:
        draws = draws.T
    D = draws.shape[1]
    if refs.dim != D:
        raise ConfigurationError(f"draws have {D} dimensions but references have {refs.dim}")
    ess_mean = np.empty(D)
    ess_second = np.empty(D)
    cut_mean = np.empty(D, dtype=int)
    cut_second = np.empty(D, dtype=int)
    flags = {}
    for d in range(D):
        m = ess(draws[:, d], refs.mean[d], cutoff)
        s = ess((draws[:, d] - refs.mean[d].mean) ** 2, refs.second[d], cutoff)
        ess_mean[d], cut_mean[d] = m.ess, m.cutoff
        ess_second[d], cut_second[d] = s.ess, s.cutoff
        if m.flags or s.flags:
            flags[str(d)] = sorted(set(m.flags) | set(s.flags))
    min_ess = float(min(ess_mean.min(), ess_second.min()))
    per_grad = min_ess / grads if grads > 0 else float("nan")
    return EssReport(ess_mean, ess_second, cut_mean, cut_second, min_ess, int(grads), per_grad,
                     flags)


def h_discrepancy(accept_stats, delta):
    """Realized mean acceptance statistic minus its target."""
    stats = np.asarray(accept_stats, dtype=float)
    if stats.size == 0:
        raise ConfigurationError("no acceptance statistics supplied")
    return float(stats.mean() - delta)


def is_power_of_two(n):
    n = int(n)
    return n > 0 and n & (n - 1) == 0


class TrajectorySummary(NamedTuple):
    histogram: dict
    power_of_two_fraction: float
    depth_histogram: dict


def trajectory_histogram(depths, counts):
    """Histogram of per-iteration state counts and the share that are powers of two."""
    counts = [int(c) for c in counts]
    if not counts:
        raise ConfigurationError("no trajectories supplied")
    frac = sum(is_power_of_two(c) for c in counts) / len(counts)
    return TrajectorySummary(dict(sorted(Counter(counts).items())), frac,
                             dict(sorted(Counter(int(d) for d in depths).items())))
