"""Random-walk Metropolis and systematic-scan Gibbs reference samplers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainOutput
from .errors import ConfigurationError, TuningError
from .hamiltonian import as_rng
from .model import MvnSpec, eval_model

PILOT_ITERATIONS = 2000
MAX_PILOTS = 30


@dataclass(frozen=True)
class RwmConfig:
    proposal_scale: float
    n_iter: int

    def __post_init__(self):
        if not self.proposal_scale > 0:
            raise ConfigurationError("proposal_scale must be positive")
        if self.n_iter < 1:
            raise ConfigurationError("n_iter must be positive")


def rwm_run(model, theta0, config, rng=None):
    """Metropolis with isotropic N(0, scale^2 I) proposals.

    One density evaluation per iteration; ``grads`` records it so costs
    compare directly with gradient counts of the HMC family.
    """
    rng = as_rng(rng)
    theta = np.asarray(theta0, dtype=float).copy()
    logp, _ = eval_model(model, theta)
    M, D = config.n_iter, model.dim
    draws = np.empty((M, D))
    accept = np.empty(M)
    moved = np.zeros(M, dtype=bool)
    for i in range(M):
        proposal = theta + config.proposal_scale * rng.normal(D)
        new_logp, _ = eval_model(model, proposal)
        diff = new_logp - logp
        alpha = 1.0 if diff >= 0 else (math.exp(diff) if diff > -math.inf else 0.0)
        accept[i] = alpha
        if rng.uniform() < alpha:
            theta, logp = proposal, new_logp
            moved[i] = True
        draws[i] = theta
    return ChainOutput(
        sampler="rwm", draws=draws, accept_stat=accept, grads=np.ones(M, dtype=np.int64),
        step_size=np.full(M, config.proposal_scale), moved=moved, init_grads=1,
        final_step_size=config.proposal_scale,
    )


def acceptance_rate(chain):
    return float(chain.moved.mean())


def rwm_tune_scale(model, theta0, target_rate=0.234, rng=None, tol=0.02,
                   pilot_iterations=PILOT_ITERATIONS, max_pilots=MAX_PILOTS,
                   bracket=(1e-4, 1e4)):
    """Bisect log(scale) over pilot runs until the acceptance rate is within ``tol``.

    Returns the best scale found.  Acceptance falls as the scale grows, so
    the bracket must straddle the target.
    """
    if not 0.0 < target_rate < 1.0:
        raise ConfigurationError("target_rate must lie in (0, 1)")
    rng = as_rng(rng)
    lo, hi = math.log(bracket[0]), math.log(bracket[1])
    best_scale, best_gap = None, math.inf
    for pilot in range(max_pilots):
        log_scale = 0.5 * (lo + hi)
        scale = math.exp(log_scale)
        chain = rwm_run(model, theta0, RwmConfig(scale, pilot_iterations), rng)
        rate = acceptance_rate(chain)
        theta0 = chain.draws[-1]
        gap = abs(rate - target_rate)
        if gap < best_gap:
            best_scale, best_gap = scale, gap
        if gap <= tol:
            return scale
        if rate > target_rate:
            lo = log_scale
        else:
            hi = log_scale
        if hi - lo < 1e-6:
            break
    if best_gap <= 2 * tol:
        return best_scale
    raise TuningError(f"could not bring acceptance to {target_rate} +/- {tol}; "
                      f"closest scale {best_scale:.4g} missed by {best_gap:.3f}")


def gibbs_conditional(precision, theta, d):
    """Mean and variance of theta_d given the other coordinates."""
    a_dd = precision[d, d]
    mean = -(precision[d] @ theta - a_dd * theta[d]) / a_dd
    return mean, 1.0 / a_dd


def gibbs_mvn_run(spec, theta0, sweeps, rng=None):
    """Systematic-scan Gibbs for a zero-mean Gaussian given by its precision matrix."""
    if not isinstance(spec, MvnSpec):
        spec = MvnSpec(np.asarray(spec, dtype=float))
    A = spec.precision
    diag = np.diag(A)
    if np.any(diag <= 0):
        raise ConfigurationError("precision matrix needs a positive diagonal")
    rng = as_rng(rng)
    D = spec.dim
    theta = np.asarray(theta0, dtype=float).copy()
    if theta.shape != (D,):
        raise ConfigurationError(f"theta0 must have shape ({D},)")
    sd = 1.0 / np.sqrt(diag)
    draws = np.empty((sweeps, D))
    for i in range(sweeps):
        z = rng.normal(D)
        for d in range(D):
            mean = -(A[d] @ theta - diag[d] * theta[d]) / diag[d]
            theta[d] = mean + sd[d] * z[d]
        draws[i] = theta
    return ChainOutput(
        sampler="gibbs", draws=draws, accept_stat=np.ones(sweeps),
        grads=np.full(sweeps, 1, dtype=np.int64), step_size=np.zeros(sweeps),
        moved=np.ones(sweeps, dtype=bool),
    )
