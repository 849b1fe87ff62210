"""Hamiltonian Monte Carlo with a fixed step count or a dual-averaged step size."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .adapt import DualAveragingState, search_epsilon
from .chain import ChainOutput, storm_warnings
from .errors import ConfigurationError
from .hamiltonian import PhaseState, as_rng, joint_log_density, leapfrog, sample_momentum


@dataclass(frozen=True)
class HmcConfig:
    """Either a fixed ``step_size``/``n_steps`` pair, or ``delta`` plus ``path_length``.

    With ``path_length`` (lambda) each iteration takes
    ``max(1, round(lambda / eps))`` leapfrog steps.
    """

    n_iter: int
    n_adapt: int = 0
    step_size: float | None = None
    n_steps: int | None = None
    delta: float | None = None
    path_length: float | None = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigurationError("n_iter must be positive")
        if not 0 <= self.n_adapt < self.n_iter:
            raise ConfigurationError("need 0 <= n_adapt < n_iter")
        if self.adaptive:
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise ConfigurationError("delta must lie in (0, 1)")
            if self.path_length is None or not self.path_length > 0:
                raise ConfigurationError("path_length must be positive")
        else:
            if self.step_size is None or not self.step_size > 0:
                raise ConfigurationError("fixed HMC needs a positive step_size")
            if self.n_steps is None or self.n_steps < 1:
                raise ConfigurationError("fixed HMC needs n_steps >= 1")
            if self.n_adapt:
                raise ConfigurationError("fixed HMC does not adapt; set n_adapt=0 or give delta")

    @property
    def adaptive(self):
        return self.delta is not None or self.path_length is not None


class HmcStep(NamedTuple):
    state: PhaseState
    accept_prob: float
    grads: int
    accepted: bool
    divergent: bool


def round_half_away(x):
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def steps_for_length(path_length, step_size):
    return max(1, round_half_away(path_length / step_size))


def hmc_iteration(model, theta_prev, step_size, n_steps, rng):
    """One HMC transition: fresh momentum, ``n_steps`` leapfrog steps, Metropolis test.

    ``theta_prev`` may be a :class:`PhaseState` (cached density reused) or a
    plain position, which costs one extra gradient evaluation.
    """
    if not step_size > 0 or n_steps < 1:
        raise ConfigurationError("need step_size > 0 and n_steps >= 1")
    grads = 0
    if isinstance(theta_prev, PhaseState):
        current = theta_prev
    else:
        current = PhaseState.at(model, theta_prev)
        grads += 1
    start = current.with_momentum(sample_momentum(model.dim, rng))
    h0 = joint_log_density(start)
    proposal = start
    for _ in range(n_steps):
        proposal = leapfrog(model, proposal, step_size)
        grads += 1
        if proposal.divergent:
            break
    if proposal.divergent:
        alpha = 0.0
    else:
        delta_h = joint_log_density(proposal) - h0
        alpha = 1.0 if delta_h >= 0 else (math.exp(delta_h) if math.isfinite(delta_h) else 0.0)
    accepted = rng.uniform() < alpha
    nxt = proposal if accepted else current
    return HmcStep(nxt, alpha, grads, accepted, proposal.divergent)


def hmc_run(model, theta0, config, rng=None):
    """Run HMC for ``config.n_iter`` iterations from ``theta0``.

    The adaptive variant starts from the step-size heuristic and tunes
    log epsilon by dual averaging for ``n_adapt`` iterations, then freezes
    epsilon at the averaged iterate.
    """
    rng = as_rng(rng)
    state = PhaseState.at(model, theta0)
    M = config.n_iter
    draws = np.empty((M, model.dim))
    accept = np.empty(M)
    grads = np.empty(M, dtype=np.int64)
    eps_used = np.empty(M)
    eps_avg = np.empty(M)
    n_steps = np.empty(M, dtype=np.int64)
    divergent = np.zeros(M, dtype=bool)
    moved = np.zeros(M, dtype=bool)

    init_grads = 1
    controller = None
    if config.adaptive:
        eps, spent = search_epsilon(model, state, rng)
        init_grads += spent
        controller = DualAveragingState.start(eps, config.delta)
    else:
        eps = config.step_size

    for m in range(1, M + 1):
        L = steps_for_length(config.path_length, eps) if config.adaptive else config.n_steps
        step = hmc_iteration(model, state, eps, L, rng)
        state = step.state
        i = m - 1
        draws[i] = state.theta
        accept[i] = step.accept_prob
        grads[i] = step.grads
        eps_used[i] = eps
        n_steps[i] = L
        divergent[i] = step.divergent
        moved[i] = step.accepted
        if controller is not None:
            if m <= config.n_adapt:
                controller = controller.update(step.accept_prob)
                eps = controller.step_size
            else:
                eps = controller.final_step_size
            eps_avg[i] = controller.final_step_size
        else:
            eps_avg[i] = eps

    name = "hmc" if config.adaptive else "hmc-fixed"
    final = controller.final_step_size if controller is not None else config.step_size
    return ChainOutput(
        sampler=name, draws=draws, accept_stat=accept, grads=grads, step_size=eps_used,
        n_adapt=config.n_adapt, step_size_avg=eps_avg, n_steps=n_steps, divergent=divergent,
        moved=moved, init_grads=init_grads, final_step_size=final,
        warnings=storm_warnings(moved, config.n_adapt, name),
    )
