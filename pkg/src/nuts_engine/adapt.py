"""Step-size adaptation: dual averaging and the initial-epsilon heuristic."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, ControllerError, InitializationError
from .hamiltonian import PhaseState, joint_log_density, leapfrog, sample_momentum

DEFAULT_GAMMA = 0.05
DEFAULT_T0 = 10.0
DEFAULT_KAPPA = 0.75
MAX_EPSILON_TRIALS = 100


@dataclass(frozen=True)
class DualAveragingState:
    """Controller state for coercing an acceptance statistic to ``delta``.

    ``log_eps`` is the current iterate and ``log_eps_avg`` the averaged
    iterate used once adaptation stops.
    """

    mu: float
    delta: float
    log_eps: float = 0.0
    log_eps_avg: float = 0.0
    h_bar: float = 0.0
    t: int = 0
    gamma: float = DEFAULT_GAMMA
    t0: float = DEFAULT_T0
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError(f"delta must lie in (0, 1), got {self.delta}")
        if self.gamma <= 0 or self.t0 < 0 or not 0.5 < self.kappa <= 1.0:
            raise ConfigurationError("need gamma > 0, t0 >= 0 and kappa in (0.5, 1]")

    @classmethod
    def start(cls, eps0, delta, **kwargs):
        """Initial state with mu = log(10 * eps0) and log_eps = log(eps0)."""
        return cls(mu=shrinkage_target(eps0), delta=delta, log_eps=math.log(eps0), **kwargs)

    @property
    def step_size(self):
        return math.exp(self.log_eps)

    @property
    def final_step_size(self):
        return math.exp(self.log_eps_avg)

    def update(self, alpha_stat):
        return da_update(self, alpha_stat)


def da_update(state, alpha_stat):
    """One dual-averaging step driven by H = delta - alpha_stat."""
    if not math.isfinite(alpha_stat):
        raise ControllerError(f"acceptance statistic must be finite, got {alpha_stat}")
    m = state.t + 1
    w = 1.0 / (m + state.t0)
    h_bar = (1.0 - w) * state.h_bar + w * (state.delta - alpha_stat)
    log_eps = state.mu - math.sqrt(m) / state.gamma * h_bar
    eta = m ** -state.kappa
    log_eps_avg = eta * log_eps + (1.0 - eta) * state.log_eps_avg
    return replace(state, h_bar=h_bar, log_eps=log_eps, log_eps_avg=log_eps_avg, t=m)


def shrinkage_target(eps0):
    """mu = log(10 * eps0): bias the controller toward larger steps."""
    if not eps0 > 0:
        raise ConfigurationError("eps0 must be positive")
    return math.log(10.0 * eps0)


def find_reasonable_epsilon(model, theta, rng, r=None, max_trials=MAX_EPSILON_TRIALS):
    """Double or halve epsilon until a single leapfrog step's acceptance ratio crosses 1/2.

    ``theta`` may be a position vector or a :class:`PhaseState` (whose cached
    density is reused).  ``r`` forces the probe momentum.
    """
    return search_epsilon(model, theta, rng, r, max_trials)[0]


def search_epsilon(model, theta, rng, r=None, max_trials=MAX_EPSILON_TRIALS):
    """:func:`find_reasonable_epsilon` that also returns the gradient evaluations spent."""
    if isinstance(theta, PhaseState):
        state = theta
        grads = 0
    else:
        state = PhaseState.at(model, theta)
        grads = 1
    r = sample_momentum(model.dim, rng) if r is None else np.asarray(r, dtype=float)
    start = state.with_momentum(r)
    h0 = joint_log_density(start)

    def log_ratio(eps):
        new = leapfrog(model, start, eps)
        if new.divergent:
            return -np.inf
        return joint_log_density(new) - h0

    eps = 1.0
    lr = log_ratio(eps)
    grads += 1
    a = 1 if lr > math.log(0.5) else -1
    trials = 0
    # (ratio)^a > 2^-a  <=>  a * log ratio > -a * log 2
    while a * lr > -a * math.log(2.0):
        trials += 1
        if trials > max_trials:
            raise InitializationError(
                f"step-size heuristic did not settle after {max_trials} trials; "
                "supply a step size manually")
        eps *= 2.0 ** a
        lr = log_ratio(eps)
        grads += 1
    return eps, grads
