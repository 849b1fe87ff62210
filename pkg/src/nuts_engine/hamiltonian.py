"""Phase-space primitives: states, momentum draws and the leapfrog map."""
from __future__ import annotations

import numpy as np

from .errors import EvaluationError
from .model import eval_model


class PhaseState:
    """Position/momentum pair with the cached log density and gradient at theta.

    ``divergent`` marks a state whose position or density went non-finite;
    such a state has ``logp == -inf`` and is never integrated further.
    """

    __slots__ = ("theta", "r", "logp", "grad", "divergent")

    def __init__(self, theta, r, logp, grad, divergent=False):
        self.theta = theta
        self.r = r
        self.logp = logp
        self.grad = grad
        self.divergent = divergent

    @classmethod
    def at(cls, model, theta, r=None):
        """Evaluate ``model`` at ``theta`` and build a state around it."""
        theta = np.asarray(theta, dtype=float)
        logp, grad = eval_model(model, theta)
        r = np.zeros_like(theta) if r is None else np.asarray(r, dtype=float)
        return cls(theta, r, logp, grad)

    def with_momentum(self, r):
        return PhaseState(self.theta, r, self.logp, self.grad, self.divergent)

    def __repr__(self):
        return f"PhaseState(theta={self.theta}, r={self.r}, logp={self.logp})"


def joint_log_density(state):
    """L(theta) - r.r / 2."""
    return state.logp - 0.5 * float(state.r @ state.r)


class RngStream:
    """Seeded random source for one chain.

    Sub-streams are derived from ``(root_seed, *keys)`` through
    ``numpy.random.SeedSequence``, so the same keys always give the same
    stream regardless of process or ordering.
    """

    def __init__(self, seed=None, *keys):
        if isinstance(seed, np.random.SeedSequence):
            self.seed_sequence = seed
        else:
            entropy = [int(seed)] + [int(k) for k in keys] if seed is not None else None
            self.seed_sequence = np.random.SeedSequence(entropy)
        self.generator = np.random.Generator(np.random.PCG64(self.seed_sequence))

    def substream(self, *keys):
        entropy = self.seed_sequence.entropy
        entropy = list(entropy) if isinstance(entropy, (list, tuple)) else [entropy]
        return RngStream(np.random.SeedSequence(entropy + [int(k) for k in keys]))

    def normal(self, size):
        return self.generator.standard_normal(size)

    def uniform(self):
        """Uniform draw on [0, 1)."""
        return self.generator.random()

    def uniform_open_left(self):
        """Uniform draw on (0, 1]."""
        return 1.0 - self.generator.random()

    def index(self, n):
        """Uniform integer in [0, n)."""
        return int(self.generator.integers(n))

    def direction(self):
        return 1 if self.generator.random() < 0.5 else -1


def as_rng(rng):
    if isinstance(rng, RngStream):
        return rng
    return RngStream(rng)


def sample_momentum(dim, rng):
    """Draw ``dim`` independent standard normal momenta."""
    return rng.normal(dim)


def leapfrog(model, state, step):
    """One leapfrog step of (signed) size ``step``.

    Reuses ``state.grad`` for the first half-kick, so exactly one gradient
    evaluation is spent.  A non-finite position or density yields a state
    flagged ``divergent`` instead of raising.
    """
    r_half = state.r + (0.5 * step) * state.grad
    theta = state.theta + step * r_half
    try:
        logp, grad = eval_model(model, theta)
    except EvaluationError:
        return PhaseState(theta, r_half, -np.inf, np.zeros_like(theta), True)
    if logp == -np.inf:
        return PhaseState(theta, r_half, logp, grad, True)
    return PhaseState(theta, r_half + (0.5 * step) * grad, logp, grad)
