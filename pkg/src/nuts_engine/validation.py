"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .hamiltonian import RngStream
from .model import TargetModel


def check_model(model):
    if not isinstance(model, TargetModel):
        raise ConfigurationError(f"expected a TargetModel, got {type(model).__name__}")
    return model


def check_position(theta, dim):
    """Return ``theta`` as a finite float vector of length ``dim`` (zeros when None)."""
    if theta is None:
        return np.zeros(dim)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (dim,):
        raise ConfigurationError(f"theta0 has shape {theta.shape}, expected ({dim},)")
    if not np.all(np.isfinite(theta)):
        raise ConfigurationError("theta0 must be finite")
    return theta


def check_unit_interval(value, name):
    if not 0.0 < value < 1.0:
        raise ConfigurationError(f"{name} must lie in (0, 1), got {value}")
    return float(value)


def check_random_state(random_state):
    """None, an int seed or an existing RngStream."""
    if isinstance(random_state, RngStream):
        return random_state
    if random_state is None:
        return RngStream()
    if isinstance(random_state, (int, np.integer)) and random_state >= 0:
        return RngStream(int(random_state))
    raise ConfigurationError("random_state must be None, a non-negative int or an RngStream")
