"""Per-chain output container shared by all samplers."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

STORM_WINDOW = 100
STORM_FRACTION = 0.9


@dataclass
class ChainOutput:
    """Draws and per-iteration statistics of one chain.

    Row ``m`` of every per-iteration array describes iteration ``m + 1``;
    ``draws[m]`` is the state after that iteration.  ``n_adapt`` leading
    iterations belong to the adaptation phase.
    """

    sampler: str
    draws: np.ndarray
    accept_stat: np.ndarray
    grads: np.ndarray
    step_size: np.ndarray
    n_adapt: int = 0
    step_size_avg: np.ndarray | None = None
    tree_depth: np.ndarray | None = None
    n_states: np.ndarray | None = None
    n_steps: np.ndarray | None = None
    divergent: np.ndarray | None = None
    max_depth_hit: np.ndarray | None = None
    moved: np.ndarray | None = None
    init_grads: int = 0
    final_step_size: float | None = None
    warnings: list = field(default_factory=list)

    @property
    def n_iter(self):
        return self.draws.shape[0]

    @property
    def dim(self):
        return self.draws.shape[1]

    @property
    def total_grads(self):
        return int(self.grads.sum()) + self.init_grads

    def kept(self, burn_in=None):
        """Draws after discarding ``burn_in`` iterations (default ``n_adapt``)."""
        burn_in = self.n_adapt if burn_in is None else burn_in
        return self.draws[burn_in:]

    def kept_grads(self, burn_in=None):
        burn_in = self.n_adapt if burn_in is None else burn_in
        return int(self.grads[burn_in:].sum())

    def stats_table(self):
        """Per-iteration statistics as an ordered dict of equal-length columns."""
        cols = {
            "iteration": np.arange(1, self.n_iter + 1),
            "accept_stat": self.accept_stat,
            "step_size": self.step_size,
            "grads": self.grads,
        }
        optional = ("step_size_avg", "tree_depth", "n_states", "n_steps", "divergent",
                    "max_depth_hit", "moved")
        for name in optional:
            value = getattr(self, name)
            if value is not None:
                cols[name] = value
        return cols


def storm_warnings(moved, n_adapt, sampler):
    """Flag adaptation windows in which at least 90% of proposals were rejected."""
    messages = []
    for start in range(0, n_adapt - STORM_WINDOW + 1, STORM_WINDOW):
        window = moved[start:start + STORM_WINDOW]
        if 1.0 - window.mean() >= STORM_FRACTION:
            msg = (f"{sampler}: {int((~window).sum())} of {STORM_WINDOW} proposals rejected in "
                   f"adaptation iterations {start + 1}-{start + STORM_WINDOW}")
            logger.warning(msg)
            messages.append(msg)
    return messages
