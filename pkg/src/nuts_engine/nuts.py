"""The No-U-Turn Sampler.

Two tree builders share the stopping rules below: the memory-efficient
recursive builder with incremental proposal sampling (used for real runs)
and a naive builder that keeps every candidate state so the construction
can be inspected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .adapt import DualAveragingState, search_epsilon
from .chain import ChainOutput, storm_warnings
from .errors import ConfigurationError
from .hamiltonian import PhaseState, as_rng, joint_log_density, leapfrog, sample_momentum

DEFAULT_MAX_DEPTH = 10
DEFAULT_DELTA_MAX = 1000.0
NAIVE_MAX_DEPTH = 16


@dataclass(frozen=True)
class NutsConfig:
    """Sampler settings.  ``step_size`` fixes epsilon and disables adaptation."""

    n_iter: int
    n_adapt: int = 0
    delta: float = 0.6
    max_depth: int = DEFAULT_MAX_DEPTH
    delta_max: float = DEFAULT_DELTA_MAX
    step_size: float | None = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigurationError("n_iter must be positive")
        if not 0 <= self.n_adapt < self.n_iter:
            raise ConfigurationError("need 0 <= n_adapt < n_iter")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")
        if self.max_depth < 1:
            raise ConfigurationError("max_depth must be at least 1")
        if not self.delta_max > 0:
            raise ConfigurationError("delta_max must be positive")
        if self.step_size is not None:
            if not self.step_size > 0:
                raise ConfigurationError("step_size must be positive")
            if self.n_adapt:
                raise ConfigurationError("a fixed step_size cannot be combined with n_adapt > 0")


# --------------------------------------------------------------------------
# Stopping rules


def uturn_stop(minus, plus):
    """1 while neither trajectory end moves back toward the other, else 0."""
    span = plus.theta - minus.theta
    return int(span @ minus.r >= 0 and span @ plus.r >= 0)


def _slack_ok(joint, log_u, delta_max):
    # NaN compares false, so a NaN joint density stops the tree
    return joint - log_u >= -delta_max


def divergence_stop(log_u, state, delta_max=DEFAULT_DELTA_MAX):
    """0 when the state's joint log density falls more than ``delta_max`` below log u."""
    if state.divergent or not math.isfinite(state.logp):
        return 0
    return int(_slack_ok(joint_log_density(state), log_u, delta_max))


def _joint(state):
    return -math.inf if state.divergent else joint_log_density(state)


def _accept_stat(joint, h0):
    diff = joint - h0
    if diff >= 0:
        return 1.0
    return math.exp(diff) if diff > -math.inf else 0.0


# --------------------------------------------------------------------------
# Efficient tree building


@dataclass(slots=True)
class TreeOutcome:
    """Result of building one subtree.

    ``n_valid`` counts slice-admissible leaves, ``keep_going`` is the stop
    indicator (0 = stop), ``alpha_sum / n_alpha`` is the mean acceptance
    statistic over the leaves built.  ``n_alpha`` equals the number of
    leapfrog steps spent.
    """

    minus: PhaseState
    plus: PhaseState
    proposal: PhaseState
    n_valid: int
    keep_going: int
    alpha_sum: float
    n_alpha: int
    divergent: bool = False


def _build_tree(model, state, log_u, v, j, eps, h0, rng, delta_max):
    if j == 0:
        new = leapfrog(model, state, v * eps)
        joint = _joint(new)
        ok = _slack_ok(joint, log_u, delta_max)
        return TreeOutcome(new, new, new, int(log_u <= joint), int(ok),
                           _accept_stat(joint, h0), 1, not ok)

    first = _build_tree(model, state, log_u, v, j - 1, eps, h0, rng, delta_max)
    if not first.keep_going:
        return first
    if v == -1:
        second = _build_tree(model, first.minus, log_u, v, j - 1, eps, h0, rng, delta_max)
        minus, plus = second.minus, first.plus
    else:
        second = _build_tree(model, first.plus, log_u, v, j - 1, eps, h0, rng, delta_max)
        minus, plus = first.minus, second.plus
    total = first.n_valid + second.n_valid
    proposal = first.proposal
    if second.n_valid > 0 and rng.uniform() * total < second.n_valid:
        proposal = second.proposal
    keep_going = second.keep_going and uturn_stop(minus, plus)
    return TreeOutcome(minus, plus, proposal, total, int(keep_going),
                       first.alpha_sum + second.alpha_sum, first.n_alpha + second.n_alpha,
                       second.divergent)


def build_tree(model, state, log_u, v, j, eps, init, rng, delta_max=DEFAULT_DELTA_MAX):
    """Build a depth-``j`` subtree of ``2**j`` leapfrog steps in direction ``v``.

    ``init`` is the iteration's starting state (with its resampled momentum);
    the acceptance statistic of every leaf is measured against it.  The
    second half is skipped as soon as the first half signals a stop.
    """
    if v not in (-1, 1):
        raise ConfigurationError("direction must be -1 or +1")
    return _build_tree(model, state, log_u, v, j, eps, joint_log_density(init), rng, delta_max)


class NutsStep(NamedTuple):
    state: PhaseState
    tree_depth: int
    n_states: int
    n_valid: int
    accept_stat: float
    grads: int
    divergent: bool
    max_depth_hit: bool
    moved: bool


def nuts_iteration(model, theta_prev, eps, rng, max_depth=DEFAULT_MAX_DEPTH,
                   delta_max=DEFAULT_DELTA_MAX):
    """One NUTS transition with step size ``eps``.

    ``n_states`` is the number of phase states visited (leapfrog steps plus
    the start); ``accept_stat`` is the mean acceptance statistic over the
    final doubling, the quantity the step-size controller consumes.
    """
    grads = 0
    if isinstance(theta_prev, PhaseState):
        current = theta_prev
    else:
        current = PhaseState.at(model, theta_prev)
        grads += 1
    start = current.with_momentum(sample_momentum(model.dim, rng))
    h0 = joint_log_density(start)
    log_u = h0 + math.log(rng.uniform_open_left())

    minus = plus = start
    chosen = current
    n = 1
    keep_going = 1
    depth = 0
    alpha_sum, n_alpha = 0.0, 1
    divergent = False
    leapfrogs = 0
    while keep_going and depth < max_depth:
        v = rng.direction()
        if v == -1:
            tree = _build_tree(model, minus, log_u, v, depth, eps, h0, rng, delta_max)
            minus = tree.minus
        else:
            tree = _build_tree(model, plus, log_u, v, depth, eps, h0, rng, delta_max)
            plus = tree.plus
        leapfrogs += tree.n_alpha
        if tree.keep_going and rng.uniform() * n < tree.n_valid:
            chosen = tree.proposal
        n += tree.n_valid
        keep_going = tree.keep_going and uturn_stop(minus, plus)
        depth += 1
        alpha_sum, n_alpha = tree.alpha_sum, tree.n_alpha
        divergent = tree.divergent

    return NutsStep(chosen, depth, leapfrogs + 1, n, alpha_sum / n_alpha, grads + leapfrogs,
                    divergent, bool(keep_going), chosen is not current)


# --------------------------------------------------------------------------
# Naive tree building with explicit candidate sets


def _naive_build_tree(model, state, log_u, v, j, eps, delta_max):
    """Returns (minus, plus, candidates, keep_going, visited)."""
    if j == 0:
        new = leapfrog(model, state, v * eps)
        joint = _joint(new)
        candidates = [new] if log_u <= joint else []
        return new, new, candidates, int(_slack_ok(joint, log_u, delta_max)), [new]
    minus, plus, cands, s1, visited = _naive_build_tree(model, state, log_u, v, j - 1, eps,
                                                        delta_max)
    if v == -1:
        minus, _, cands2, s2, visited2 = _naive_build_tree(model, minus, log_u, v, j - 1, eps,
                                                           delta_max)
    else:
        _, plus, cands2, s2, visited2 = _naive_build_tree(model, plus, log_u, v, j - 1, eps,
                                                          delta_max)
    keep_going = s1 and s2 and uturn_stop(minus, plus)
    return minus, plus, cands + cands2, int(keep_going), visited + visited2


class NaiveNutsStep(NamedTuple):
    state: PhaseState
    candidate_set_size: int
    candidates: list
    start: PhaseState
    log_u: float
    tree_depth: int
    n_states: int
    accept_stat: float
    grads: int
    divergent: bool
    max_depth_hit: bool


def naive_nuts_iteration(model, theta_prev, eps, rng, max_depth=DEFAULT_MAX_DEPTH,
                         delta_max=DEFAULT_DELTA_MAX):
    """One NUTS transition that materializes the candidate set and samples it uniformly.

    Every visited state is stored, so ``max_depth`` is limited to 16.
    """
    if max_depth > NAIVE_MAX_DEPTH:
        raise ConfigurationError(f"naive NUTS stores every state; max_depth must be <= "
                                 f"{NAIVE_MAX_DEPTH}")
    grads = 0
    if isinstance(theta_prev, PhaseState):
        current = theta_prev
    else:
        current = PhaseState.at(model, theta_prev)
        grads += 1
    start = current.with_momentum(sample_momentum(model.dim, rng))
    h0 = joint_log_density(start)
    log_u = h0 + math.log(rng.uniform_open_left())

    minus = plus = start
    candidates = [start]
    keep_going = 1
    depth = 0
    visited = [start]
    leapfrogs = 0
    with np.errstate(invalid="ignore", over="ignore"):
        while keep_going and depth < max_depth:
            v = rng.direction()
            if v == -1:
                minus, _, new_cands, s, visited = _naive_build_tree(model, minus, log_u, v, depth,
                                                                   eps, delta_max)
            else:
                _, plus, new_cands, s, visited = _naive_build_tree(model, plus, log_u, v, depth,
                                                                  eps, delta_max)
            leapfrogs += len(visited)
            if s:
                candidates.extend(new_cands)
            keep_going = s and uturn_stop(minus, plus)
            depth += 1
    divergent = not all(_slack_ok(_joint(st), log_u, delta_max) for st in visited)
    alpha = sum(_accept_stat(_joint(st), h0) for st in visited) / len(visited)
    pick = candidates[rng.index(len(candidates))]
    if pick is start:
        pick = current
    return NaiveNutsStep(pick, len(candidates), candidates, start, log_u, depth, leapfrogs + 1,
                         alpha, grads + leapfrogs, divergent, bool(keep_going))


# --------------------------------------------------------------------------


def nuts_run(model, theta0, config, rng=None, variant="efficient"):
    """Run NUTS for ``config.n_iter`` iterations, adapting epsilon for ``n_adapt``.

    ``variant`` selects the ``"efficient"`` or ``"naive"`` tree builder.
    """
    if variant not in ("efficient", "naive"):
        raise ConfigurationError(f"unknown NUTS variant {variant!r}")
    if variant == "naive" and config.max_depth > NAIVE_MAX_DEPTH:
        raise ConfigurationError(f"naive NUTS needs max_depth <= {NAIVE_MAX_DEPTH}")
    step_fn = nuts_iteration if variant == "efficient" else naive_nuts_iteration
    rng = as_rng(rng)
    state = PhaseState.at(model, theta0)
    M = config.n_iter
    draws = np.empty((M, model.dim))
    accept = np.empty(M)
    grads = np.empty(M, dtype=np.int64)
    eps_used = np.empty(M)
    eps_avg = np.empty(M)
    depth = np.empty(M, dtype=np.int64)
    n_states = np.empty(M, dtype=np.int64)
    divergent = np.zeros(M, dtype=bool)
    capped = np.zeros(M, dtype=bool)
    moved = np.zeros(M, dtype=bool)

    init_grads = 1
    controller = None
    if config.step_size is None:
        eps, spent = search_epsilon(model, state, rng)
        init_grads += spent
        controller = DualAveragingState.start(eps, config.delta)
    else:
        eps = config.step_size

    for m in range(1, M + 1):
        step = step_fn(model, state, eps, rng, config.max_depth, config.delta_max)
        i = m - 1
        moved[i] = step.state is not state
        state = step.state
        draws[i] = state.theta
        accept[i] = step.accept_stat
        grads[i] = step.grads
        eps_used[i] = eps
        depth[i] = step.tree_depth
        n_states[i] = step.n_states
        divergent[i] = step.divergent
        capped[i] = step.max_depth_hit
        if controller is not None:
            if m <= config.n_adapt:
                controller = controller.update(step.accept_stat)
                eps = controller.step_size
            else:
                eps = controller.final_step_size
            eps_avg[i] = controller.final_step_size
        else:
            eps_avg[i] = eps

    name = "nuts" if variant == "efficient" else "nuts-naive"
    warnings = storm_warnings(moved, config.n_adapt, name)
    hits = int(capped[config.n_adapt:].sum())
    if hits:
        warnings.append(f"{name}: maximum tree depth {config.max_depth} reached in {hits} "
                        "post-adaptation iterations; consider a larger max_depth")
    final = controller.final_step_size if controller is not None else config.step_size
    return ChainOutput(
        sampler=name, draws=draws, accept_stat=accept, grads=grads, step_size=eps_used,
        n_adapt=config.n_adapt, step_size_avg=eps_avg, tree_depth=depth, n_states=n_states,
        divergent=divergent, max_depth_hit=capped, moved=moved, init_grads=init_grads,
        final_step_size=final, warnings=warnings,
    )
