import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import ess_standard_error, gaussian_moment_errors
from nuts_engine.chain import storm_warnings
from nuts_engine.errors import ConfigurationError
from nuts_engine.hamiltonian import PhaseState, RngStream
from nuts_engine.hmc import HmcConfig, hmc_iteration, hmc_run, round_half_away, steps_for_length
from nuts_engine.model import FlatModel, FunctionModel, standard_normal


def test_flat_model_always_accepts():
    model = FlatModel(3)
    state = PhaseState.at(model, np.zeros(3))
    rng = RngStream(0)
    for _ in range(50):
        step = hmc_iteration(model, state, 0.7, 9, rng)
        assert step.accept_prob == 1.0 and step.accepted
        state = step.state


def test_gradient_count_per_iteration():
    model = standard_normal(2)
    state = PhaseState.at(model, np.zeros(2))
    assert hmc_iteration(model, state, 0.1, 7, RngStream(0)).grads == 7
    assert hmc_iteration(model, np.zeros(2), 0.1, 7, RngStream(0)).grads == 8


def test_fixed_hmc_variance():
    chain = hmc_run(standard_normal(1), np.zeros(1),
                    HmcConfig(50_000, step_size=0.1, n_steps=10), RngStream(1))
    x = chain.draws[:, 0]
    assert abs(x.var() - 1.0) < 0.05
    assert abs(x.mean()) < 4 * ess_standard_error(x, 0.0, 1.0)


def test_unstable_step_rarely_accepts():
    chain = hmc_run(standard_normal(1), np.zeros(1),
                    HmcConfig(1000, step_size=10.0, n_steps=5), RngStream(2))
    assert chain.accept_stat.mean() < 0.05


def test_fixed_run_equals_repeated_iterations():
    model = standard_normal(2)
    chain = hmc_run(model, np.ones(2), HmcConfig(30, step_size=0.3, n_steps=4), RngStream(3))
    rng = RngStream(3)
    state = PhaseState.at(model, np.ones(2))
    for m in range(30):
        state = hmc_iteration(model, state, 0.3, 4, rng).state
        np.testing.assert_array_equal(chain.draws[m], state.theta)


def test_divergent_proposal_rejected():
    model = FunctionModel(1, lambda t: (-t[0] ** 4, -4 * t[0] ** 3))
    step = hmc_iteration(model, np.array([2.0]), 3.0, 20, RngStream(0))
    assert step.divergent and step.accept_prob == 0.0 and not step.accepted
    assert step.state.theta[0] == 2.0


def test_adaptive_acceptance_on_standard_normal():
    chain = hmc_run(standard_normal(1), np.zeros(1),
                    HmcConfig(2000, 1000, delta=0.65, path_length=1.0), RngStream(4))
    assert abs(chain.accept_stat[1000:].mean() - 0.65) <= 0.05


def test_adaptive_run_is_deterministic_and_freezes_step():
    cfg = HmcConfig(400, 200, delta=0.65, path_length=1.0)
    a = hmc_run(standard_normal(2), np.zeros(2), cfg, RngStream(5))
    b = hmc_run(standard_normal(2), np.zeros(2), cfg, RngStream(5))
    np.testing.assert_array_equal(a.draws, b.draws)
    frozen = a.step_size[201:]
    assert np.all(frozen == frozen[0]) and frozen[0] == a.final_step_size
    assert np.all(a.n_steps == [steps_for_length(1.0, e) for e in a.step_size])


def test_moments_on_identity_gaussian():
    chain = hmc_run(standard_normal(2), np.zeros(2),
                    HmcConfig(21_000, 1000, delta=0.65, path_length=1.0), RngStream(6))
    assert gaussian_moment_errors(chain.kept(), np.eye(2)) < 4.0


@pytest.mark.parametrize("x, expected", [(0.5, 1), (1.5, 2), (2.5, 3), (-0.5, -1), (2.49, 2)])
def test_round_half_away(x, expected):
    assert round_half_away(x) == expected


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_steps_for_length_at_least_one(lam, eps):
    L = steps_for_length(lam, eps)
    assert L >= 1 and (L == 1 or abs(L - lam / eps) <= 0.5)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        HmcConfig(10, 10, delta=0.6, path_length=1.0)
    with pytest.raises(ConfigurationError):
        HmcConfig(10, 0, delta=1.2, path_length=1.0)
    with pytest.raises(ConfigurationError):
        HmcConfig(10, 0, delta=0.6, path_length=0.0)
    with pytest.raises(ConfigurationError):
        HmcConfig(10, 0, step_size=0.1)


def test_storm_warning_windows():
    moved = np.ones(300, dtype=bool)
    moved[100:200] = False
    moved[150] = True
    msgs = storm_warnings(moved, 300, "hmc")
    assert len(msgs) == 1 and "101-200" in msgs[0]
    assert storm_warnings(moved, 100, "hmc") == []
