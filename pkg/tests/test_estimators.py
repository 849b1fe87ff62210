import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nuts_engine.errors import ConfigurationError
from nuts_engine.estimators import GibbsSampler, HMCSampler, NUTSSampler, RWMSampler
from nuts_engine.model import build_target, standard_normal
from nuts_engine.validation import check_position, check_random_state


@pytest.mark.parametrize("est", [
    NUTSSampler(n_iter=300, n_adapt=150, random_state=0),
    HMCSampler(n_iter=300, n_adapt=150, random_state=0),
    HMCSampler(n_iter=300, n_adapt=0, path_length=None, step_size=0.3, n_steps=4,
               random_state=0),
    RWMSampler(n_iter=300, proposal_scale=1.0, random_state=0),
    GibbsSampler(n_sweeps=300, random_state=0),
])
def test_fit_sets_attributes_and_is_reproducible(est):
    model = build_target("mvn", dim=2, seed=1)
    est.fit(model)
    again = clone(est).fit(model)
    np.testing.assert_array_equal(est.draws_, again.draws_)
    assert est.draws_.shape[1] == 2 and est.n_grads_ > 0
    assert est.sample_mean().shape == (2,)


def test_params_round_trip():
    est = NUTSSampler(delta=0.8, max_depth=6)
    assert est.get_params()["delta"] == 0.8
    est.set_params(delta=0.7)
    assert clone(est).delta == 0.7


def test_unfitted_mean_raises():
    with pytest.raises(NotFittedError):
        NUTSSampler().sample_mean()


def test_rwm_tunes_scale_when_missing():
    est = RWMSampler(n_iter=500, random_state=1).fit(standard_normal(3))
    assert est.proposal_scale_ > 0


def test_gibbs_needs_gaussian():
    from nuts_engine.datasets import synthetic_logreg
    from nuts_engine.model import LogisticRegressionModel

    with pytest.raises(ConfigurationError):
        GibbsSampler(10).fit(LogisticRegressionModel(synthetic_logreg(10, 2, 0)))


def test_bad_inputs():
    with pytest.raises(ConfigurationError):
        NUTSSampler().fit("not a model")
    with pytest.raises(ConfigurationError):
        NUTSSampler(delta=1.5).fit(standard_normal(1))
    with pytest.raises(ConfigurationError):
        check_position([1.0, np.inf], 2)
    with pytest.raises(ConfigurationError):
        check_position([1.0], 2)
    with pytest.raises(ConfigurationError):
        check_random_state(-1)
