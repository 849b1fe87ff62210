"""scikit-learn style wrappers around the chain runners.

``fit(model, theta0)`` runs one chain and stores ``chain_`` (the full
:class:`ChainOutput`), ``draws_`` (post-adaptation draws) and
``step_size_``.  Parameters follow the usual ``get_params``/``set_params``
contract, so samplers can be cloned and swept.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .baselines import RwmConfig, gibbs_mvn_run, rwm_run, rwm_tune_scale
from .errors import ConfigurationError
from .hmc import HmcConfig, hmc_run
from .model import MvnModel
from .nuts import NutsConfig, nuts_run
from .validation import check_model, check_position, check_random_state, check_unit_interval


class _SamplerMixin:
    def _store(self, chain):
        self.chain_ = chain
        self.draws_ = chain.kept()
        self.step_size_ = chain.final_step_size
        self.n_grads_ = chain.total_grads
        return self

    def sample_mean(self):
        check_is_fitted(self, "draws_")
        return self.draws_.mean(axis=0)


class NUTSSampler(_SamplerMixin, BaseEstimator):
    def __init__(self, n_iter=2000, n_adapt=1000, delta=0.6, max_depth=10, step_size=None,
                 variant="efficient", random_state=None):
        self.n_iter = n_iter
        self.n_adapt = n_adapt
        self.delta = delta
        self.max_depth = max_depth
        self.step_size = step_size
        self.variant = variant
        self.random_state = random_state

    def fit(self, model, theta0=None):
        model = check_model(model)
        check_unit_interval(self.delta, "delta")
        config = NutsConfig(self.n_iter, 0 if self.step_size else self.n_adapt, self.delta,
                            self.max_depth, step_size=self.step_size)
        chain = nuts_run(model, check_position(theta0, model.dim), config,
                         check_random_state(self.random_state), variant=self.variant)
        return self._store(chain)


class HMCSampler(_SamplerMixin, BaseEstimator):
    """Dual-averaged HMC when ``path_length`` is set, else fixed ``step_size``/``n_steps``."""

    def __init__(self, n_iter=2000, n_adapt=1000, delta=0.65, path_length=1.0, step_size=None,
                 n_steps=None, random_state=None):
        self.n_iter = n_iter
        self.n_adapt = n_adapt
        self.delta = delta
        self.path_length = path_length
        self.step_size = step_size
        self.n_steps = n_steps
        self.random_state = random_state

    def fit(self, model, theta0=None):
        model = check_model(model)
        if self.path_length is not None:
            config = HmcConfig(self.n_iter, self.n_adapt, delta=self.delta,
                               path_length=self.path_length)
        else:
            config = HmcConfig(self.n_iter, 0, step_size=self.step_size, n_steps=self.n_steps)
        chain = hmc_run(model, check_position(theta0, model.dim), config,
                        check_random_state(self.random_state))
        return self._store(chain)


class RWMSampler(_SamplerMixin, BaseEstimator):
    """Random-walk Metropolis; ``proposal_scale=None`` tunes toward ``target_rate``."""

    def __init__(self, n_iter=10000, proposal_scale=None, target_rate=0.234, random_state=None):
        self.n_iter = n_iter
        self.proposal_scale = proposal_scale
        self.target_rate = target_rate
        self.random_state = random_state

    def fit(self, model, theta0=None):
        model = check_model(model)
        theta0 = check_position(theta0, model.dim)
        rng = check_random_state(self.random_state)
        scale = self.proposal_scale
        if scale is None:
            scale = rwm_tune_scale(model, theta0, check_unit_interval(self.target_rate,
                                                                      "target_rate"),
                                   rng.substream(1))
        self.proposal_scale_ = scale
        return self._store(rwm_run(model, theta0, RwmConfig(scale, self.n_iter), rng))


class GibbsSampler(_SamplerMixin, BaseEstimator):
    def __init__(self, n_sweeps=10000, random_state=None):
        self.n_sweeps = n_sweeps
        self.random_state = random_state

    def fit(self, model, theta0=None):
        if not isinstance(model, MvnModel):
            raise ConfigurationError("Gibbs sampling is only available for Gaussian targets")
        chain = gibbs_mvn_run(model.spec, check_position(theta0, model.dim), self.n_sweeps,
                              check_random_state(self.random_state))
        return self._store(chain)
