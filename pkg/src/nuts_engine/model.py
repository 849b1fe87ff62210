"""Target distributions over unconstrained coordinates.

Every model exposes ``dim``, ``name`` and ``logp_and_grad(theta)`` returning
the log density (up to a constant) and its gradient.  Constrained quantities
(variances, scales, degrees of freedom) are sampled on the log scale and the
log-Jacobian of that change of variable is folded into the density.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln, digamma

from .errors import ConfigurationError, EvaluationError

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-5


class TargetModel:
    """Base class for log densities with analytic gradients.

    Subclasses implement ``logp_and_grad``.  Instances are treated as
    immutable once built, so one model can be shared by many chains.
    """

    name = "model"
    dim: int

    def logp_and_grad(self, theta):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, dim={self.dim})"


def eval_model(model, theta):
    """Evaluate ``model`` at ``theta`` and validate the result.

    Returns ``(logp, grad)``.  ``logp == -inf`` is passed through as an
    out-of-support signal; any other non-finite value raises
    :class:`EvaluationError` carrying the offending coordinate.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.dim,):
        raise ConfigurationError(
            f"{model.name}: expected position of shape ({model.dim},), got {theta.shape}"
        )
    bad = np.flatnonzero(~np.isfinite(theta))
    if bad.size:
        raise EvaluationError(f"non-finite position coordinate {bad[0]}", index=int(bad[0]))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logp, grad = model.logp_and_grad(theta)
    logp = float(logp)
    if np.isnan(logp) or logp == np.inf:
        raise EvaluationError(f"{model.name}: log density is {logp}")
    if logp == -np.inf:
        return logp, np.zeros(model.dim)
    grad = np.asarray(grad, dtype=float)
    bad = np.flatnonzero(~np.isfinite(grad))
    if bad.size:
        raise EvaluationError(f"{model.name}: non-finite gradient at coordinate {bad[0]}",
                              index=int(bad[0]))
    return logp, grad


@dataclass(frozen=True)
class GradientReport:
    analytic: np.ndarray
    numeric: np.ndarray
    rel_error: np.ndarray
    max_error: float
    flagged: tuple

    @property
    def ok(self):
        return not self.flagged


def check_gradient(model, theta, step=1e-5, tol=GRADIENT_TOLERANCE):
    """Compare the analytic gradient with central finite differences.

    The probe for coordinate ``d`` is ``step * (1 + |theta_d|)``.  The error
    is ``|analytic - numeric| / max(1, |analytic|, |numeric|)`` so that it is
    relative for large gradients and absolute near zero.
    """
    if step <= 0:
        raise ConfigurationError("step must be positive")
    theta = np.asarray(theta, dtype=float)
    _, analytic = eval_model(model, theta)
    numeric = np.empty(model.dim)
    for d in range(model.dim):
        h = step * (1.0 + abs(theta[d]))
        up = theta.copy()
        up[d] += h
        down = theta.copy()
        down[d] -= h
        lp_up, _ = eval_model(model, up)
        lp_down, _ = eval_model(model, down)
        if not (np.isfinite(lp_up) and np.isfinite(lp_down)):
            raise EvaluationError(f"non-finite density while probing coordinate {d}", index=d)
        numeric[d] = (lp_up - lp_down) / (2.0 * h)
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    rel = np.abs(analytic - numeric) / scale
    flagged = tuple(int(i) for i in np.flatnonzero(rel > tol))
    return GradientReport(analytic, numeric, rel, float(rel.max(initial=0.0)), flagged)


# --------------------------------------------------------------------------
# Simple targets


class FlatModel(TargetModel):
    """Improper uniform density, L(theta) = 0 everywhere."""

    name = "flat"

    def __init__(self, dim):
        if dim < 1:
            raise ConfigurationError("dim must be positive")
        self.dim = int(dim)

    def logp_and_grad(self, theta):
        return 0.0, np.zeros(self.dim)


class FunctionModel(TargetModel):
    """Adapter for a user callable ``fn(theta) -> (logp, grad)``."""

    def __init__(self, dim, fn, name="function"):
        self.dim = int(dim)
        self.fn = fn
        self.name = name

    def logp_and_grad(self, theta):
        return self.fn(theta)


class CountingModel(TargetModel):
    """Wraps a model and counts density/gradient evaluations."""

    def __init__(self, model):
        self.model = model
        self.dim = model.dim
        self.name = model.name
        self.count = 0

    def logp_and_grad(self, theta):
        self.count += 1
        return self.model.logp_and_grad(theta)


class LogScaleExponentialModel(TargetModel):
    """Exponential(rate) prior on a positive quantity, sampled as its log.

    For ``x = exp(z)`` the density in ``z`` is ``-rate * exp(z) + z``.
    """

    name = "log-exponential"

    def __init__(self, rate=0.01):
        if rate <= 0:
            raise ConfigurationError("rate must be positive")
        self.rate = float(rate)
        self.dim = 1

    def logp_and_grad(self, theta):
        z = theta[0]
        ez = np.exp(z)
        return -self.rate * ez + z, np.array([1.0 - self.rate * ez])


# --------------------------------------------------------------------------
# Multivariate normal


@dataclass(frozen=True)
class MvnSpec:
    precision: np.ndarray
    cholesky: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.array(self.precision, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigurationError("precision must be a square matrix")
        if not np.allclose(A, A.T, rtol=0.0, atol=1e-12):
            raise ConfigurationError("precision matrix is not symmetric")
        A = 0.5 * (A + A.T)
        try:
            chol = np.linalg.cholesky(A)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError("precision matrix is not positive definite") from exc
        A.setflags(write=False)
        object.__setattr__(self, "precision", A)
        object.__setattr__(self, "cholesky", chol)

    @property
    def dim(self):
        return self.precision.shape[0]

    @property
    def covariance(self):
        return np.linalg.inv(self.precision)


class MvnModel(TargetModel):
    """Zero-mean Gaussian with precision A: L = -theta' A theta / 2."""

    name = "mvn"

    def __init__(self, spec):
        if not isinstance(spec, MvnSpec):
            spec = MvnSpec(np.asarray(spec, dtype=float))
        self.spec = spec
        self.precision = spec.precision
        self.dim = spec.dim

    def logp_and_grad(self, theta):
        g = -(self.precision @ theta)
        return 0.5 * float(theta @ g), g


def standard_normal(dim=1):
    return MvnModel(np.eye(dim))


def wishart_bartlett(dim, dof, rng):
    """Draw W ~ Wishart(I, dof) through the Bartlett decomposition."""
    if dof < dim:
        raise ConfigurationError(f"Wishart degrees of freedom {dof} < dimension {dim}")
    B = np.zeros((dim, dim))
    # chi draws on the diagonal use dof - i degrees of freedom
    B[np.diag_indices(dim)] = np.sqrt(rng.chisquare(dof - np.arange(dim)))
    rows, cols = np.tril_indices(dim, k=-1)
    B[rows, cols] = rng.standard_normal(rows.size)
    return B @ B.T


def wishart_precision(dim, seed, dof=None, max_attempts=100):
    """Deterministic Wishart precision matrix; reseeds if not positive definite."""
    dof = dim if dof is None else dof
    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed + attempt)
        A = wishart_bartlett(dim, dof, rng)
        try:
            return MvnSpec(A)
        except ConfigurationError:
            logger.warning("Wishart draw with seed %d not positive definite; retrying", seed + attempt)
    raise ConfigurationError("could not generate a positive-definite precision matrix")


# --------------------------------------------------------------------------
# Logistic regression


@dataclass(frozen=True)
class LogRegData:
    predictors: np.ndarray
    labels: np.ndarray
    prior_variance: float = 100.0

    def __post_init__(self):
        X = np.asarray(self.predictors, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2:
            raise ConfigurationError("predictors must be an N x K matrix")
        if y.shape != (X.shape[0],):
            raise ConfigurationError("labels must have one entry per row of predictors")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ConfigurationError("labels must be -1 or +1")
        if self.prior_variance <= 0:
            raise ConfigurationError("prior_variance must be positive")
        object.__setattr__(self, "predictors", X)
        object.__setattr__(self, "labels", y)

    @property
    def n_obs(self):
        return self.predictors.shape[0]

    @property
    def n_predictors(self):
        return self.predictors.shape[1]


def _logistic_loglik(X, y, alpha, beta):
    """Sum of log sigmoid(y * (alpha + X beta)) and its gradient pieces."""
    margin = y * (alpha + X @ beta)
    loglik = -np.logaddexp(0.0, -margin).sum()
    w = y * expit(-margin)
    return loglik, w.sum(), X.T @ w


class LogisticRegressionModel(TargetModel):
    """Bayesian logistic regression with N(0, sigma^2) priors; theta = (alpha, beta)."""

    name = "logreg"

    def __init__(self, data):
        self.data = data
        self.X = data.predictors
        self.y = data.labels
        self.prior_variance = float(data.prior_variance)
        self.dim = data.n_predictors + 1

    def logp_and_grad(self, theta):
        alpha, beta = theta[0], theta[1:]
        loglik, g_alpha, g_beta = _logistic_loglik(self.X, self.y, alpha, beta)
        logp = loglik - 0.5 * float(theta @ theta) / self.prior_variance
        grad = np.empty(self.dim)
        grad[0] = g_alpha
        grad[1:] = g_beta
        grad -= theta / self.prior_variance
        return logp, grad


@dataclass(frozen=True)
class HlrSpec:
    base_data: LogRegData
    rate: float = 0.01

    def __post_init__(self):
        if self.rate <= 0:
            raise ConfigurationError("rate must be positive")


class HierarchicalLogisticModel(TargetModel):
    """Logistic regression on pairwise-interaction features with a learned prior variance.

    theta = (alpha, beta_1..beta_P, log sigma^2); sigma^2 ~ Exponential(rate)
    and alpha, beta_p | sigma^2 ~ N(0, sigma^2).
    """

    name = "hlr"

    def __init__(self, spec):
        from .datasets import expand_interactions

        self.spec = spec
        self.X = expand_interactions(spec.base_data.predictors)
        self.y = spec.base_data.labels
        self.rate = float(spec.rate)
        self.n_coef = self.X.shape[1] + 1
        self.dim = self.n_coef + 1

    def logp_and_grad(self, theta):
        coef = theta[:-1]
        log_var = theta[-1]
        var = np.exp(log_var)
        loglik, g_alpha, g_beta = _logistic_loglik(self.X, self.y, coef[0], coef[1:])
        ss = float(coef @ coef)
        logp = loglik - 0.5 * ss / var - 0.5 * self.n_coef * log_var - self.rate * var + log_var
        grad = np.empty(self.dim)
        grad[0] = g_alpha
        grad[1:-1] = g_beta
        grad[:-1] -= coef / var
        grad[-1] = 0.5 * ss / var - 0.5 * self.n_coef - self.rate * var + 1.0
        return logp, grad


# --------------------------------------------------------------------------
# Stochastic volatility


@dataclass(frozen=True)
class SvData:
    log_return_diffs: np.ndarray
    rate: float = 0.01

    def __post_init__(self):
        x = np.asarray(self.log_return_diffs, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise ConfigurationError("need at least two prices (one log-return difference)")
        if not np.all(np.isfinite(x)):
            raise ConfigurationError("log-return differences must be finite")
        if self.rate <= 0:
            raise ConfigurationError("rate must be positive")
        object.__setattr__(self, "log_return_diffs", x)

    @property
    def n_times(self):
        return self.log_return_diffs.size + 1


class StochasticVolatilityModel(TargetModel):
    """Random-walk log-volatility with Student-t returns, random-walk precision integrated out.

    theta = (log s_1, ..., log s_T, log nu).  The return difference
    ``x_i = log y_i - log y_{i-1}`` (i = 2..T) has density ``t_nu(x_i / s_i) / s_i``;
    s_1 and nu carry Exponential(rate) priors; integrating the precision
    tau ~ Exponential(rate) out of the random walk leaves
    ``(rate + 0.5 * sum (log s_i - log s_{i-1})^2) ** (-(T + 1) / 2)``.
    """

    name = "sv"

    def __init__(self, data):
        self.data = data
        self.x = data.log_return_diffs
        self.x2 = self.x ** 2
        self.rate = float(data.rate)
        self.n_times = data.n_times
        self.dim = self.n_times + 1
        self._walk_power = 0.5 * (self.n_times + 1)

    def logp_and_grad(self, theta):
        h = theta[:-1]
        log_nu = theta[-1]
        nu = np.exp(log_nu)
        s1 = np.exp(h[0])
        grad = np.zeros(self.dim)

        logp = -self.rate * nu + log_nu - self.rate * s1 + h[0]
        grad[0] = 1.0 - self.rate * s1
        dlog_nu = 1.0 - self.rate * nu

        dh = np.diff(h)
        walk = self.rate + 0.5 * float(dh @ dh)
        logp -= self._walk_power * np.log(walk)
        coef = self._walk_power / walk
        grad[1:-1] -= coef * dh
        grad[:-2] += coef * dh

        # t_nu(z) / s with z = x / s, on s_2..s_T
        hs = h[1:]
        z2 = self.x2 * np.exp(-2.0 * hs)
        log1p_term = np.log1p(z2 / nu)
        n_obs = self.x.size
        logp += n_obs * (gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu)
                         - 0.5 * np.log(np.pi * nu))
        logp -= 0.5 * (nu + 1.0) * log1p_term.sum() + hs.sum()
        grad[1:-1] += (nu + 1.0) * z2 / (nu + z2) - 1.0
        dnu = n_obs * (0.5 * digamma(0.5 * (nu + 1.0)) - 0.5 * digamma(0.5 * nu) - 0.5 / nu)
        dnu += np.sum(-0.5 * log1p_term + 0.5 * (nu + 1.0) * z2 / (nu * (nu + z2)))
        grad[-1] = dlog_nu + nu * dnu
        return float(logp), grad


# --------------------------------------------------------------------------


def build_target(kind, **options):
    """Construct one of the built-in targets.

    ``kind`` is ``"mvn"`` (``dim``, ``seed``, optional ``dof``), ``"logreg"``
    (``data``), ``"hlr"`` (``data``, optional ``rate``), ``"sv"`` (``data``),
    ``"flat"`` (``dim``) or ``"normal"`` (``dim``).
    """
    kind = kind.lower()
    if kind == "mvn":
        return MvnModel(wishart_precision(int(options["dim"]), int(options.get("seed", 0)),
                                          options.get("dof")))
    if kind == "logreg":
        return LogisticRegressionModel(options["data"])
    if kind == "hlr":
        data = options["data"]
        if isinstance(data, LogRegData):
            data = HlrSpec(data, rate=float(options.get("rate", 0.01)))
        return HierarchicalLogisticModel(data)
    if kind == "sv":
        return StochasticVolatilityModel(options["data"])
    if kind == "flat":
        return FlatModel(int(options.get("dim", 1)))
    if kind == "normal":
        return standard_normal(int(options.get("dim", 1)))
    raise ConfigurationError(f"unknown model kind {kind!r}")
