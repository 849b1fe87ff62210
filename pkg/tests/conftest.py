import numpy as np
import pytest

from nuts_engine.diagnostics import MomentReference, ess

ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def ess_standard_error(values, mean, variance):
    """Monte Carlo standard error of the sample mean of ``values`` using ESS."""
    est = ess(values, MomentReference(mean, variance))
    return np.sqrt(variance / est.ess)


def gaussian_moment_errors(draws, cov):
    """Largest |estimate - truth| / SE over the mean vector and covariance entries.

    Covariance entries are estimated as means of (x_i x_j) with zero true
    mean; their variance is S_ii S_jj + S_ij^2 for a Gaussian.
    """
    draws = np.asarray(draws)
    D = draws.shape[1]
    worst = 0.0
    for i in range(D):
        se = ess_standard_error(draws[:, i], 0.0, cov[i, i])
        worst = max(worst, abs(draws[:, i].mean()) / se)
        for j in range(i, D):
            f = draws[:, i] * draws[:, j]
            var = cov[i, i] * cov[j, j] + cov[i, j] ** 2
            se = ess_standard_error(f, cov[i, j], var)
            worst = max(worst, abs(f.mean() - cov[i, j]) / se)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
