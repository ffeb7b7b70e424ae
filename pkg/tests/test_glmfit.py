import math

import numpy as np
import pytest

from trajenv.glmfit import (
    INTERCEPT,
    GlmError,
    RankError,
    SeparationError,
    correlation_screen,
    enumerate_fits,
    find_separation,
    format_table,
    irls_fit,
    log_likelihood,
    screen_and_select,
    wald_p,
)

from oracles import loglik, newton_logit


def draw(rng, beta, n=200, p=1):
    X = rng.normal(size=(n, p))
    eta = beta[0] + X @ np.asarray(beta[1:])
    y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    return X, y


def test_symmetric_intercept_zero():
    x = np.array([-1, -1, -1, 1, 1, 1, 0, 0], float)
    y = np.array([0, 0, 1, 1, 1, 0, 0, 1], float)
    fit = irls_fit(x, y)
    assert fit.coef(INTERCEPT) == pytest.approx(0.0, abs=1e-10)


def test_matches_newton_oracle(rng):
    X, y = draw(rng, (0.5, -1.2))
    fit = irls_fit(X, y, ["x"])
    beta, ll = newton_logit(X, y)
    np.testing.assert_allclose(fit.coefficients, beta, atol=1e-6)
    assert fit.log_likelihood == pytest.approx(ll, abs=1e-8)
    assert fit.score_max < 1e-8


def test_score_matches_finite_differences(rng):
    X, y = draw(rng, (0.2, 0.7, -0.4), p=2)
    fit = irls_fit(X, y)
    Z = np.column_stack([np.ones(len(X)), X])
    h = 1e-5
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (loglik(Z, y, fit.coefficients + e) - loglik(Z, y, fit.coefficients - e)) / (2 * h)
        assert abs(fd) < 1e-5


def test_likelihood_non_decreasing(rng):
    X, y = draw(rng, (1.0, 2.5, -1.5), p=2)
    fit = irls_fit(X, y)
    assert all(b >= a - 1e-12 for a, b in zip(fit.history, fit.history[1:]))


def test_label_flip_negates(rng):
    X, y = draw(rng, (0.3, 1.1, 0.2), p=2)
    a = irls_fit(X, y)
    b = irls_fit(X, 1 - y)
    np.testing.assert_allclose(a.coefficients, -b.coefficients, atol=1e-9)


def test_aic_identity(rng):
    X, y = draw(rng, (0.3, 1.0, 0.0), p=2)
    for cols in ([0], [1], [0, 1]):
        fit = irls_fit(X[:, cols], y)
        assert fit.aic == 2 * fit.n_params - 2 * fit.log_likelihood


def test_wald_p():
    assert wald_p(0.0) == 1.0
    assert wald_p(1.959964) == pytest.approx(0.05, abs=1e-6)
    assert wald_p(2.567) == pytest.approx(0.0103, abs=5e-5)


def test_separation_detected():
    x = np.array([-3, -2, -1, 1, 2, 3], float)
    y = np.array([0, 0, 0, 1, 1, 1], float)
    assert find_separation(np.column_stack([np.ones(6), x]), y) is not None
    with pytest.raises(SeparationError):
        irls_fit(x, y)


def test_divergence_also_reported_without_lp():
    x = np.array([-3, -2, -1, 1, 2, 3], float)
    y = np.array([0, 0, 0, 1, 1, 1], float)
    with pytest.raises(SeparationError):
        irls_fit(x, y, check_separation=False, max_iter=200)


def test_rank_error():
    x = np.arange(10.0)
    with pytest.raises(RankError):
        irls_fit(np.column_stack([x, 2 * x]), (x % 2 == 0).astype(float))


def test_correlated_never_coselected(rng):
    X, y = draw(rng, (0.0, 1.0, 0.5), p=2)
    X = np.column_stack([X[:, 0], X[:, 0] * 3 + 1, X[:, 1]])
    screen, cands = enumerate_fits(X, y, ("a", "b", "c"))
    assert screen.corr[0, 1] == pytest.approx(1.0)
    assert all(not {"a", "b"} <= set(c.subset) for c in cands)


def test_single_feature():
    rng = np.random.default_rng(3)
    X, y = draw(rng, (0.0, 1.0))
    fit = screen_and_select(X, y, ("only",))
    assert fit.included_features == ("only",)
    assert len(format_table(fit).splitlines()) == 6


def test_noise_feature_excluded():
    rng = np.random.default_rng(11)
    X, y = draw(rng, (0.2, 1.5), n=400)
    noise = rng.normal(size=(400, 1))
    small = irls_fit(X, y)
    big = irls_fit(np.column_stack([X, noise]), y)
    gain = big.log_likelihood - small.log_likelihood
    assert big.aic - small.aic == pytest.approx(2 - 2 * gain, abs=1e-9)
    best = screen_and_select(np.column_stack([X, noise]), y, ("signal", "noise"))
    assert best.included_features == ("signal",)


def test_constant_column_screened(rng):
    X, y = draw(rng, (0.0, 1.0))
    screen = correlation_screen(np.column_stack([X, np.ones(len(X))]), ("x", "k"))
    assert list(screen.subsets()) == [("x",)]


def test_bad_labels():
    with pytest.raises(GlmError):
        irls_fit(np.arange(5.0), [0, 1, 2, 0, 1])


def test_log_likelihood_consistent(rng):
    X, y = draw(rng, (0.5, -1.2))
    fit = irls_fit(X, y)
    Z = np.column_stack([np.ones(len(X)), X])
    assert fit.log_likelihood == pytest.approx(log_likelihood(fit.coefficients, Z, y))
    assert math.isfinite(fit.aic)


def test_all_subsets_separated():
    x = np.r_[np.arange(10.0), np.arange(10.0) + 20]
    X = np.column_stack([x, x ** 2 + 0.5 * np.sin(x)])
    y = np.r_[np.zeros(10), np.ones(10)]
    with pytest.raises(GlmError, match="SeparationError"):
        screen_and_select(X, y, ("a", "b"), max_corr=1.01)
