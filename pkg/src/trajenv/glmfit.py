"""Binomial-logit GLM by maximum likelihood, with correlation screening and
AIC-based subset selection."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

INTERCEPT = "(Intercept)"


class GlmError(ValueError):
    pass


class SeparationError(GlmError):
    """The outcome is (quasi-)perfectly separated; the MLE does not exist."""


class RankError(GlmError):
    """The design or information matrix is singular."""


class ConvergenceError(GlmError):
    pass


def wald_p(z: float) -> float:
    """Two-sided standard-normal tail probability."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def log_likelihood(beta, X, y) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(beta, X, y) -> np.ndarray:
    p = _sigmoid(X @ beta)
    return X.T @ (y - p)


def _sigmoid(eta):
    return np.exp(-np.logaddexp(0.0, -eta))


def find_separation(X, y, tol: float = 1e-7) -> np.ndarray | None:
    """Direction ``b`` along which the data are (quasi-)completely separated.

    Solves ``max sum_i s_i x_i.b`` subject to ``s_i x_i.b >= 0`` and
    ``|b| <= 1`` (``s_i = +1`` for ``y=1``, ``-1`` otherwise).  A positive
    optimum means the likelihood keeps increasing along ``b`` forever.
    Columns are scaled to unit max-abs first so ``tol`` is scale-free.
    """
    X = np.asarray(X, dtype=float)
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1.0
    A = (2 * np.asarray(y, dtype=float) - 1)[:, None] * (X / scale)
    res = linprog(-A.sum(axis=0), A_ub=-A, b_ub=np.zeros(len(A)),
                  bounds=[(-1, 1)] * X.shape[1], method="highs")
    if res.status == 0 and -res.fun > tol * len(A):
        return res.x / scale
    return None


@dataclass
class GlmFit:
    names: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    z_values: np.ndarray
    p_values: np.ndarray
    log_likelihood: float
    aic: float
    n_obs: int
    iterations: int
    positive_label: str = "A"
    score_max: float = 0.0
    history: list[float] = field(default_factory=list, repr=False)

    @property
    def n_params(self) -> int:
        return len(self.coefficients)

    @property
    def included_features(self) -> tuple[str, ...]:
        return tuple(n for n in self.names if n != INTERCEPT)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "positive_label": self.positive_label,
            "encoding": f"y = 1 for cluster {self.positive_label}; flipping the encoding negates every coefficient",
            "n_obs": self.n_obs,
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "iterations": self.iterations,
            "included_features": list(self.included_features),
            "coefficients": [
                {"term": n, "estimate": float(b), "std_error": float(s), "z_value": float(z), "p_value": float(p)}
                for n, b, s, z, p in zip(self.names, self.coefficients, self.std_errors,
                                         self.z_values, self.p_values)
            ],
        }

    def table(self) -> str:
        return format_table(self)


def irls_fit(X, y, names=None, intercept: bool = True, max_iter: int = 100, tol: float = 1e-8,
             positive_label: str = "A", check_separation: bool = True) -> GlmFit:
    """Logistic regression by Newton/IRLS with step-halving.

    Iterates until the max-norm of the score falls below ``tol``.  Standard
    errors come from the inverse information at the optimum.  Raises
    :class:`SeparationError` when no finite MLE exists and
    :class:`RankError` for a singular design.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise GlmError("labels must be 0/1")
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(X.shape[1]))
    if intercept:
        X = np.column_stack([np.ones(len(X)), X])
        names = (INTERCEPT,) + names
    n, k = X.shape
    if n <= k:
        raise GlmError(f"need more observations ({n}) than parameters ({k})")
    if np.linalg.matrix_rank(X) < k:
        raise RankError("design matrix is rank deficient (constant or collinear columns)")
    if y.min() == y.max():
        raise SeparationError("all labels are identical")
    if check_separation and find_separation(X, y) is not None:
        raise SeparationError("outcome is perfectly separated by a linear combination of "
                              f"{', '.join(names)}; drop or merge the separating features")

    beta = np.zeros(k)
    ll = log_likelihood(beta, X, y)
    history = [ll]
    it = 0
    g = score(beta, X, y)
    while np.max(np.abs(g)) >= tol:
        it += 1
        if it > max_iter:
            if np.max(np.abs(beta)) > 1e4:
                raise SeparationError("coefficients diverge (|beta| > 1e4): separated data")
            raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations")
        p = _sigmoid(X @ beta)
        w = p * (1 - p)
        info = X.T @ (w[:, None] * X)
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError:
            raise RankError("singular information matrix") from None
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new = log_likelihood(cand, X, y)
            if ll_new >= ll or t < 1e-10:
                break
            t /= 2
        beta, ll = cand, ll_new
        history.append(ll)
        if np.max(np.abs(beta)) > 1e4:
            raise SeparationError("coefficients diverge (|beta| > 1e4): separated data")
        g = score(beta, X, y)

    p = _sigmoid(X @ beta)
    # the score also vanishes along a separating direction; catch fits that
    # "converged" there by reproducing every label
    if np.max(np.abs(y - p)) < 1e-6:
        raise SeparationError("fitted probabilities are numerically 0 or 1: separated data")
    info = X.T @ ((p * (1 - p))[:, None] * X)
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise RankError("singular information matrix at the optimum") from None
    se = np.sqrt(np.diag(cov))
    z = beta / se
    return GlmFit(
        names=names,
        coefficients=beta,
        std_errors=se,
        z_values=z,
        p_values=np.array([wald_p(v) for v in z]),
        log_likelihood=ll,
        aic=2 * k - 2 * ll,
        n_obs=n,
        iterations=it,
        positive_label=positive_label,
        score_max=float(np.max(np.abs(g))),
        history=history,
    )


# --------------------------------------------------------------------------
# screening and selection


@dataclass
class CorrelationScreen:
    features: tuple[str, ...]
    corr: np.ndarray
    max_corr: float = 0.3
    constant: tuple[str, ...] = ()

    def admissible(self, subset) -> bool:
        idx = [self.features.index(f) for f in subset]
        if any(self.features[i] in self.constant for i in idx):
            return False
        return all(abs(self.corr[a, b]) < self.max_corr for a, b in itertools.combinations(idx, 2))

    def subsets(self):
        """All non-empty admissible subsets, smaller first, in column order."""
        for size in range(1, len(self.features) + 1):
            for sub in itertools.combinations(self.features, size):
                if self.admissible(sub):
                    yield sub


def correlation_screen(X, features, max_corr: float = 0.3) -> CorrelationScreen:
    X = np.asarray(X, dtype=float)
    sd = X.std(axis=0)
    constant = tuple(f for f, s in zip(features, sd) if s == 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.corrcoef(X, rowvar=False)
    corr = np.atleast_2d(corr)
    # constant columns: correlation undefined, treat as perfectly correlated
    bad = sd == 0
    corr[bad, :] = 1.0
    corr[:, bad] = 1.0
    np.fill_diagonal(corr, 1.0)
    return CorrelationScreen(tuple(features), corr, max_corr, constant)


@dataclass
class Candidate:
    subset: tuple[str, ...]
    fit: GlmFit | None
    error: str | None = None


def enumerate_fits(X, y, features, max_corr: float = 0.3, positive_label: str = "A"):
    """Fit every admissible subset; returns ``(screen, candidates)``.

    Subsets whose fit fails (separation, singularity) are kept with the error
    message and no fit.
    """
    X = np.asarray(X, dtype=float)
    features = tuple(features)
    screen = correlation_screen(X, features, max_corr)
    out = []
    for sub in screen.subsets():
        cols = [features.index(f) for f in sub]
        try:
            fit = irls_fit(X[:, cols], y, sub, positive_label=positive_label)
            out.append(Candidate(sub, fit))
        except GlmError as exc:
            out.append(Candidate(sub, None, f"{type(exc).__name__}: {exc}"))
    return screen, out


def select_best(candidates, features) -> GlmFit:
    """Minimum AIC; ties go to the smaller subset, then earlier columns."""
    ok = [c for c in candidates if c.fit is not None]
    if not ok:
        if candidates:
            raise GlmError("no admissible subset could be fitted: " + "; ".join(
                f"{'+'.join(c.subset)}: {c.error}" for c in candidates))
        raise GlmError("no admissible feature subset")
    order = {f: i for i, f in enumerate(features)}
    return min(ok, key=lambda c: (c.fit.aic, len(c.subset), [order[f] for f in c.subset])).fit


def screen_and_select(X, y, features, max_corr: float = 0.3, positive_label: str = "A") -> GlmFit:
    """Best-AIC logistic model among feature subsets with pairwise |r| < ``max_corr``."""
    features = tuple(features)
    if len(features) < 1:
        raise GlmError("no candidate features")
    _, cands = enumerate_fits(X, y, features, max_corr, positive_label)
    return select_best(cands, features)


# --------------------------------------------------------------------------
# output


def _stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "."
    return ""


def format_table(fit: GlmFit) -> str:
    head = ("Fixed effects", "Estimate", "Std. Error", "z value", "Pr(>|z|)")
    rows = []
    for n, b, s, z, p in zip(fit.names, fit.coefficients, fit.std_errors, fit.z_values, fit.p_values):
        ptxt = "<0.001" if p < 0.001 else f"{p:.3f}"
        stars = _stars(p)
        rows.append((n, f"{b:.3f}", f"{s:.3f}", f"{z:.3f}", f"{ptxt} ({stars})" if stars else ptxt))
    widths = [max(len(r[i]) for r in rows + [head]) for i in range(5)]
    fmt = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
    lines = [fmt(head), "-" * len(fmt(head))]
    lines += [fmt(r) for r in rows]
    lines.append(f"AIC = {fit.aic:.2f}   log-likelihood = {fit.log_likelihood:.3f}   n = {fit.n_obs}")
    lines.append(f"y = 1 for cluster {fit.positive_label}; the opposite encoding flips every sign")
    return "\n".join(lines)


def save_fit(fit: GlmFit, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(fit.to_dict(), fh, indent=2)
        fh.write("\n")
