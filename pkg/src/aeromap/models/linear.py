"""Linear regressors on standardized features: OLS, ridge and lasso.

On the standardized design ``Z`` ridge minimises
``||y - b0 - Z beta||**2 + lam * ||beta||**2`` and lasso minimises
``(1/(2n)) * ||y - b0 - Z beta||**2 + lam * ||beta||_1`` (the usual
conventions of the two estimators). The intercept is never penalized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LINEAR_KINDS = ("Univariate", "Multivariate", "Ridge", "Lasso")
UNIVARIATE_FEATURE = "nAODm"

LASSO_TOL = 1e-6
LASSO_MAX_SWEEPS = 10_000


class RankDeficientError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class LinearModel:
    kind: str
    features: tuple
    intercept: float
    coef: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    lam: float = 0.0
    n_iter: int = 0

    def predict_matrix(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
        return self.intercept + Z @ self.coef

    def raw_coefficients(self) -> tuple[float, np.ndarray]:
        """Intercept and slopes in the original feature units."""
        slopes = self.coef / self.scale
        return float(self.intercept - slopes @ self.mean), slopes

    def to_dict(self) -> dict:
        return {"kind": self.kind, "features": list(self.features),
                "intercept": self.intercept, "coef": self.coef.tolist(),
                "mean": self.mean.tolist(), "scale": self.scale.tolist(),
                "lam": self.lam, "n_iter": self.n_iter}

    @classmethod
    def from_dict(cls, d: dict) -> LinearModel:
        return cls(d["kind"], tuple(d["features"]), float(d["intercept"]),
                   np.array(d["coef"], dtype=np.float64), np.array(d["mean"], dtype=np.float64),
                   np.array(d["scale"], dtype=np.float64), float(d["lam"]), int(d["n_iter"]))


def _standardize(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    # constant columns stay all-zero after centring
    scale = np.where(scale > 0, scale, 1.0)
    return (X - mean) / scale, mean, scale


def _soft(x, t):
    return np.sign(x) * max(abs(x) - t, 0.0)


def _lasso_cd(gram, c, lam):
    """Coordinate descent on the covariance form; returns (beta, sweeps)."""
    p = c.size
    beta = np.zeros(p)
    for sweep in range(1, LASSO_MAX_SWEEPS + 1):
        delta = 0.0
        for j in range(p):
            if gram[j, j] == 0:
                continue
            rho = c[j] - gram[j] @ beta + gram[j, j] * beta[j]
            new = _soft(rho, lam) / gram[j, j]
            delta = max(delta, abs(new - beta[j]))
            beta[j] = new
        if delta < LASSO_TOL:
            return beta, sweep
    return beta, LASSO_MAX_SWEEPS


def fit_linear(X, y, features, kind="Multivariate", lam=0.1) -> LinearModel:
    """Fit one of the linear regressors.

    ``Univariate`` uses only the ``nAODm`` column of ``X``. OLS fits raise
    :class:`RankDeficientError` on a singular design.
    """
    if kind not in LINEAR_KINDS:
        raise ValueError(f"linear kind must be one of {LINEAR_KINDS}, got {kind!r}")
    if lam < 0:
        raise ValueError("regularization strength must be non-negative")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    features = tuple(features)
    if kind == "Univariate":
        if UNIVARIATE_FEATURE not in features and len(features) != 1:
            raise ValueError(f"univariate regression needs the {UNIVARIATE_FEATURE} feature")
        j = features.index(UNIVARIATE_FEATURE) if UNIVARIATE_FEATURE in features else 0
        X, features = X[:, [j]], (features[j],)
    n, p = X.shape
    Z, mean, scale = _standardize(X)
    y0 = float(y.mean())
    yc = y - y0
    n_iter = 0
    if kind in ("Univariate", "Multivariate"):
        if n < p + 1 or np.linalg.matrix_rank(Z) < p:
            raise RankDeficientError(
                f"{kind} least squares is rank deficient ({n} samples, {p} features); "
                "use Ridge instead")
        coef, *_ = np.linalg.lstsq(Z, yc, rcond=None)
        lam = 0.0
    elif kind == "Ridge":
        coef = np.linalg.solve(Z.T @ Z + lam * np.eye(p), Z.T @ yc)
    else:
        coef, n_iter = _lasso_cd(Z.T @ Z / n, Z.T @ yc / n, lam)
    return LinearModel(kind, features, y0, np.asarray(coef, dtype=np.float64), mean, scale,
                       float(lam), n_iter)
