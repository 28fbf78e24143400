"""L2-regularized linear models: ridge regression and logistic regression."""

from __future__ import annotations

import warnings

import numpy as np

from ..errors import DataFormatError


class RidgeRegression:
    """Closed-form ridge: solves (Xc'Xc + alpha*I) w = Xc'yc on centered
    data; the intercept restores the means.  alpha=0 requires full column
    rank and degenerates to ordinary least squares."""

    def __init__(self, alpha: float = 1.0):
        if alpha < 0:
            raise DataFormatError("alpha must be >= 0")
        self.alpha = alpha
        self.weights_: np.ndarray | None = None
        self.intercept_: float = 0.0

    def fit(self, X, y) -> "RidgeRegression":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(X) == 0:
            raise DataFormatError("X must be non-empty")
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        Xc = X - x_mean
        yc = y - y_mean
        p = X.shape[1]
        if self.alpha == 0 and np.linalg.matrix_rank(Xc) < p:
            raise DataFormatError("alpha=0 requires X of full column rank")
        gram = Xc.T @ Xc + self.alpha * np.eye(p)
        try:
            self.weights_ = np.linalg.solve(gram, Xc.T @ yc)
        except np.linalg.LinAlgError as exc:
            raise DataFormatError(f"singular ridge system: {exc}") from exc
        self.intercept_ = y_mean - float(self.weights_ @ x_mean)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return X @ self.weights_ + self.intercept_

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "weights": self.weights_.tolist(),
                "intercept": self.intercept_}

    @classmethod
    def from_dict(cls, d: dict) -> "RidgeRegression":
        model = cls(alpha=d["alpha"])
        model.weights_ = np.asarray(d["weights"], dtype=np.float64)
        model.intercept_ = d["intercept"]
        return model


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


class LogisticRegression:
    """Binary logistic regression minimizing ||w||^2/(2C) + sum log-loss.

    Deterministic full-batch Newton iterations with step halving; the
    intercept is not penalized.  Stops when the gradient norm drops below
    tol; running past max_iter warns instead of raising.
    """

    def __init__(self, C: float = 1.0, tol: float = 1e-8, max_iter: int = 200):
        if C <= 0:
            raise DataFormatError("C must be > 0")
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.weights_: np.ndarray | None = None
        self.intercept_: float = 0.0
        self.converged_: bool = False
        self.n_iter_: int = 0

    def fit(self, X, y) -> "LogisticRegression":
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64).ravel()
        if len(np.unique(y)) < 2:
            raise DataFormatError("training target has a single class")
        n, p = X.shape
        Xa = np.hstack([X, np.ones((n, 1))])   # last coordinate = intercept
        beta = np.zeros(p + 1)
        penalty = np.ones(p + 1) / self.C
        penalty[-1] = 0.0

        def objective(b):
            z = Xa @ b
            # log(1 + e^z) - y z, written stably
            return float(np.sum(np.logaddexp(0.0, z) - y * z)
                         + 0.5 * np.sum(penalty * b * b))

        obj = objective(beta)
        self.converged_ = False
        for it in range(self.max_iter):
            z = Xa @ beta
            prob = _sigmoid(z)
            grad = Xa.T @ (prob - y) + penalty * beta
            if np.linalg.norm(grad) <= self.tol:
                self.converged_ = True
                self.n_iter_ = it
                break
            diag = np.maximum(prob * (1.0 - prob), 1e-10)
            hess = (Xa * diag[:, None]).T @ Xa + np.diag(penalty)
            step = np.linalg.solve(hess, grad)
            # halve until the objective actually decreases
            scale = 1.0
            for _ in range(60):
                candidate = beta - scale * step
                new_obj = objective(candidate)
                if new_obj <= obj:
                    break
                scale *= 0.5
            beta = beta - scale * step
            obj = min(new_obj, obj)
        else:
            self.n_iter_ = self.max_iter
            warnings.warn(f"logistic regression did not reach tol={self.tol} "
                          f"in {self.max_iter} iterations", RuntimeWarning)

        self.weights_ = beta[:-1]
        self.intercept_ = float(beta[-1])
        return self

    def decision_function(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return X @ self.weights_ + self.intercept_

    def predict_proba(self, X) -> np.ndarray:
        p1 = _sigmoid(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (_sigmoid(self.decision_function(X)) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {"C": self.C, "tol": self.tol, "max_iter": self.max_iter,
                "weights": self.weights_.tolist(), "intercept": self.intercept_}

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticRegression":
        model = cls(C=d["C"], tol=d["tol"], max_iter=d["max_iter"])
        model.weights_ = np.asarray(d["weights"], dtype=np.float64)
        model.intercept_ = d["intercept"]
        return model
