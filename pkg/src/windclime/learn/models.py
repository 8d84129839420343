"""Nearest-neighbour, Gaussian naive Bayes and logistic regression models.

All models share a tiny protocol: ``fit(X, y, n_classes, hp, rng)`` with
integer labels, ``scores(X)`` returning rows that sum to one, and
``to_params`` / ``from_params`` for JSON serialization.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError


class KNearestNeighbors:
    def __init__(self, k=5, X=None, y=None, n_classes=None):
        self.k = k
        self.X = X
        self.y = y
        self.n_classes = n_classes

    def fit(self, X, y, n_classes, hp, rng):
        self.k = int(hp["k"])
        self.X, self.y, self.n_classes = X.copy(), y.copy(), n_classes
        return self

    def neighbors(self, X):
        """Indices of the ``k`` nearest training rows; ties go to the lower index."""
        d2 = ((X[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
        k = min(self.k, len(self.X))
        return np.argsort(d2, axis=1, kind="stable")[:, :k]

    def scores(self, X):
        nb = self.neighbors(X)
        votes = np.zeros((len(X), self.n_classes))
        for c in range(self.n_classes):
            votes[:, c] = (self.y[nb] == c).sum(axis=1)
        return votes / nb.shape[1]

    def to_params(self):
        return {"k": self.k, "X": self.X.tolist(), "y": self.y.tolist(), "n_classes": self.n_classes}

    @classmethod
    def from_params(cls, p):
        X = np.asarray(p["X"], float)
        return cls(p["k"], X, np.asarray(p["y"], np.int64), p["n_classes"])


class GaussianNaiveBayes:
    def __init__(self, theta=None, var=None, log_prior=None):
        self.theta = theta
        self.var = var
        self.log_prior = log_prior

    def fit(self, X, y, n_classes, hp, rng):
        eps = float(hp["var_smoothing"]) * X.var(axis=0).max()
        self.theta = np.vstack([X[y == c].mean(axis=0) for c in range(n_classes)])
        self.var = np.vstack([X[y == c].var(axis=0) for c in range(n_classes)]) + eps
        counts = np.bincount(y, minlength=n_classes)
        self.log_prior = np.log(counts / counts.sum())
        return self

    def joint_log_likelihood(self, X):
        jll = []
        for c in range(len(self.theta)):
            v = self.var[c]
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * v)) - 0.5 * np.sum((X - self.theta[c]) ** 2 / v, axis=1)
            jll.append(self.log_prior[c] + ll)
        return np.array(jll).T

    def scores(self, X):
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        P = np.exp(jll)
        return P / P.sum(axis=1, keepdims=True)

    def to_params(self):
        return {"theta": self.theta.tolist(), "var": self.var.tolist(),
                "log_prior": self.log_prior.tolist()}

    @classmethod
    def from_params(cls, p):
        return cls(np.asarray(p["theta"], float), np.asarray(p["var"], float),
                   np.asarray(p["log_prior"], float))


def _log1pexp(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fit_binary_logistic(X, t, l2=1.0, tol=1e-6, max_iter=100):
    """L2-penalised logistic regression by damped Newton steps.

    Minimises ``sum log(1 + exp(-s_i z_i)) + l2/2 |w|^2`` with
    ``s_i = +1/-1``; the intercept is not penalised. Returns ``(w, b)``.
    """
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    s = np.where(t, 1.0, -1.0)
    beta = np.zeros(d + 1)
    reg = np.full(d + 1, l2)
    reg[-1] = 0.0

    def objective(b):
        return _log1pexp(-s * (A @ b)).sum() + 0.5 * np.sum(reg * b * b)

    f = objective(beta)
    for it in range(max_iter):
        z = A @ beta
        p = _sigmoid(z)
        grad = A.T @ (p - t) + reg * beta
        gnorm = np.linalg.norm(grad)
        if gnorm < tol:
            return beta[:-1], float(beta[-1])
        W = p * (1 - p)
        H = (A * W[:, None]).T @ A + np.diag(reg) + 1e-12 * np.eye(d + 1)
        step = np.linalg.solve(H, -grad)
        lr = 1.0
        while lr > 1e-12:
            cand = beta + lr * step
            fc = objective(cand)
            if fc <= f + 1e-4 * lr * grad @ step:
                break
            lr /= 2
        beta, f = cand, fc
    raise ConvergenceError("logistic regression did not converge",
                           {"iterations": max_iter, "grad_norm": float(gnorm), "tol": tol})


class OneVsRestLogistic:
    def __init__(self, W=None, b=None):
        self.W = W
        self.b = b

    def fit(self, X, y, n_classes, hp, rng):
        W, b = [], []
        for c in range(n_classes):
            w, bc = fit_binary_logistic(X, (y == c).astype(float), float(hp["l2"]),
                                        float(hp["tol"]), int(hp["max_iter"]))
            W.append(w)
            b.append(bc)
        self.W, self.b = np.array(W), np.array(b)
        return self

    def scores(self, X):
        P = _sigmoid(X @ self.W.T + self.b)
        return P / P.sum(axis=1, keepdims=True)

    def to_params(self):
        return {"W": self.W.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_params(cls, p):
        return cls(np.asarray(p["W"], float), np.asarray(p["b"], float))
