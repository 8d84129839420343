"""Soft-margin kernel SVM trained by sequential minimal optimization.

Working pairs are chosen by the maximal-violating-pair rule with
second-order selection of the partner (Fan, Chen & Lin, 2005); training stops
once the KKT violation ``m(alpha) - M(alpha)`` drops below ``tol``. Margins
are mapped to probabilities with Platt's sigmoid, fitted on the training
margins.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConvergenceError

TAU = 1e-12


def rbf_kernel(A, B, gamma):
    sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo_solve(K, y, C, tol=1e-3, max_iter=None):
    """Solve the binary dual; ``y`` in {-1, +1}. Returns ``(alpha, rho)``.

    The decision function is ``sum_t alpha_t y_t K(x_t, x) - rho``.
    """
    n = len(y)
    y = y.astype(float)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 0.5 a'Qa - e'a
    diagK = np.diag(K).copy()
    max_iter = max_iter or max(10_000_000, 100 * n)
    pos = y > 0

    for it in range(max_iter):
        minus_yG = -y * G
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        if not up.any() or not low.any():
            break
        cand_up = np.where(up, minus_yG, -np.inf)
        i = int(np.argmax(cand_up))
        m = cand_up[i]
        M = np.min(np.where(low, minus_yG, np.inf))
        if m - M < tol:
            break
        b = m - minus_yG
        a = diagK[i] + diagK - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        obj = np.where(low & (b > 0), -(b * b) / a, np.inf)
        j = int(np.argmin(obj))

        lam = b[j] / a[j]
        lam = min(lam,
                  C - alpha[i] if y[i] > 0 else alpha[i],
                  alpha[j] if y[j] > 0 else C - alpha[j])
        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        # snap to the box to keep the index sets exact
        for t in (i, j):
            if alpha[t] < 1e-12 * C:
                alpha[t] = 0.0
            elif alpha[t] > C * (1 - 1e-12):
                alpha[t] = C
        G += lam * y * (K[:, i] - K[:, j])
    else:
        raise ConvergenceError("SMO did not reach the KKT tolerance",
                               {"iterations": max_iter, "violation": float(m - M), "tol": tol})

    yG = y * G
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(yG[free].mean())
    else:
        ub_mask = (at_upper & ~pos) | (at_lower & pos)
        lb_mask = (at_upper & pos) | (at_lower & ~pos)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = float((ub + lb) / 2) if np.isfinite(ub) and np.isfinite(lb) else 0.0
    return alpha, rho


def platt_fit(f, labels, max_iter=100):
    """Sigmoid ``1 / (1 + exp(A f + B))`` fitted by Newton's method.

    Uses the smoothed targets and backtracking step of Lin, Lin & Weng (2007).
    """
    f = np.asarray(f, float)
    labels = np.asarray(labels) > 0
    prior1 = labels.sum()
    prior0 = len(labels) - prior1
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(labels, hi, lo)
    A, B = 0.0, np.log((prior0 + 1.0) / (prior1 + 1.0))
    sigma, eps = 1e-12, 1e-5

    def objective(A, B):
        fApB = f * A + B
        return np.sum(np.where(fApB >= 0, t * fApB + np.log1p(np.exp(-np.abs(fApB))),
                               (t - 1) * fApB + np.log1p(np.exp(-np.abs(fApB)))))

    fval = objective(A, B)
    for _ in range(max_iter):
        fApB = f * A + B
        p = np.where(fApB >= 0, np.exp(-np.abs(fApB)) / (1 + np.exp(-np.abs(fApB))),
                     1 / (1 + np.exp(-np.abs(fApB))))
        q = 1 - p
        d2 = p * q
        h11 = sigma + np.sum(f * f * d2)
        h22 = sigma + np.sum(d2)
        h21 = np.sum(f * d2)
        d1 = t - p
        g1 = np.sum(f * d1)
        g2 = np.sum(d1)
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= 1e-10:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2
        else:
            break
    return float(A), float(B)


def _sigmoid_platt(f, A, B):
    z = f * A + B
    return np.where(z >= 0, np.exp(-z) / (1 + np.exp(-z)), 1 / (1 + np.exp(np.minimum(z, 0))))


class OneVsRestSVM:
    def __init__(self, gamma=None, support=None, coef=None, rho=None, platt=None):
        self.gamma = gamma
        self.support = support
        self.coef = coef  # (n_classes, n_support): alpha * y, zero where unused
        self.rho = rho
        self.platt = platt

    def fit(self, X, y, n_classes, hp, rng):
        n, d = X.shape
        self.gamma = float(hp["gamma"]) if hp.get("gamma") else 1.0 / d
        C, tol = float(hp["C"]), float(hp["tol"])
        K = rbf_kernel(X, X, self.gamma)
        coef = np.zeros((n_classes, n))
        rho = np.zeros(n_classes)
        platt = np.zeros((n_classes, 2))
        for k in range(n_classes):
            yk = np.where(y == k, 1.0, -1.0)
            alpha, rho[k] = smo_solve(K, yk, C, tol, hp.get("max_iter"))
            coef[k] = alpha * yk
            f = K @ coef[k] - rho[k]
            platt[k] = platt_fit(f, yk)
        used = np.flatnonzero(np.any(coef != 0, axis=0))
        # contiguous copies, laid out exactly as a reloaded artifact would be
        self.support = np.ascontiguousarray(X[used])
        self.coef = np.ascontiguousarray(coef[:, used])
        self.rho = rho
        self.platt = platt
        return self

    def decision(self, X):
        if len(self.support) == 0:
            return np.tile(-self.rho, (len(X), 1))
        return rbf_kernel(X, self.support, self.gamma) @ self.coef.T - self.rho

    def scores(self, X):
        F = self.decision(X)
        P = _sigmoid_platt(F, self.platt[:, 0], self.platt[:, 1])
        return P / P.sum(axis=1, keepdims=True)

    def to_params(self):
        return {"gamma": self.gamma, "support": self.support.tolist(), "coef": self.coef.tolist(),
                "rho": self.rho.tolist(), "platt": self.platt.tolist()}

    @classmethod
    def from_params(cls, p):
        coef = np.asarray(p["coef"], float)
        support = np.asarray(p["support"], float).reshape(coef.shape[1], -1)
        return cls(p["gamma"], support, coef, np.asarray(p["rho"], float),
                   np.asarray(p["platt"], float))
