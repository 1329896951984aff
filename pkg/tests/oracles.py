"""Independent reference computations used to freeze and check expected values.

Everything here is written from the definitions with explicit loops or
explicit matrices, deliberately not sharing code paths with the package.
"""

import numpy as np


def centering_matrix(n):
    return np.eye(n) - np.ones((n, n)) / n


def gram_loops(u, sigma2=1.0):
    n = len(u)
    K = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            K[i, j] = np.exp(-(u[i] - u[j]) ** 2 / (2 * sigma2))
    return K


def normalized_gram(K):
    H = centering_matrix(K.shape[0])
    Kbar = H @ K @ H
    return Kbar / np.sqrt(np.trace(Kbar @ Kbar))


def nhsic_reference(u, v, sigma2=1.0):
    """``tr(K~ L~)`` with explicit centering matrices and loop-built Grams."""
    A = normalized_gram(gram_loops(u, sigma2))
    B = normalized_gram(gram_loops(v, sigma2))
    return float(np.trace(A @ B))


def nn_lasso_pg(Q, r, lam, max_iter=500_000, tol=1e-14):
    """Accelerated projected gradient for
    ``min_{a >= 0} a^T Q a - 2 r^T a + lam * sum(a)`` (with adaptive restart)."""
    step = 1.0 / (2 * np.linalg.eigvalsh(Q)[-1])
    a = np.zeros(len(r))
    z = a.copy()
    t = 1.0
    for _ in range(max_iter):
        g = 2 * Q @ z - 2 * r + lam
        a_new = np.maximum(z - step * g, 0.0)
        if np.max(np.abs(a_new - a)) < tol:
            return a_new
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        if g @ (a_new - a) > 0:
            t_new, z = 1.0, a_new
        else:
            z = a_new + (t - 1) / t_new * (a_new - a)
        a, t = a_new, t_new
    return a


def score_matrix(ds, sigma2=1.0):
    """Full exact relevance vector and pairwise matrix from reference NHSIC."""
    grams = [normalized_gram(gram_loops(u, sigma2)) for u in ds.X]
    out = normalized_gram(gram_loops(ds.y, sigma2))
    r = np.array([np.sum(G * out) for G in grams])
    Q = np.array([[np.sum(A * B) for B in grams] for A in grams])
    return r, Q
