"""Gram matrices, centering/normalization and Nystrom factors.

Exact mode works with n x n centered, Frobenius-normalized Gram matrices.
Approximate mode replaces each of them with a thin factor ``F`` whose outer
product ``F @ F.T`` approximates the normalized Gram, so that pairwise scores
reduce to products of small matrices.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import eigh

KINDS = ("input", "output-regression", "output-classification")

# Frobenius norms below this are treated as an all-zero (degenerate) kernel.
DEGENERATE_NORM = 1e-12


@dataclass(frozen=True)
class KernelConfig:
    """Kernel widths, Nystrom basis grid and eigenvalue floor.

    ``eps`` is relative to the largest eigenvalue of the basis Gram matrix.
    ``measure="hsic"`` switches exact mode to unnormalized centered Grams.
    """

    sigma2_x: float = 1.0
    sigma2_y: float = 1.0
    basis_size: int = 20
    basis_low: float = -5.0
    basis_high: float = 5.0
    eps: float = 1e-10
    measure: str = "nhsic"

    def __post_init__(self):
        if self.sigma2_x <= 0 or self.sigma2_y <= 0:
            raise ValueError("kernel widths must be positive")
        if self.basis_size < 1:
            raise ValueError("basis_size must be positive")
        if self.basis_size > 1 and not self.basis_high > self.basis_low:
            raise ValueError("basis_high must exceed basis_low")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.measure not in ("nhsic", "hsic"):
            raise ValueError(f"unknown measure {self.measure!r}")

    def basis(self) -> np.ndarray:
        return make_basis(self.basis_size, self.basis_low, self.basis_high)


@dataclass(frozen=True)
class NormalizedGram:
    M: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class NystromFactor:
    """Thin kernel factor.

    ``F`` is n x b for inputs and regression outputs, and c x n (one row per
    class) for classification outputs. Use :attr:`columns` for the n x b view.
    """

    F: np.ndarray
    kind: str = "input"
    degenerate: bool = False

    @property
    def columns(self) -> np.ndarray:
        if self.kind == "output-classification":
            return self.F.T
        return self.F

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def b(self) -> int:
        return self.columns.shape[1]

    @property
    def nbytes(self) -> int:
        return self.F.nbytes

    def induced_gram(self) -> np.ndarray:
        C = self.columns
        return C @ C.T


def _check_finite(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64).ravel()
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite value in kernel input")
    return u


def gaussian_cross(u: np.ndarray, v: np.ndarray, sigma2: float = 1.0) -> np.ndarray:
    """``exp(-(u_i - v_j)^2 / (2 sigma2))`` for all pairs."""
    diff = np.subtract.outer(u, v)
    return np.exp(-(diff * diff) / (2.0 * sigma2))


def gaussian_gram(u, sigma2: float = 1.0) -> np.ndarray:
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    u = _check_finite(u)
    return gaussian_cross(u, u, sigma2)


def delta_gram(labels) -> np.ndarray:
    """Normalized delta kernel: ``1/n_c`` within class ``c``, 0 across classes."""
    labels = np.asarray(labels).ravel()
    if labels.size == 0:
        raise ValueError("empty label vector")
    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    same = inverse[:, None] == inverse[None, :]
    return np.where(same, 1.0 / counts[inverse][:, None], 0.0)


def center(g: np.ndarray) -> np.ndarray:
    """``Gamma @ g @ Gamma`` with ``Gamma = I - 11^T/n``, without forming Gamma."""
    g = np.asarray(g, dtype=np.float64)
    return (g - g.mean(axis=0, keepdims=True) - g.mean(axis=1, keepdims=True)
            + g.mean())


def center_normalize(g: np.ndarray) -> NormalizedGram:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 2:
        raise ValueError(f"expected a square Gram matrix with n >= 2, got {g.shape}")
    gbar = center(g)
    norm = np.linalg.norm(gbar)
    if norm < DEGENERATE_NORM:
        return NormalizedGram(np.zeros_like(gbar), degenerate=True)
    # A Gram close to a constant loses most digits to cancellation in the first
    # pass; re-centering the rescaled result removes the leftover row means.
    gbar = center(gbar / norm)
    return NormalizedGram(gbar / np.linalg.norm(gbar))


def make_basis(size: int = 20, low: float = -5.0, high: float = 5.0) -> np.ndarray:
    if size == 1:
        return np.array([0.5 * (low + high)])
    return np.linspace(low, high, size)


def default_basis() -> np.ndarray:
    """20 equally spaced points on [-5, 5]."""
    return make_basis(20, -5.0, 5.0)


def inverse_sqrt(K: np.ndarray, eps: float = 1e-10) -> np.ndarray:
    """Symmetric ``K^{-1/2}`` with eigenvalues floored at ``eps * max eigenvalue``."""
    w, V = eigh(K)
    w = np.maximum(w, eps * max(w[-1], 0.0))
    if w[-1] <= 0:
        raise ValueError("basis Gram matrix is not positive")
    return (V / np.sqrt(w)) @ V.T


def _normalize_factor(M: np.ndarray, kind: str) -> NystromFactor:
    # ||M^T M||_F == ||M M^T||_F, so dividing by its square root gives a unit-norm induced Gram
    scale = np.linalg.norm(M.T @ M) if M.shape[0] >= M.shape[1] else np.linalg.norm(M @ M.T)
    if np.sqrt(scale) < DEGENERATE_NORM:
        return NystromFactor(np.zeros_like(M), kind, degenerate=True)
    return NystromFactor(M / np.sqrt(scale), kind)


def nystrom_factor(u, basis=None, sigma2: float = 1.0, eps: float = 1e-10,
                   kind: str = "input") -> NystromFactor:
    """Centered, normalized Nystrom factor of the Gaussian Gram of ``u``."""
    u = _check_finite(u)
    basis = default_basis() if basis is None else np.asarray(basis, dtype=np.float64)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if np.ptp(u) == 0:
        return NystromFactor(np.zeros((u.size, basis.size)), kind, degenerate=True)
    K_nb = gaussian_cross(u, basis, sigma2)
    K_bb = gaussian_cross(basis, basis, sigma2)
    M = K_nb @ inverse_sqrt(K_bb, eps)
    M -= M.mean(axis=0, keepdims=True)
    return _normalize_factor(M, kind)


def class_indicator(labels) -> np.ndarray:
    """Raw c x n matrix with ``G[c, j] = 1/sqrt(n_c)`` when sample j is in class c.

    ``G.T @ G`` is exactly the delta Gram of :func:`delta_gram`.
    """
    labels = np.asarray(labels).ravel()
    if labels.size == 0:
        raise ValueError("empty label vector")
    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    G = np.zeros((counts.size, labels.size))
    G[inverse, np.arange(labels.size)] = 1.0 / np.sqrt(counts[inverse])
    return G


def class_factor(labels) -> NystromFactor:
    """Class indicator factor, centered over samples and normalized."""
    G = class_indicator(labels)
    G -= G.mean(axis=1, keepdims=True)
    return _normalize_factor(G, "output-classification")


def output_factor(ds, basis=None, sigma2: float = 1.0, eps: float = 1e-10) -> NystromFactor:
    if ds.task == "classification":
        counts = np.bincount(ds.y)
        if np.any(counts == 0):
            raise ValueError(f"empty class {int(np.flatnonzero(counts == 0)[0])}")
        return class_factor(ds.y)
    return nystrom_factor(ds.y, basis, sigma2, eps, kind="output-regression")


def input_gram(u, cfg: KernelConfig) -> NormalizedGram:
    """Exact-mode representation of one feature under ``cfg.measure``."""
    g = gaussian_gram(u, cfg.sigma2_x)
    if cfg.measure == "hsic":
        return NormalizedGram(center(g), degenerate=np.ptp(u) == 0)
    return center_normalize(g)


def output_gram(ds, cfg: KernelConfig) -> NormalizedGram:
    if ds.task == "classification":
        g = delta_gram(ds.y)
    else:
        g = gaussian_gram(ds.y, cfg.sigma2_y)
    if cfg.measure == "hsic":
        return NormalizedGram(center(g))
    return center_normalize(g)


_HEADER = struct.Struct("<4siqq")
_MAGIC = b"N3LF"


def save_factor(factor: NystromFactor, path) -> None:
    """Write ``factor`` as a little-endian float64 row-major blob.

    Header: magic, kind code, n (samples), b (basis or class count).
    """
    F = np.ascontiguousarray(factor.F, dtype="<f8")
    code = KINDS.index(factor.kind) | (0x100 if factor.degenerate else 0)
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, code, factor.n, factor.b))
        fh.write(F.tobytes(order="C"))


def load_factor(path) -> NystromFactor:
    raw = Path(path).read_bytes()
    magic, code, n, b = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a factor file")
    kind = KINDS[code & 0xFF]
    shape = (b, n) if kind == "output-classification" else (n, b)
    F = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(shape).astype(np.float64)
    return NystromFactor(F, kind, degenerate=bool(code & 0x100))
