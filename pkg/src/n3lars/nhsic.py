"""HSIC / normalized HSIC scores and the relevance/pairwise score cache."""

from __future__ import annotations

import csv
import logging
from typing import Callable, Optional

import numpy as np

from .kernels import KernelConfig, NormalizedGram, NystromFactor

log = logging.getLogger(__name__)

MODES = ("exact", "nystrom")


class MissingScoreError(KeyError):
    """A pairwise score was requested before its pivot column was computed."""


def _as_matrix(g) -> np.ndarray:
    return g.M if isinstance(g, NormalizedGram) else np.asarray(g, dtype=np.float64)


def hsic_exact(kbar, lbar) -> float:
    """``tr(Kbar @ Lbar)`` for centered symmetric Grams (Frobenius inner product)."""
    K, L = _as_matrix(kbar), _as_matrix(lbar)
    if K.shape != L.shape:
        raise ValueError(f"dimension mismatch: {K.shape} vs {L.shape}")
    return float(np.vdot(K, L))


def nhsic_exact(ktil, ltil) -> float:
    if isinstance(ktil, NormalizedGram) and ktil.degenerate:
        return 0.0
    if isinstance(ltil, NormalizedGram) and ltil.degenerate:
        return 0.0
    return hsic_exact(ktil, ltil)


def nhsic_approx(f: NystromFactor, g: NystromFactor) -> float:
    """``||F^T G||_F^2``, which equals ``tr(F F^T G G^T)``."""
    if f.degenerate or g.degenerate:
        return 0.0
    A, B = f.columns, g.columns
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"sample-count mismatch: {A.shape[0]} vs {B.shape[0]}")
    P = A.T @ B
    return float(np.vdot(P, P))


def score(a, b, mode: str) -> float:
    """Dispatch to the exact or Nystrom score for two feature representations."""
    if mode == "nystrom":
        return nhsic_approx(a, b)
    return nhsic_exact(a, b)


def _clamp(values: np.ndarray, what: str) -> np.ndarray:
    neg = values < 0
    if np.any(neg):
        log.debug("clamping %d negative %s scores (min %.3e)", int(neg.sum()), what,
                  float(values[neg].min()))
        values = np.where(neg, 0.0, values)
    return values


class NhsicScores:
    """Relevance scores ``NHSIC(u_k, y)`` plus lazily filled pairwise scores.

    Pairwise scores are stored as whole columns: ``column(j)[k]`` is
    ``NHSIC(u_k, u_j)``. Columns are produced by ``provider(j)`` on first use
    and kept for the lifetime of the object.
    """

    def __init__(self, relevance, degenerate=None,
                 provider: Optional[Callable[[int], np.ndarray]] = None):
        relevance = _clamp(np.asarray(relevance, dtype=np.float64).copy(), "relevance")
        self.d = relevance.size
        if degenerate is None:
            degenerate = np.zeros(self.d, dtype=bool)
        self.degenerate = np.asarray(degenerate, dtype=bool)
        relevance[self.degenerate] = 0.0
        relevance.setflags(write=False)
        self.relevance = relevance
        self.provider = provider
        self._columns: dict[int, np.ndarray] = {}

    def has_column(self, j: int) -> bool:
        return j in self._columns

    @property
    def pivots(self) -> list[int]:
        return sorted(self._columns)

    def column(self, j: int) -> np.ndarray:
        j = int(j)
        col = self._columns.get(j)
        if col is not None:
            return col
        if self.provider is None:
            raise MissingScoreError(f"no pairwise scores for feature {j}")
        col = _clamp(np.asarray(self.provider(j), dtype=np.float64).copy(), "pairwise")
        if col.shape != (self.d,):
            raise ValueError(f"provider returned shape {col.shape}, expected ({self.d},)")
        col[self.degenerate] = 0.0
        # keep the store exactly symmetric
        for i, other in self._columns.items():
            col[i] = other[j]
        col.setflags(write=False)
        self._columns[j] = col
        return col

    def pair(self, k: int, j: int) -> float:
        """``NHSIC(u_k, u_j)`` from whichever column is cached."""
        if j in self._columns:
            return float(self._columns[j][k])
        if k in self._columns:
            return float(self._columns[k][j])
        raise MissingScoreError(f"no pairwise score for ({k}, {j})")

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature_index", "relevance"])
            for k, r in enumerate(self.relevance):
                w.writerow([k, repr(float(r))])


def build_scores(ds, mode: str = "nystrom", cfg: Optional[KernelConfig] = None,
                 workers: int = 1, cache_bytes: int = 2 << 30) -> NhsicScores:
    """Relevance scores for every feature of a standardized dataset.

    The returned cache computes pairwise columns on demand through a
    :class:`~n3lars.parallel.ScoringEngine` that it keeps alive.
    """
    from .parallel import ScoringEngine

    engine = ScoringEngine(ds, mode=mode, cfg=cfg, workers=workers, cache_bytes=cache_bytes)
    return engine.step1_score_all()
