"""Maximum-relevance ranking and two-stage (screen, then select) selection."""

from __future__ import annotations

import csv

import numpy as np

from .solver import SelectionPath, lars_path


def mr_rank(scores, m: int) -> list[int]:
    """Top-``m`` features by descending relevance; ties go to the lower index.

    Degenerate features are never ranked.
    """
    usable = np.flatnonzero(~scores.degenerate)
    if not 1 <= m <= usable.size:
        raise ValueError(f"m must lie in [1, {usable.size}] (usable features), got {m}")
    # stable sort on the negated score keeps ascending index order among ties
    order = usable[np.argsort(-scores.relevance[usable], kind="stable")]
    return [int(k) for k in order[:m]]


def export_ranking(scores, ranking, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "feature_index", "relevance"])
        for r, k in enumerate(ranking, start=1):
            w.writerow([r, k, repr(float(scores.relevance[k]))])


def screen_path(scores, m: int, m_final: int, engine=None, tol: float = 1e-10,
                mode: str = "nystrom") -> tuple[list[int], SelectionPath]:
    """Screen to the MR top-``m``, then run LARS on those candidates only."""
    if not 1 <= m_final <= m:
        raise ValueError(f"need 1 <= m_final <= m, got m_final={m_final}, m={m}")
    ranking = mr_rank(scores, m)
    path = lars_path(scores, m_final, tol=tol, engine=engine, allowed=sorted(ranking),
                     mode=mode)
    return ranking, path


def iterative_screen(ds, m: int, m_final: int, mode: str = "nystrom", cfg=None,
                     workers: int = 1, cache_bytes=None, tol: float = 1e-10) -> SelectionPath:
    from .parallel import DEFAULT_CACHE_BYTES, ScoringEngine

    if not m_final <= m <= ds.d:
        raise ValueError(f"need m_final <= m <= d, got m_final={m_final}, m={m}, d={ds.d}")
    budget = DEFAULT_CACHE_BYTES if cache_bytes is None else cache_bytes
    with ScoringEngine(ds, mode=mode, cfg=cfg, workers=workers, cache_bytes=budget) as engine:
        scores = engine.step1_score_all()
        _, path = screen_path(scores, m, m_final, engine=engine, tol=tol, mode=mode)
    return path
