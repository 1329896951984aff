"""Sharded scoring engine.

The four map-reduce steps run on a local thread pool:

* step 1 builds every feature's kernel representation and its relevance score,
* step 2 scores all features against a broadcast pivot,
* steps 3/4 update the coefficients and recompute the negative gradients.

Features are split into contiguous shards; every shard result is merged at a
single point in ascending feature order, and each feature's arithmetic does
not depend on which shard it lands in, so outputs are bit-identical for any
worker count.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from threadpoolctl import threadpool_limits

from . import kernels
from .kernels import KernelConfig
from .nhsic import MODES, NhsicScores, score
from .solver import SolverState, direction_block, gradient_block, update_coefficients

log = logging.getLogger(__name__)

DEFAULT_CACHE_BYTES = 2 << 30


class ScoringError(RuntimeError):
    def __init__(self, feature: int, cause: BaseException):
        super().__init__(f"scoring failed for feature {feature}: {cause}")
        self.feature = feature


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count; ``N3LARS_THREADS`` overrides, 0 or None means all cores."""
    env = os.environ.get("N3LARS_THREADS")
    if env:
        workers = int(env)
    if not workers:
        workers = os.cpu_count() or 1
    if workers < 1:
        raise ValueError("worker count must be positive")
    return workers


@dataclass(frozen=True)
class ShardPlan:
    shard_count: int
    bounds: tuple[tuple[int, int], ...]

    @property
    def sizes(self) -> list[int]:
        return [hi - lo for lo, hi in self.bounds]

    def shard_of(self, k: int) -> int:
        for s, (lo, hi) in enumerate(self.bounds):
            if lo <= k < hi:
                return s
        raise IndexError(k)


def make_plan(d: int, shards: int) -> ShardPlan:
    """Contiguous blocks whose sizes differ by at most one (larger blocks first)."""
    if shards < 1:
        raise ValueError("need at least one shard")
    base, extra = divmod(d, shards)
    bounds, lo = [], 0
    for s in range(shards):
        hi = lo + base + (1 if s < extra else 0)
        bounds.append((lo, hi))
        lo = hi
    return ShardPlan(shards, tuple(bounds))


class FactorCache:
    """Per-feature representations under a byte budget.

    If every feature fits, all are kept; otherwise only pinned (pivot)
    features are stored and the rest are recomputed on demand.
    """

    def __init__(self, d: int, item_bytes: int, budget_bytes: int = DEFAULT_CACHE_BYTES):
        self.budget_bytes = budget_bytes
        self.keep_all = d * item_bytes <= budget_bytes
        self._items: dict[int, object] = {}
        self.pinned: set[int] = set()

    def __contains__(self, k: int) -> bool:
        return k in self._items

    def __len__(self) -> int:
        return len(self._items)

    def get(self, k: int):
        return self._items.get(k)

    def offer(self, k: int, item) -> None:
        if self.keep_all or k in self.pinned:
            self._items[k] = item

    def pin(self, k: int, item) -> None:
        self.pinned.add(k)
        self._items[k] = item


class ScoringEngine:
    """Owns the dataset, output representation, factor cache and worker pool."""

    def __init__(self, ds, mode: str = "nystrom", cfg: Optional[KernelConfig] = None,
                 workers: int = 1, cache_bytes: int = DEFAULT_CACHE_BYTES):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "nystrom" and cfg is not None and cfg.measure != "nhsic":
            raise ValueError("the hsic measure is only available in exact mode")
        self.ds = ds
        self.mode = mode
        self.cfg = cfg or KernelConfig()
        self.workers = workers
        self.plan = make_plan(ds.d, workers)
        self._basis = self.cfg.basis()
        item_bytes = 8 * ds.n * (ds.n if mode == "exact" else self._basis.size)
        self.cache = FactorCache(ds.d, item_bytes, cache_bytes)
        self._pool: Optional[ThreadPoolExecutor] = None
        # Preparation: the output representation is computed once and shared.
        if mode == "exact":
            self.output = kernels.output_gram(ds, self.cfg)
        else:
            self.output = kernels.output_factor(ds, self._basis, self.cfg.sigma2_y, self.cfg.eps)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def representation(self, k: int):
        """Fresh kernel representation of feature ``k`` (no cache involved)."""
        u = self.ds.X[k]
        if self.mode == "exact":
            return kernels.input_gram(u, self.cfg)
        return kernels.nystrom_factor(u, self._basis, self.cfg.sigma2_x, self.cfg.eps)

    def _get(self, k: int):
        rep = self.cache.get(k)
        return rep if rep is not None else self.representation(k)

    def map_blocks(self, fn: Callable[[int, int], object]) -> list:
        """Apply ``fn(lo, hi)`` to each nonempty shard; results in shard order."""
        blocks = [b for b in self.plan.bounds if b[1] > b[0]]
        with threadpool_limits(limits=1, user_api="blas"):
            if self.workers == 1 or len(blocks) == 1:
                return [fn(lo, hi) for lo, hi in blocks]
            if self._pool is None:
                self._pool = ThreadPoolExecutor(self.workers, thread_name_prefix="n3lars")
            futures = [self._pool.submit(fn, lo, hi) for lo, hi in blocks]
            return [f.result() for f in futures]

    def _guarded(self, k: int, fn):
        try:
            return fn()
        except Exception as exc:
            raise ScoringError(k, exc) from exc

    def step1_score_all(self) -> NhsicScores:
        """Representations and relevance scores for every feature."""
        def work(lo, hi):
            out = []
            for k in range(lo, hi):
                rep = self._guarded(k, lambda: self.representation(k))
                rel = self._guarded(k, lambda: score(rep, self.output, self.mode))
                out.append((k, rep, rel))
            return out

        relevance = np.zeros(self.ds.d)
        degenerate = np.zeros(self.ds.d, dtype=bool)
        for block in self.map_blocks(work):
            for k, rep, rel in block:
                relevance[k] = rel
                degenerate[k] = rep.degenerate
                self.cache.offer(k, rep)
        return NhsicScores(relevance, degenerate, provider=self.step2_pairwise)

    def step2_pairwise(self, pivot: int, features=None) -> np.ndarray:
        """``NHSIC(u_k, u_pivot)`` for the requested features (all by default).

        Entries that were not requested are NaN.
        """
        rep_j = self.cache.get(pivot)
        if rep_j is None:
            rep_j = self.representation(pivot)
        self.cache.pin(pivot, rep_j)
        wanted = None
        if features is not None:
            wanted = np.zeros(self.ds.d, dtype=bool)
            wanted[list(features)] = True

        def work(lo, hi):
            vals = np.full(hi - lo, np.nan)
            for k in range(lo, hi):
                if wanted is None or wanted[k]:
                    vals[k - lo] = self._guarded(k, lambda: score(self._get(k), rep_j, self.mode))
            return vals

        return np.concatenate(self.map_blocks(work))

    @staticmethod
    def _prefetch(scores: NhsicScores, active) -> None:
        # Missing pivot columns are filled here on the coordinator thread; a
        # worker that triggered step 2 itself would wait on its own pool.
        for i in active:
            scores.column(i)

    def steps34_update(self, scores: NhsicScores, state: SolverState,
                       step: Optional[tuple[float, np.ndarray]] = None):
        """Apply an optional ``(mu, direction)`` step, then recompute all gradients."""
        if step is not None:
            state = update_coefficients(state, *step)
        self._prefetch(scores, state.active)
        parts = self.map_blocks(
            lambda lo, hi: gradient_block(scores, state.active, state.alpha, lo, hi))
        return state, np.concatenate(parts)

    def directional(self, scores: NhsicScores, active, direction) -> np.ndarray:
        """Rate ``sum_i NHSIC(u_k, u_i) d_i`` at which each gradient falls."""
        self._prefetch(scores, active)
        parts = self.map_blocks(
            lambda lo, hi: direction_block(scores, active, direction, lo, hi))
        return np.concatenate(parts)
