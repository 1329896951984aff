"""Non-negative LARS over normalized HSIC scores.

The problem solved is

    min_{alpha >= 0}  || L~ - sum_k alpha_k K~_k ||_F^2 + lam * sum_k alpha_k

which, expanded through the score cache, is
``C - 2 alpha.r + alpha.Q.alpha + lam * sum(alpha)`` with relevance ``r`` and
pairwise scores ``Q``. Writing ``c_k = r_k - (Q alpha)_k`` for the negative
(half) gradient, the optimality conditions are ``2 c_k = lam`` on the active
set and ``2 c_k <= lam`` elsewhere, so every path event is reported with
``lam = 2 * c_common``.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverState:
    active: tuple[int, ...] = ()
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(0))
    q_active: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    c_common: float = 0.0


@dataclass(frozen=True)
class PathEvent:
    step: int
    kind: str  # "add", "drop" or "terminate"
    feature: int  # -1 for terminate
    lam: float
    alpha: dict[int, float]


@dataclass
class SelectionPath:
    m: int
    events: list[PathEvent] = field(default_factory=list)
    selected: list[int] = field(default_factory=list)
    mode: str = "nystrom"
    rejected: list[int] = field(default_factory=list)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.events])

    @property
    def adds(self) -> list[PathEvent]:
        return [e for e in self.events if e.kind == "add"]

    @property
    def final_alpha(self) -> dict[int, float]:
        return dict(self.events[-1].alpha) if self.events else {}

    def lambda_enter(self, k: int) -> float:
        """Lambda at which ``k`` (last) entered the active set."""
        lam = None
        for e in self.events:
            if e.kind == "add" and e.feature == k:
                lam = e.lam
        if lam is None:
            raise KeyError(k)
        return lam

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "m": self.m,
            "lambda_convention": "lambda = 2 * common correlation (loss without a 1/2 factor)",
            "selected": list(self.selected),
            "rejected": list(self.rejected),
            "events": [
                {"step": e.step, "kind": e.kind, "feature": e.feature, "lambda": e.lam,
                 "alpha": {str(k): v for k, v in e.alpha.items()}}
                for e in self.events
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def to_csv(self, path) -> None:
        """Long format: one row per (event, active feature)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "event", "event_feature", "lambda", "feature", "alpha"])
            for e in self.events:
                rows = sorted(e.alpha.items()) or [("", "")]
                for k, a in rows:
                    w.writerow([e.step, e.kind, e.feature, repr(e.lam), k,
                                repr(a) if a != "" else ""])


def gradient_block(scores, active, alpha, lo: int, hi: int) -> np.ndarray:
    """``c_k = r_k - sum_i alpha_i NHSIC(u_k, u_i)`` for ``k in [lo, hi)``.

    Accumulates one active column at a time so each entry is computed the
    same way no matter how the index range is split.
    """
    out = np.array(scores.relevance[lo:hi], dtype=np.float64)
    for i, a in zip(active, alpha):
        out -= a * scores.column(i)[lo:hi]
    return out


def direction_block(scores, active, direction, lo: int, hi: int) -> np.ndarray:
    out = np.zeros(hi - lo)
    for i, w in zip(active, direction):
        out += w * scores.column(i)[lo:hi]
    return out


def negative_gradient(scores, state: SolverState, k: int) -> float:
    """Negative gradient for one feature; every active pair score must be cached."""
    c = float(scores.relevance[k])
    for i, a in zip(state.active, state.alpha):
        c -= a * scores.pair(k, i)
    return c


def update_coefficients(state: SolverState, mu: float, direction: np.ndarray) -> SolverState:
    """Move ``mu`` along ``direction``; active gradients fall by exactly ``mu``."""
    return replace(state, alpha=state.alpha + mu * direction, c_common=state.c_common - mu)


def objective(scores, alpha: dict[int, float], const: float = 1.0) -> float:
    """Fit term ``C - 2 sum alpha_k r_k + alpha^T Q alpha`` (``C = 1`` for NHSIC)."""
    idx = list(alpha)
    a = np.array([alpha[k] for k in idx])
    r = scores.relevance[idx]
    Q = np.array([[scores.pair(k, j) for j in idx] for k in idx]).reshape(len(idx), len(idx))
    return float(const - 2 * a @ r + a @ Q @ a)


class _Serial:
    """In-process stand-in for the scoring engine's steps 3/4."""

    def steps34_update(self, scores, state, step=None):
        if step is not None:
            state = update_coefficients(state, *step)
        return state, gradient_block(scores, state.active, state.alpha, 0, scores.d)

    def directional(self, scores, active, direction):
        return direction_block(scores, active, direction, 0, scores.d)


def _snapshot(state: SolverState) -> dict[int, float]:
    return {int(k): float(a) for k, a in zip(state.active, state.alpha)}


def lars_path(scores, m: int, tol: float = 1e-10, engine=None, allowed=None,
              singular_tol: float = 1e-10, mode: str = "nystrom",
              max_steps: Optional[int] = None) -> SelectionPath:
    """Trace the non-negative LARS path until ``m`` features are active.

    ``allowed`` optionally restricts the candidate features (boolean mask or
    index list). ``engine`` supplies sharded gradient evaluation; without it
    everything runs serially.
    """
    d = scores.d
    usable = ~scores.degenerate
    if allowed is not None:
        mask = np.zeros(d, dtype=bool)
        allowed = np.asarray(allowed)
        mask[allowed if allowed.dtype != bool else np.flatnonzero(allowed)] = True
        usable &= mask
    n_usable = int(usable.sum())
    if not 1 <= m <= n_usable:
        raise ValueError(f"m must lie in [1, {n_usable}] (usable features), got {m}")
    engine = engine or _Serial()
    max_steps = max_steps or 50 * m + 10

    path = SelectionPath(m=m, mode=mode)
    t0 = time.perf_counter()
    step = 0

    def record(kind, feature, state):
        nonlocal step
        lam = float(2.0 * max(state.c_common, 0.0))
        path.events.append(PathEvent(step, kind, int(feature), lam, _snapshot(state)))
        log.info("step=%d pivot=%d lambda=%.10g elapsed_ms=%.1f", step, feature, lam,
                 1e3 * (time.perf_counter() - t0))
        step += 1

    state, grad = engine.steps34_update(scores, SolverState())
    candidates = np.where(usable, grad, -np.inf)
    first = int(np.argmax(candidates))  # lowest index on ties
    state = replace(state, c_common=float(candidates[first]))
    if state.c_common <= tol:
        record("terminate", -1, state)
        return path

    rejected: set[int] = set()
    pending: Optional[int] = first
    just_dropped: Optional[int] = None
    chol = None

    while True:
        if pending is not None:
            j, pending = pending, None
            col = scores.column(j)  # step 2: pivot broadcast
            q_new = np.array([col[i] for i in state.active])
            q_jj = float(col[j])
            if state.active:
                schur = q_jj - q_new @ cho_solve(chol, q_new)
            else:
                schur = q_jj
            if schur <= singular_tol * max(q_jj, 1.0):
                log.warning("feature %d rejected: singular against the active set", j)
                rejected.add(j)
            else:
                k = len(state.active)
                Q = np.empty((k + 1, k + 1))
                Q[:k, :k] = state.q_active
                Q[k, :k] = Q[:k, k] = q_new
                Q[k, k] = q_jj
                state = replace(state, active=state.active + (j,),
                                alpha=np.append(state.alpha, 0.0), q_active=Q)
                record("add", j, state)
            if not state.active:
                # nothing usable could be activated at all
                record("terminate", -1, state)
                break
            try:
                chol = cho_factor(state.q_active)
            except LinAlgError as exc:  # pragma: no cover - guarded by the Schur test
                raise RuntimeError("active score matrix lost positive definiteness") from exc

        if step >= max_steps:
            log.warning("stopping after %d path events without convergence", step)
            record("terminate", -1, state)
            break

        state, grad = engine.steps34_update(scores, state)
        inactive = usable.copy()
        inactive[list(state.active)] = False
        if rejected:
            inactive[list(rejected)] = False
        c = state.c_common

        # features already tied with the active set join at this same breakpoint
        if len(state.active) < m:
            tied = inactive & (grad >= c - tol)
            if just_dropped is not None:
                tied[just_dropped] = False
            if tied.any():
                pending = int(np.flatnonzero(tied)[0])
                just_dropped = None
                continue

        direction = cho_solve(chol, np.ones(len(state.active)))
        a = engine.directional(scores, state.active, direction)

        # join: c - mu == grad_l - mu * a_l
        denom = 1.0 - a
        ok = inactive & (denom > tol)
        if just_dropped is not None:
            ok[just_dropped] = False
        mu_join = np.full(d, np.inf)
        mu_join[ok] = (c - grad[ok]) / denom[ok]
        mu_join[mu_join <= tol] = np.inf
        join = int(np.argmin(mu_join))
        mu_j = float(mu_join[join])

        # drop: alpha_i + mu * d_i == 0
        mu_d, drop = np.inf, -1
        for pos, di in enumerate(direction):
            if di < 0:
                mu = max(-state.alpha[pos] / di, 0.0)
                if mu < mu_d:
                    mu_d, drop = mu, pos

        mu_0 = c  # common gradient reaches zero
        mu_hat = min(mu_d, mu_0, mu_j)
        state, _ = engine.steps34_update(scores, state, step=(mu_hat, direction))
        just_dropped = None

        if mu_d == mu_hat:
            k = state.active[drop]
            keep = [p for p in range(len(state.active)) if p != drop]
            state = replace(state, active=tuple(state.active[p] for p in keep),
                            alpha=np.maximum(state.alpha[keep], 0.0),
                            q_active=state.q_active[np.ix_(keep, keep)])
            record("drop", k, state)
            just_dropped = k
            if not state.active:
                pending = int(np.argmax(np.where(inactive, grad, -np.inf)))
            else:
                chol = cho_factor(state.q_active)
            continue
        state = replace(state, alpha=np.maximum(state.alpha, 0.0))
        if mu_0 == mu_hat or state.c_common <= tol:
            state = replace(state, c_common=0.0)
            record("terminate", -1, state)
            break
        if len(state.active) >= m:
            record("terminate", -1, state)
            break
        pending = join

    path.selected = list(state.active)
    path.rejected = sorted(rejected)
    return path


def select(ds, m: int, mode: str = "nystrom", cfg=None, workers: int = 1,
           cache_bytes: Optional[int] = None, tol: float = 1e-10,
           allowed=None) -> SelectionPath:
    """Select ``m`` features from a standardized dataset."""
    from .parallel import DEFAULT_CACHE_BYTES, ScoringEngine

    with ScoringEngine(ds, mode=mode, cfg=cfg, workers=workers,
                       cache_bytes=DEFAULT_CACHE_BYTES if cache_bytes is None
                       else cache_bytes) as engine:
        scores = engine.step1_score_all()
        return lars_path(scores, m, tol=tol, engine=engine, allowed=allowed, mode=mode)


@dataclass(frozen=True)
class KktReport:
    event: int
    lam: float
    active_residual: float
    inactive_violation: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.active_residual <= self.tol and self.inactive_violation <= self.tol


def kkt_check(ds, path: SelectionPath, event_index: int, mode: str = "nystrom", cfg=None,
              alpha: Optional[dict[int, float]] = None, tol: float = 1e-5,
              allowed=None) -> KktReport:
    """Check the optimality conditions at one path event from freshly built scores.

    ``alpha`` overrides the event's coefficient snapshot.
    """
    from .parallel import ScoringEngine

    event = path.events[event_index]
    alpha = dict(event.alpha if alpha is None else alpha)
    with ScoringEngine(ds, mode=mode, cfg=cfg, workers=1, cache_bytes=0) as engine:
        scores = engine.step1_score_all()
        grad = np.array(scores.relevance)
        for i, a in alpha.items():
            grad -= a * engine.step2_pairwise(i)
    lam = event.lam
    candidates = ~scores.degenerate
    if allowed is not None:
        mask = np.zeros(ds.d, dtype=bool)
        mask[np.asarray(allowed)] = True
        candidates &= mask
    act = np.zeros(ds.d, dtype=bool)
    act[list(alpha)] = True
    active_res = float(np.max(np.abs(2 * grad[act] - lam))) if act.any() else 0.0
    inact = candidates & ~act
    inactive_viol = float(np.max(2 * grad[inact] - lam)) if inact.any() else -np.inf
    return KktReport(event_index, lam, active_res, max(inactive_viol, 0.0), tol)
