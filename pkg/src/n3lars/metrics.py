"""Redundancy rate of a selected feature set."""

from __future__ import annotations

import itertools

import numpy as np


def redundancy_rate(ds, selected) -> float:
    """``1/(m(m-1)) * sum_{k>l} |corr(u_k, u_l)|`` over the selected features.

    The sum runs over unordered pairs, so the value lies in ``[0, 1/2]``;
    two identical features give exactly 0.5.
    """
    selected = [int(k) for k in selected]
    m = len(selected)
    if m < 2:
        raise ValueError("redundancy rate needs at least two features")
    X = np.asarray(ds.X if hasattr(ds, "X") else ds, dtype=np.float64)
    centered, sq = [], []
    for k in selected:
        if np.ptp(X[k]) == 0:
            raise ValueError(f"feature {k} is constant; correlation undefined")
        u = X[k] - X[k].mean()
        centered.append(u)
        sq.append(float(u @ u))
    total = 0.0
    for a, b in itertools.combinations(range(m), 2):
        # sqrt(fl(s*s)) == s, so identical features give |rho| == 1 exactly
        rho = float(centered[a] @ centered[b]) / np.sqrt(sq[a] * sq[b])
        total += min(abs(rho), 1.0)
    return total / (m * (m - 1))
