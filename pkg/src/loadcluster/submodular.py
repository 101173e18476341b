"""Facility-location center selection by lazy greedy maximization.

The objective is ``f(G) = sum_i max_{j in G} w_ij`` with ``f({}) = 0``. It is
monotone and submodular, so greedy selection is within ``1 - 1/e`` of the
best k-subset, and stale marginal gains remain valid upper bounds. The lazy
variant exploits that: candidates sit in a max-heap keyed on their last
computed gain and are only re-evaluated when they reach the top.

Ties in marginal gain go to the lowest area index, in both the lazy and
the naive routine, so both return the same order.
"""

from __future__ import annotations

import csv
import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from loadcluster.errors import ValidationError
from loadcluster.io import format_float

logger = logging.getLogger(__name__)


@dataclass
class RankList:
    order: list = field(default_factory=list)
    gains: list = field(default_factory=list)
    objective_trace: list = field(default_factory=list)
    evaluations: int = 0

    def __len__(self):
        return len(self.order)

    def prefix(self, k: int) -> list:
        if not 1 <= k <= len(self.order):
            raise ValueError(f"k={k} outside rank list of length {len(self.order)}")
        return self.order[:k]


def validate_kernel(w, atol: float = 1e-12) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
        raise ValidationError(f"similarity matrix must be square, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValidationError("similarity matrix has non-finite entries")
    if not np.allclose(w, w.T, rtol=0, atol=atol):
        raise ValidationError("similarity matrix is not symmetric")
    if np.any(w <= 0) or np.any(w > 1):
        raise ValidationError("similarity entries must lie in (0, 1]")
    if not np.all(np.diag(w) == 1):
        raise ValidationError("similarity matrix must have a unit diagonal")
    return w


def _check_indices(n: int, idx: Iterable[int]) -> list[int]:
    idx = [int(i) for i in idx]
    for i in idx:
        if not 0 <= i < n:
            raise ValueError(f"index {i} out of range for {n} areas")
    return idx


def facility_location_value(w, gamma: Iterable[int]) -> float:
    w = np.asarray(w, dtype=float)
    gamma = _check_indices(w.shape[1], gamma)
    if not gamma:
        return 0.0
    return float(w[:, gamma].max(axis=1).sum())


def marginal_gain(w, gamma, j: int, cache=None) -> float:
    """``f(gamma + {j}) - f(gamma)`` computed from per-row current best similarity.

    ``cache[i]`` must equal ``max_{k in gamma} w_ik`` (zero for an empty set);
    it is rebuilt from ``gamma`` when omitted.
    """
    w = np.asarray(w, dtype=float)
    gamma = _check_indices(w.shape[1], gamma)
    (j,) = _check_indices(w.shape[1], [j])
    if j in gamma:
        raise ValueError(f"candidate {j} is already selected")
    if cache is None:
        cache = w[:, gamma].max(axis=1) if gamma else np.zeros(w.shape[0])
    return _gain(w, cache, j)


def _gain(w: np.ndarray, cache: np.ndarray, j: int) -> float:
    return float(np.maximum(w[:, j] - cache, 0.0).sum())


def _check_k(k, n):
    if int(k) != k or not 1 <= k <= n:
        raise ValueError(f"k must be an integer in [1, {n}], got {k}")
    return int(k)


def naive_greedy_select(w, k: int) -> RankList:
    """Plain greedy: evaluate every remaining candidate at each step."""
    w = validate_kernel(w)
    n = w.shape[0]
    k = _check_k(k, n)
    cache = np.zeros(n)
    out = RankList()
    remaining = list(range(n))
    total = 0.0
    while len(out.order) < k:
        best_j, best = -1, -np.inf
        for j in remaining:
            g = _gain(w, cache, j)
            out.evaluations += 1
            if g > best:
                best_j, best = j, g
        if best <= 0:
            break
        total += best
        out.order.append(best_j)
        out.gains.append(best)
        out.objective_trace.append(total)
        remaining.remove(best_j)
        np.maximum(cache, w[:, best_j], out=cache)
    return out


def lazy_greedy_select(w, k: int) -> RankList:
    """Rank up to ``k`` centers by accelerated greedy selection.

    Each heap entry is ``(-bound, index, round)`` where ``round`` is the
    selection step at which the bound was computed. An entry popped with a
    current ``round`` is exact and, being no smaller than any other bound,
    is the greedy choice. Stale entries are re-evaluated and pushed back.

    Selection stops early when the best remaining gain is zero, which for a
    strictly positive kernel happens only once every column is covered by an
    identical one (duplicate areas).
    """
    w = validate_kernel(w)
    n = w.shape[0]
    k = _check_k(k, n)
    cache = np.zeros(n)
    out = RankList()
    heap = []
    for j in range(n):
        heap.append((-_gain(w, cache, j), j, 0))
        out.evaluations += 1
    heapq.heapify(heap)
    total = 0.0
    step = 0
    while len(out.order) < k and heap:
        neg, j, stamp = heapq.heappop(heap)
        if stamp != step:
            g = _gain(w, cache, j)
            out.evaluations += 1
            heapq.heappush(heap, (-g, j, step))
            continue
        g = -neg
        if g <= 0:
            logger.warning("no positive gain left after %d centers; stopping early", len(out.order))
            break
        total += g
        out.order.append(j)
        out.gains.append(g)
        out.objective_trace.append(total)
        np.maximum(cache, w[:, j], out=cache)
        step += 1
    return out


def rank_list_csv(rl: RankList, area_ids: Sequence[str]) -> str:
    lines = ["rank,area_id,marginal_gain,objective"]
    for r, (j, g, f) in enumerate(zip(rl.order, rl.gains, rl.objective_trace), start=1):
        lines.append(f"{r},{area_ids[j]},{format_float(g)},{format_float(f)}")
    return "\n".join(lines) + "\n"


def read_rank_list_csv(path, area_ids: Sequence[str]) -> RankList:
    pos = {a: i for i, a in enumerate(area_ids)}
    rl = RankList()
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rl.order.append(pos[row["area_id"]])
            rl.gains.append(float(row["marginal_gain"]))
            rl.objective_trace.append(float(row["objective"]))
    return rl
