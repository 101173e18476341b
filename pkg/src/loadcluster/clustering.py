"""Center assignment, Calinski-Harabasz scoring, K sweeps and a K-Means baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from loadcluster import submodular
from loadcluster.io import format_float, format_timestamp

logger = logging.getLogger(__name__)


class EvaluationError(ValueError):
    """Calinski-Harabasz is undefined for the given labelling."""


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    k: int
    centers: tuple
    labels: np.ndarray  # area index of each area's center
    ch_score: Optional[float] = None


@dataclass
class SweepResult:
    ks: list = field(default_factory=list)
    ch_scores: list = field(default_factory=list)
    assignments: list = field(default_factory=list)
    selection_passes: int = 1
    evaluations: int = 0

    @property
    def best_k(self) -> int:
        return self.ks[int(np.nanargmax(self.ch_scores))]


def assign(w, centers: Sequence[int]) -> np.ndarray:
    """Label each area with its most similar center.

    Ties go to the center listed first; centers always label themselves.
    """
    w = np.asarray(w, dtype=float)
    centers = [int(c) for c in centers]
    if not centers:
        raise ValueError("need at least one center")
    if len(set(centers)) != len(centers):
        raise ValueError("centers must be unique")
    n = w.shape[0]
    for c in centers:
        if not 0 <= c < n:
            raise ValueError(f"center {c} out of range for {n} areas")
    cidx = np.array(centers)
    labels = cidx[np.argmax(w[:, cidx], axis=1)]
    labels[cidx] = cidx
    return labels


def calinski_harabasz(z, labels) -> float:
    """Variance-ratio criterion ``[B/(k-1)] / [W/(n-k)]``.

    Clusters are visited in order of their lowest member index, so two
    labellings describing the same partition give bit-identical scores.
    Returns ``inf`` when every cluster has zero spread.
    """
    x = _as_array(z)
    labels = np.asarray(labels)
    n = x.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"{labels.shape[0]} labels for {n} points")
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    k = first.size
    if k < 2 or k > n - 1:
        raise EvaluationError(f"Calinski-Harabasz needs 2 <= k <= n-1 clusters, got k={k}, n={n}")
    grand = x.mean(axis=0)
    between = within = 0.0
    for c in np.argsort(first, kind="stable"):
        members = x[inverse.ravel() == c]
        centroid = members.mean(axis=0)
        between += members.shape[0] * float(np.sum((centroid - grand) ** 2))
        within += float(np.sum((members - centroid) ** 2))
    if within == 0:
        return np.inf
    return (between / (k - 1)) / (within / (n - k))


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((x - x[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            # fewer distinct points than k
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        d2 = np.minimum(d2, np.sum((x - x[nxt]) ** 2, axis=1))
    return x[chosen].copy()


def _sq_dists(x, centroids):
    return np.sum((x[:, None, :] - centroids[None, :, :]) ** 2, axis=2)


def _lloyd(x, centroids, max_iter=300, shift_tol=1e-9):
    for _ in range(max_iter):
        labels = np.argmin(_sq_dists(x, centroids), axis=1)
        new = centroids.copy()
        for c in range(centroids.shape[0]):
            members = x[labels == c]
            if members.shape[0]:
                new[c] = members.mean(axis=0)
        shift = np.sqrt(np.sum((new - centroids) ** 2, axis=1)).max()
        centroids = new
        if shift < shift_tol:
            break
    d = _sq_dists(x, centroids)
    labels = np.argmin(d, axis=1)
    inertia = float(d[np.arange(x.shape[0]), labels].sum())
    return labels, inertia


def kmeans_baseline(z, k: int, seed: int = 0, restarts: int = 10) -> tuple[np.ndarray, float]:
    """Best-of-``restarts`` Lloyd's algorithm from k-means++ seeding.

    Restart seeds are spawned from ``seed``, so results depend on nothing else.
    """
    x = _as_array(z)
    n = x.shape[0]
    if int(k) != k or not 1 <= k <= n:
        raise ValueError(f"k must be an integer in [1, {n}], got {k}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best_labels, best_inertia = None, np.inf
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        labels, inertia = _lloyd(x, _kmeanspp(x, int(k), rng))
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def _as_array(z) -> np.ndarray:
    if isinstance(z, np.ndarray):
        return z.astype(float)
    if len(z) and hasattr(z[0], "values"):
        return np.vstack([f.values for f in z])
    return np.asarray(z, dtype=float)


def _check_k_range(k_range, n):
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty K range")
    if ks[0] < 2 or ks[-1] > n - 1:
        raise ValueError(f"K range must lie within [2, {n - 1}], got {ks[0]}..{ks[-1]}")
    return ks


def sweep_k(w, z, rank_list: Optional[submodular.RankList], k_range) -> SweepResult:
    """Score every K in ``k_range`` using prefixes of a single rank list.

    When ``rank_list`` is None it is built once, long enough for the
    largest K.
    """
    x = _as_array(z)
    n = x.shape[0]
    ks = _check_k_range(k_range, n)
    if rank_list is None:
        rank_list = submodular.lazy_greedy_select(w, ks[-1])
    if len(rank_list) < ks[-1]:
        raise ValueError(f"rank list has {len(rank_list)} entries; K range needs {ks[-1]}")
    out = SweepResult(selection_passes=1, evaluations=rank_list.evaluations)
    for k in ks:
        centers = rank_list.prefix(k)
        labels = assign(w, centers)
        try:
            score = calinski_harabasz(x, labels)
        except EvaluationError:
            score = float("nan")
        out.ks.append(k)
        out.ch_scores.append(score)
        out.assignments.append(ClusterAssignment(k, tuple(centers), labels, score))
    return out


def kmeans_curve(z, k_range, seed: int = 0, restarts: int = 10) -> list[float]:
    """CH of the best K-Means partition for each K (a full clustering per K)."""
    x = _as_array(z)
    ks = _check_k_range(k_range, x.shape[0])
    scores = []
    for k in ks:
        labels, _ = kmeans_baseline(x, k, seed=seed, restarts=restarts)
        try:
            scores.append(calinski_harabasz(x, labels))
        except EvaluationError:
            scores.append(float("nan"))
    return scores


def sweep_csv(result: SweepResult, kmeans_scores: Optional[Sequence[float]] = None) -> str:
    header = "K,ch_submodular" + (",ch_kmeans" if kmeans_scores is not None else "")
    lines = [header]
    for i, (k, ch) in enumerate(zip(result.ks, result.ch_scores)):
        row = [str(k), format_float(ch)]
        if kmeans_scores is not None:
            row.append(format_float(kmeans_scores[i]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def assignment_csv(labels, centers: Sequence[int], area_ids: Sequence[str]) -> str:
    """``area_id,cluster_id,center_area_id``; cluster ids follow rank order from 1."""
    cluster_of = {c: i for i, c in enumerate(centers, start=1)}
    lines = ["area_id,cluster_id,center_area_id"]
    for a, lab in zip(area_ids, labels):
        lines.append(f"{a},{cluster_of[int(lab)]},{area_ids[int(lab)]}")
    return "\n".join(lines) + "\n"


def cluster_profiles_csv(timestamps, values, labels, centers, area_ids) -> str:
    """Long-form ``cluster_id,area_id,timestamp,load`` rows, grouped by cluster."""
    stamps = [format_timestamp(t) for t in timestamps]
    lines = ["cluster_id,area_id,timestamp,load"]
    for cid, c in enumerate(centers, start=1):
        for j in np.flatnonzero(np.asarray(labels) == c):
            col = values[:, j]
            lines.extend(
                f"{cid},{area_ids[j]},{t},{format_float(v)}" for t, v in zip(stamps, col)
            )
    return "\n".join(lines) + "\n"
