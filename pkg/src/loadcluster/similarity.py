"""Feature-space distances and the exponential similarity kernel.

The kernel is ``w = exp(-d / lam)`` with the distance to the first power.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from loadcluster.errors import DegenerateDataError
from loadcluster.io import format_float

# distances below this fraction of the largest feature magnitude are round-off
DIST_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    distances: np.ndarray
    similarities: np.ndarray
    lam: float
    area_ids: tuple


def _as_matrix(z) -> np.ndarray:
    if len(z) and hasattr(z[0], "values"):
        lengths = {np.asarray(f.values).shape for f in z}
        if len(lengths) != 1:
            raise ValueError(f"feature vectors of unequal length: {sorted(lengths)}")
        return np.vstack([f.values for f in z])
    try:
        x = np.asarray(z, dtype=float)
    except ValueError as exc:
        raise ValueError("feature vectors of unequal length") from exc
    if x.ndim != 2:
        raise ValueError("feature vectors of unequal length")
    return x


def pairwise_distance(z) -> np.ndarray:
    """Euclidean distance between every pair of feature vectors.

    ``z`` is a sequence of :class:`FeatureVector` or an (N, d) array.
    """
    x = _as_matrix(z)
    if x.shape[0] < 2:
        raise ValueError("need at least two feature vectors")
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def select_lambda(d, atol: float = 0.0) -> float:
    """Median of the upper-triangle distances greater than ``atol``."""
    d = np.asarray(d, dtype=float)
    upper = d[np.triu_indices_from(d, k=1)]
    upper = upper[upper > atol]
    if upper.size == 0:
        raise DegenerateDataError("all pairwise distances are zero; cannot choose a kernel scale")
    return float(np.median(upper))


def rbf_similarity(d, lam: float) -> np.ndarray:
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return np.exp(-np.asarray(d, dtype=float) / lam)


def build_graph(z, lam: float | None = None, area_ids: Sequence[str] | None = None) -> SimilarityGraph:
    d = pairwise_distance(z)
    if lam is None:
        lam = select_lambda(d, atol=DIST_RTOL * float(np.abs(_as_matrix(z)).max()))
    if area_ids is None:
        area_ids = [getattr(f, "area_id", str(i)) for i, f in enumerate(z)]
    return SimilarityGraph(d, rbf_similarity(d, lam), float(lam), tuple(area_ids))


def square_csv(mat: np.ndarray, area_ids: Sequence[str]) -> str:
    lines = [",".join(["area_id", *area_ids])]
    for a, row in zip(area_ids, mat):
        lines.append(",".join([a, *map(format_float, row)]))
    return "\n".join(lines) + "\n"


def heatmap_csv(w: np.ndarray) -> str:
    """Long-form ``i,j,w_ij`` triples."""
    n = w.shape[0]
    lines = ["i,j,w_ij"]
    lines += [f"{i},{j},{format_float(w[i, j])}" for i in range(n) for j in range(n)]
    return "\n".join(lines) + "\n"


def read_square_csv(path) -> tuple[np.ndarray, tuple]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    ids = tuple(rows[0][1:])
    mat = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    return mat, ids
