"""Seasonal summary statistics of the low-rank and sparse components.

Each area gets a 16-vector ordered as::

    [L-summer, L-winter, S-summer, S-winter] x (mean, std, max, min)

``std`` is the population standard deviation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from loadcluster.errors import FeatureError
from loadcluster.io import format_float

STATS = ("mean", "std", "max", "min")
COMPONENTS = ("low_rank", "sparse")
SEASONS = ("summer", "winter")
N_FEATURES = len(COMPONENTS) * len(SEASONS) * len(STATS)

FEATURE_NAMES = tuple(
    f"{c}_{s}_{stat}" for c in COMPONENTS for s in SEASONS for stat in STATS
)


@dataclass(frozen=True)
class SeasonConfig:
    summer_months: frozenset = frozenset({6, 7, 8, 9})
    winter_months: frozenset = frozenset({10, 11, 12, 1, 2, 3, 4, 5})

    def __post_init__(self):
        summer = frozenset(int(m) for m in self.summer_months)
        winter = frozenset(int(m) for m in self.winter_months)
        object.__setattr__(self, "summer_months", summer)
        object.__setattr__(self, "winter_months", winter)
        if summer & winter:
            raise ValueError(f"months in both seasons: {sorted(summer & winter)}")
        if summer | winter != frozenset(range(1, 13)):
            missing = sorted(frozenset(range(1, 13)) - (summer | winter))
            raise ValueError(f"seasons must cover all months; missing {missing}")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    area_id: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (N_FEATURES,):
            raise ValueError(f"expected {N_FEATURES} features, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def block(self, component: str, season: str) -> np.ndarray:
        i = COMPONENTS.index(component) * 2 + SEASONS.index(season)
        return self.values[4 * i: 4 * i + 4]


def months_of(timestamps) -> np.ndarray:
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    return ts.astype("datetime64[M]").astype(np.int64) % 12 + 1


def season_mask(timestamps, cfg: SeasonConfig = SeasonConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Row indices falling in summer and in winter, by calendar month."""
    months = months_of(timestamps)
    if months.size == 0:
        raise ValueError("no timestamps")
    summer = np.isin(months, sorted(cfg.summer_months))
    return np.flatnonzero(summer), np.flatnonzero(~summer)


def _stats(x: np.ndarray) -> list[float]:
    hi, lo = x.max(), x.min()
    # rounding can push the mean of near-constant data just outside [min, max]
    mean = min(max(x.mean(), lo), hi)
    return [mean, np.sqrt(np.mean((x - mean) ** 2)), hi, lo]


def extract_features(l_col, s_col, masks, area_id: str = "") -> FeatureVector:
    l_col = np.asarray(l_col, dtype=float)
    s_col = np.asarray(s_col, dtype=float)
    summer, winter = (np.asarray(m, dtype=np.intp) for m in masks)
    n = summer.size + winter.size
    if l_col.shape != (n,) or s_col.shape != (n,):
        raise ValueError(
            f"column lengths {l_col.shape}, {s_col.shape} do not match {n} masked rows"
        )
    for name, idx in zip(SEASONS, (summer, winter)):
        if idx.size < 2:
            raise FeatureError(f"area {area_id!r}: season {name!r} has {idx.size} samples, need >= 2")
    values = []
    for col in (l_col, s_col):
        for idx in (summer, winter):
            # sorting makes the statistics independent of sample order bit for bit
            values.extend(_stats(np.sort(col[idx])))
    return FeatureVector(np.array(values), area_id)


def feature_matrix(low_rank, sparse, timestamps, area_ids: Sequence[str],
                   cfg: SeasonConfig = SeasonConfig()) -> list[FeatureVector]:
    masks = season_mask(timestamps, cfg)
    return [
        extract_features(low_rank[:, j], sparse[:, j], masks, a)
        for j, a in enumerate(area_ids)
    ]


def stack(z: Iterable[FeatureVector]) -> np.ndarray:
    return np.vstack([f.values for f in z])


def features_csv(z: Sequence[FeatureVector]) -> str:
    lines = [",".join(["area_id", *(f"f{i:02d}" for i in range(1, N_FEATURES + 1))])]
    for f in z:
        lines.append(",".join([f.area_id, *map(format_float, f.values)]))
    return "\n".join(lines) + "\n"


def ordering_note() -> str:
    lines = ["Feature column order (population std):"]
    lines += [f"f{i:02d} {name}" for i, name in enumerate(FEATURE_NAMES, start=1)]
    return "\n".join(lines) + "\n"


def read_features_csv(path) -> list[FeatureVector]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return [FeatureVector(np.array([float(x) for x in r[1:]]), r[0]) for r in rows[1:] if r]
