"""Synthetic load areas with planted cluster structure, plus exhaustive oracles.

Archetypes are built from smooth annual bumps and a daily cycle::

    summer    high summer peak, low winter peak
    winter    medium summer peak, high winter peak
    dual      high summer and winter peaks
    flat      weak seasonality, strong daily cycle
    spring    shoulder-season bump
    evening   late-day daily peak, moderate winter

Areas in one pattern share the archetype shape and a common weather signal,
and differ only in MW scale, base load, white noise and spikes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import adjusted_rand_score

from loadcluster.io import LoadMatrix
from loadcluster.submodular import validate_kernel

HOURS_PER_DAY = 24
MIN_HOURS = 60 * HOURS_PER_DAY
ARCHETYPES = ("summer", "winter", "dual", "flat", "spring", "evening")


@dataclass(frozen=True)
class SyntheticSpec:
    n_patterns: int = 4
    areas_per_pattern: int = 8
    t: int = 8760
    noise_sigma: float = 0.02
    spike_fraction: float = 0.005
    spike_amplitude: float = 0.1
    seed: int = 0
    start: str = "2017-01-01T00:00:00"

    def __post_init__(self):
        if self.n_patterns < 1 or self.areas_per_pattern < 1 or self.t < 1:
            raise ValueError("counts must be positive")
        if self.n_patterns > len(ARCHETYPES):
            raise ValueError(f"at most {len(ARCHETYPES)} archetypes available")
        if self.noise_sigma < 0 or self.spike_amplitude < 0:
            raise ValueError("noise_sigma and spike_amplitude must be nonnegative")
        if not 0 <= self.spike_fraction < 1:
            raise ValueError("spike_fraction must lie in [0, 1)")


def _bump(x, center, width, period=365.0):
    # periodic, so December runs smoothly into January
    delta = (x - center + period / 2) % period - period / 2
    return np.exp(-((delta / width) ** 2))


def weather_anomaly(timestamps, rng: np.random.Generator, persistence: float = 0.8) -> np.ndarray:
    """Daily AR(1) temperature anomaly (unit variance), held constant within each day."""
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    day = (ts.astype("datetime64[D]") - ts[0].astype("datetime64[D]")).astype(np.int64)
    n_days = int(day[-1]) + 1
    eps = rng.standard_normal(n_days)
    a = np.empty(n_days)
    a[0] = eps[0]
    scale = np.sqrt(1 - persistence**2)
    for i in range(1, n_days):
        a[i] = persistence * a[i - 1] + scale * eps[i]
    return a[day]


def archetype_shapes(timestamps, anomaly=None) -> dict[str, np.ndarray]:
    ts = np.asarray(timestamps, dtype="datetime64[s]")
    doy = (ts - ts.astype("datetime64[Y]")).astype("timedelta64[s]").astype(float) / 86400.0
    hour = (ts - ts.astype("datetime64[D]")).astype("timedelta64[s]").astype(float) / 3600.0
    summer = _bump(doy, 200, 40)
    winter = _bump(doy, 20, 50)
    spring = _bump(doy, 110, 30)
    day = 0.5 * (1 - np.cos(2 * np.pi * (hour - 4) / 24))
    evening = _bump(hour, 19, 3, period=24.0)
    if anomaly is None:
        anomaly = np.zeros(ts.shape)
    # hot spells raise cooling load in summer, cold spells heating load in winter
    cooling = summer * np.maximum(anomaly, 0.0) ** 2 * (0.5 + day)
    heating = winter * np.maximum(-anomaly, 0.0) ** 2 * (0.5 + day)
    return {
        "summer": 1.0 * summer + 0.1 * winter + 0.1 * day + 0.25 * cooling + 0.02 * heating,
        "winter": 0.2 * summer + 1.0 * winter + 0.1 * day + 0.04 * cooling + 0.25 * heating,
        "dual": 0.8 * summer + 0.8 * winter + 0.1 * day + 0.2 * cooling + 0.2 * heating,
        "flat": 0.05 * summer + 0.05 * winter + 0.3 * day + 0.02 * cooling + 0.02 * heating,
        "spring": 0.2 * summer + 0.7 * spring + 0.15 * day + 0.05 * cooling + 0.05 * heating,
        "evening": 0.2 * summer + 0.4 * winter + 0.4 * evening + 0.1 * cooling + 0.1 * heating,
    }


def generate(spec: SyntheticSpec = SyntheticSpec()) -> tuple[LoadMatrix, np.ndarray]:
    """Raw (MW) load matrix and the planted pattern label of every area."""
    if spec.t < MIN_HOURS:
        raise ValueError(f"t={spec.t} hours is too short for a seasonal cycle (need >= {MIN_HOURS})")
    rng = np.random.default_rng(spec.seed)
    start = np.datetime64(spec.start, "s")
    ts = start + np.arange(spec.t).astype("timedelta64[h]")
    shapes = archetype_shapes(ts, weather_anomaly(ts, rng))

    n = spec.n_patterns * spec.areas_per_pattern
    labels = np.repeat(np.arange(spec.n_patterns), spec.areas_per_pattern)
    scale = rng.uniform(200.0, 20000.0, size=n)
    base = rng.uniform(0.2, 0.5, size=n)
    values = np.empty((spec.t, n))
    for j, p in enumerate(labels):
        values[:, j] = scale[j] * (base[j] + shapes[ARCHETYPES[p]])
    # noise and spikes are sized relative to each area's clean range, i.e. in
    # the units of the normalized profile
    span = values.max(axis=0) - values.min(axis=0)
    if spec.noise_sigma > 0:
        values = values + spec.noise_sigma * span * rng.standard_normal(values.shape)
    if spec.spike_fraction > 0:
        hit = rng.random(values.shape) < spec.spike_fraction
        sign = rng.choice([-1.0, 1.0], size=values.shape)
        values = values + hit * sign * spec.spike_amplitude * span

    ids = [f"A{j + 1:02d}" for j in range(n)]
    return LoadMatrix(ts, values, ids), labels


def adjusted_rand_index(a, b) -> float:
    return float(adjusted_rand_score(np.asarray(a), np.asarray(b)))


def brute_force_best_subset(w, k: int, max_subsets: int = 10**6) -> tuple[tuple, float]:
    """Exhaustive maximum of the facility-location objective over k-subsets.

    The first maximizer in lexicographic order wins.
    """
    w = validate_kernel(w)
    n = w.shape[0]
    if int(k) != k or not 1 <= k <= n:
        raise ValueError(f"k must be an integer in [1, {n}], got {k}")
    if n > 15 or math.comb(n, k) > max_subsets:
        raise ValueError(f"instance too large for enumeration: N={n}, C(N,k)={math.comb(n, k)}")
    best, best_val = None, -np.inf
    for subset in itertools.combinations(range(n), int(k)):
        val = float(w[:, subset].max(axis=1).sum())
        if val > best_val:
            best, best_val = subset, val
    return best, best_val


def random_kernel(n: int, rng: np.random.Generator, dim: int = 3) -> np.ndarray:
    """Valid exp(-d/lam) kernel from random points, used by tests and scripts."""
    x = rng.standard_normal((n, dim))
    diff = x[:, None, :] - x[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    lam = rng.uniform(0.5, 2.0)
    return np.exp(-d / lam)
