"""Frame-to-frame distances and threshold calibration."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .features import FeatureVector

__all__ = [
    "Metric",
    "SurfKeypointProfile",
    "SurfProfileTable",
    "ThresholdSpec",
    "manhattan",
    "euclidean",
    "surf_distance",
    "percentile_threshold",
    "pairwise_distance_pool",
    "load_surf_profiles",
    "MANHATTAN_GRID",
    "EUCLIDEAN_PERCENTILE_GRID",
    "SURF_GRID",
    "DEFAULT_POOL_CAP",
]

# default sweep grids: absolute thresholds for manhattan/surf, percentiles for euclidean
MANHATTAN_GRID = (0.01, 0.05) + tuple(round(0.05 * k, 2) for k in range(2, 15))
EUCLIDEAN_PERCENTILE_GRID = (0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 3.0)
SURF_GRID = (0.01, 0.05) + tuple(round(0.05 * k, 2) for k in range(2, 9))

DEFAULT_POOL_CAP = 100_000


class Metric(str, enum.Enum):
    manhattan = "manhattan"
    euclidean = "euclidean"
    surf = "surf"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown metric {value!r}") from None

    def default_threshold_grid(self) -> tuple["ThresholdSpec", ...]:
        if self is Metric.euclidean:
            return tuple(ThresholdSpec.percentile(p) for p in EUCLIDEAN_PERCENTILE_GRID)
        grid = MANHATTAN_GRID if self is Metric.manhattan else SURF_GRID
        return tuple(ThresholdSpec.absolute(t) for t in grid)


def _coords(u, v) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(u, FeatureVector) and isinstance(v, FeatureVector):
        if u.space is not v.space:
            raise ValueError(f"feature space mismatch: {u.space.name} vs {v.space.name}")
    a = u.values if isinstance(u, FeatureVector) else np.asarray(u, dtype=float).ravel()
    b = v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=float).ravel()
    if a.size != b.size:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def manhattan(u, v) -> float:
    a, b = _coords(u, v)
    return float(np.abs(a - b).sum())


def euclidean(u, v) -> float:
    a, b = _coords(u, v)
    return float(np.sqrt(np.sum((a - b) ** 2)))


@dataclass(frozen=True)
class SurfKeypointProfile:
    """Keypoint counts for a frame pair: n1, n2 detected; k1, k2 matched across."""

    n1: int
    n2: int
    k1: int
    k2: int

    def __post_init__(self):
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError("keypoint counts must be nonnegative")
        if not (0 <= self.k1 <= self.n1 and 0 <= self.k2 <= self.n2):
            raise ValueError(f"matched counts out of range: {self}")

    def swapped(self) -> "SurfKeypointProfile":
        return SurfKeypointProfile(self.n2, self.n1, self.k2, self.k1)


def surf_distance(profile: SurfKeypointProfile) -> float:
    """``1 - 2 min(k1, k2) / (n1 + n2)``."""
    total = profile.n1 + profile.n2
    if total == 0:
        raise ValueError("no keypoints")
    return 1.0 - 2.0 * min(profile.k1, profile.k2) / total


class SurfProfileTable:
    """Keypoint profiles keyed by unordered frame pair.

    A frame compared with itself has distance 0 whether or not the pair is
    listed.
    """

    def __init__(self, profiles: dict[tuple[int, int], SurfKeypointProfile] | None = None):
        self._profiles: dict[tuple[int, int], SurfKeypointProfile] = {}
        for (i, j), p in (profiles or {}).items():
            self.add(i, j, p)

    def add(self, i: int, j: int, profile: SurfKeypointProfile) -> None:
        if i <= j:
            self._profiles[(i, j)] = profile
        else:
            self._profiles[(j, i)] = profile.swapped()

    def __len__(self):
        return len(self._profiles)

    def profile(self, i: int, j: int) -> SurfKeypointProfile:
        key = (min(i, j), max(i, j))
        if key not in self._profiles:
            raise KeyError(f"missing SURF profile for frame pair ({i}, {j})")
        p = self._profiles[key]
        return p if i <= j else p.swapped()

    def distance(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        return surf_distance(self.profile(i, j))


def load_surf_profiles(path) -> SurfProfileTable:
    """Parse lines ``<frame_i> <frame_j> <n_i> <n_j> <k_i> <k_j>``."""
    path = Path(path)
    table = SurfProfileTable()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) != 6:
            raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(tokens)}")
        try:
            i, j, ni, nj, ki, kj = (int(t) for t in tokens)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer field") from None
        if i < 0 or j < 0:
            raise ValueError(f"{path}:{lineno}: negative frame index")
        table.add(i, j, SurfKeypointProfile(ni, nj, ki, kj))
    return table


@dataclass(frozen=True)
class ThresholdSpec:
    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("absolute", "percentile"):
            raise ValueError(f"unknown threshold kind {self.kind!r}")
        if self.kind == "absolute" and not self.value >= 0:
            raise ValueError("absolute threshold must be >= 0")
        if self.kind == "percentile" and not 0 <= self.value <= 100:
            raise ValueError("percentile must lie in [0, 100]")

    @classmethod
    def absolute(cls, theta: float) -> "ThresholdSpec":
        return cls("absolute", float(theta))

    @classmethod
    def percentile(cls, p: float) -> "ThresholdSpec":
        return cls("percentile", float(p))

    @property
    def is_percentile(self) -> bool:
        return self.kind == "percentile"

    def __str__(self):
        return f"p{self.value:.12g}" if self.is_percentile else f"{self.value:.12g}"


def percentile_threshold(distances: Sequence[float], p: float) -> float:
    """Linear interpolation between closest ranks, rank ``1 + p/100 (N-1)``."""
    values = np.asarray(distances, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("empty distance pool")
    if not 0 <= p <= 100:
        raise ValueError("percentile must lie in [0, 100]")
    return float(np.percentile(values, p, method="linear"))


def _pair_from_linear(k: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    # k enumerates pairs (i, j), i < j, row by row
    row_len = np.arange(n - 1, 0, -1, dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(row_len)[:-1]])
    i = np.searchsorted(starts, k, side="right") - 1
    j = k - starts[i] + i + 1
    return i, j


def pairwise_distance_pool(frames, metric: Callable[[int, int], float] | Callable, sample_cap: int = DEFAULT_POOL_CAP,
                           seed: int = 0, *, by_index: bool = False) -> np.ndarray:
    """Distances between frame pairs of one video.

    With N frames, all N(N-1)/2 distances are returned when that count is at
    most ``sample_cap``; otherwise ``sample_cap`` distinct pairs are drawn
    uniformly with ``seed``. ``frames`` may be any indexable sequence; items
    are only accessed for pairs that are used. With ``by_index`` the metric
    is called with the two frame positions instead of the items.
    """
    n = len(frames)
    if n < 2:
        raise ValueError("need at least 2 frames for a distance pool")
    if sample_cap < 1:
        raise ValueError("sample_cap must be positive")
    total = n * (n - 1) // 2
    if total <= sample_cap:
        rows, cols = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        picks = np.sort(rng.choice(total, size=sample_cap, replace=False))
        rows, cols = _pair_from_linear(picks, n)
    if by_index:
        return np.array([metric(int(i), int(j)) for i, j in zip(rows, cols)])
    return np.array([metric(frames[int(i)], frames[int(j)]) for i, j in zip(rows, cols)])
