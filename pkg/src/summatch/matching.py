"""Pairing frames of two summaries under a distance threshold.

Each matcher takes a distance matrix ``D`` (rows: candidate summary,
columns: ground truth) and a threshold, and returns the number of matched
pairs ``m`` together with the pairs themselves. A pair matches only when its
distance is strictly below the threshold. Ties are broken towards the lowest
(row, column) index everywhere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .distance import Metric, SurfProfileTable
from .features import FeatureSpace, FrameDescriptor

__all__ = [
    "Matcher",
    "MatchResult",
    "as_distance_matrix",
    "build_distance_matrix",
    "hungarian_assign",
    "match_naive",
    "match_greedy",
    "match_hungarian",
    "match_mahmoud",
    "match_kannappan",
    "match_maximal",
    "run_matcher",
]


@dataclass(frozen=True)
class MatchResult:
    """Match count ``m`` and the matched (row, col) pairs.

    For the naive matcher, ``pairs`` lists each matched row with its nearest
    column, so columns may repeat.
    """

    m: int
    pairs: tuple[tuple[int, int], ...]

    def to_record(self, D: np.ndarray) -> list[list]:
        return [[i, j, float(D[i, j])] for i, j in self.pairs]


def as_distance_matrix(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] < 1 or D.shape[1] < 1:
        raise ValueError(f"distance matrix must be 2-D and non-empty, got shape {D.shape}")
    if not np.all(np.isfinite(D)) or D.min() < 0:
        raise ValueError("distance matrix entries must be finite and nonnegative")
    return D


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if math.isnan(theta) or theta < 0:
        raise ValueError(f"threshold must be nonnegative, got {theta}")
    return theta


def build_distance_matrix(K1: Sequence[FrameDescriptor], K2: Sequence[FrameDescriptor], metric,
                          surf_profiles: SurfProfileTable | None = None) -> np.ndarray:
    """``D[i, j] = metric(K1[i], K2[j])``."""
    if not K1 or not K2:
        raise ValueError("summaries must be non-empty")
    metric = Metric.parse(metric)
    spaces = {d.space for d in K1} | {d.space for d in K2}
    if len(spaces) != 1:
        raise ValueError(f"incompatible feature spaces: {sorted(s.name for s in spaces)}")
    space = spaces.pop()

    if metric is Metric.surf:
        if space is not FeatureSpace.SURF:
            raise ValueError("the surf metric needs SURF frame descriptors")
        if surf_profiles is None:
            raise ValueError("missing SURF profiles")
        return np.array([[surf_profiles.distance(a.frame_index, b.frame_index) for b in K2] for a in K1])

    if space is FeatureSpace.SURF:
        raise ValueError(f"SURF descriptors cannot be compared with the {metric.value} metric")
    A = np.stack([d.vector.values for d in K1])
    B = np.stack([d.vector.values for d in K2])
    if A.shape[1] != B.shape[1]:
        raise ValueError("feature length mismatch")
    diff = A[:, None, :] - B[None, :, :]
    if metric is Metric.manhattan:
        return np.abs(diff).sum(axis=2)
    return np.sqrt((diff ** 2).sum(axis=2))


# --- assignment solver ---------------------------------------------------------

def _solve_with_potentials(a: list[list[float]], n: int) -> tuple[list[int], list[float], list[float]]:
    """Square min-cost assignment by shortest augmenting paths, O(n^3).

    Returns the column of each row and potentials ``u``, ``v`` with
    ``a[i][j] - u[i] - v[j] >= 0`` everywhere and ``== 0`` on the assignment.
    """
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    owner = [0] * (n + 1)  # owner[j]: row (1-based) assigned to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = a[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1

    row_to = [0] * n
    for j in range(1, n + 1):
        row_to[owner[j] - 1] = j - 1
    return row_to, u[1:], v[1:]


def _lowest_index_optimum(a, n: int, n_rows: int, row_to: list[int], u, v) -> list[int]:
    """Among all optimal assignments pick the one whose real rows take the lowest columns.

    With optimal potentials fixed, the optimal assignments are exactly the
    perfect matchings on tight edges. Rows are fixed in order to their lowest
    tight column that still admits a perfect matching, re-routing the current
    matching along an alternating path when needed.
    """
    tol = 1e-9 * max(1.0, max(abs(x) for row in a for x in row))
    tight = [[j for j in range(n) if a[i][j] - u[i] - v[j] <= tol] for i in range(n)]
    col_to = [0] * n
    for i, j in enumerate(row_to):
        col_to[j] = i
    fixed = [False] * n

    def reroute(r: int, target: int, seen: set) -> bool:
        for c in tight[r]:
            if fixed[c] or c in seen:
                continue
            seen.add(c)
            if c == target or reroute(col_to[c], target, seen):
                row_to[r], col_to[c] = c, r
                return True
        return False

    for i in range(n_rows):
        for j in tight[i]:  # ascending, so real columns come before padding
            if row_to[i] == j:
                break
            if not fixed[j] and reroute(col_to[j], row_to[i], {j}):
                row_to[i], col_to[j] = j, i
                break
        fixed[row_to[i]] = True
    return row_to


def hungarian_assign(cost) -> list[tuple[int, int]]:
    """Minimum-total-cost matching of cardinality min(N1, N2).

    The short side is padded with zero-cost dummy nodes which are dropped
    from the returned pairs. Among equal-cost optima the one with the lowest
    (row, col) pairs is returned.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] < 1 or C.shape[1] < 1:
        raise ValueError("cost matrix must be 2-D and non-empty")
    if not np.all(np.isfinite(C)):
        raise ValueError("costs must be finite")
    n_rows, n_cols = C.shape
    n = max(n_rows, n_cols)
    a = np.zeros((n, n))
    a[:n_rows, :n_cols] = C
    a = a.tolist()
    row_to, u, v = _solve_with_potentials(a, n)
    row_to = _lowest_index_optimum(a, n, n_rows, row_to, u, v)
    return [(i, row_to[i]) for i in range(n_rows) if row_to[i] < n_cols]


# --- the six matchers ----------------------------------------------------------

def match_naive(D, theta: float) -> MatchResult:
    """Count rows having any column closer than ``theta``; nothing is eliminated."""
    D = as_distance_matrix(D)
    theta = _check_theta(theta)
    nearest = D.argmin(axis=1)
    pairs = tuple((i, int(j)) for i, j in enumerate(nearest) if D[i, j] < theta)
    return MatchResult(len(pairs), pairs)


def match_greedy(D, theta: float) -> MatchResult:
    """Repeatedly accept the smallest remaining distance and remove its row and column."""
    D = as_distance_matrix(D)
    theta = _check_theta(theta)
    # row-major order of a stable sort gives lowest-index tie-breaking
    order = np.argsort(D, axis=None, kind="stable")
    used_rows, used_cols = set(), set()
    pairs = []
    limit = min(D.shape)
    for flat in order:
        i, j = divmod(int(flat), D.shape[1])
        if D[i, j] >= theta:
            break
        if i in used_rows or j in used_cols:
            continue
        pairs.append((i, j))
        used_rows.add(i)
        used_cols.add(j)
        if len(pairs) == limit:
            break
    return MatchResult(len(pairs), tuple(pairs))


def match_hungarian(D, theta: float) -> MatchResult:
    """Minimum-total-distance complete matching, then keep pairs below ``theta``."""
    D = as_distance_matrix(D)
    theta = _check_theta(theta)
    pairs = tuple((i, j) for i, j in hungarian_assign(D) if D[i, j] < theta)
    return MatchResult(len(pairs), pairs)


def _temporal_order(times, size: int, what: str) -> list[int]:
    if times is None:
        return list(range(size))
    times = list(times)
    if len(times) != size:
        raise ValueError(f"{what} temporal indices: expected {size}, got {len(times)}")
    if any(t is None for t in times):
        raise ValueError(f"missing temporal indices for {what}")
    return sorted(range(size), key=lambda k: (times[k], k))


def match_mahmoud(D, theta: float, row_times=None, col_times=None) -> MatchResult:
    """Scan candidate frames in temporal order; each takes the first free
    ground-truth frame (also in temporal order) closer than ``theta``.

    ``row_times`` / ``col_times`` give the temporal position of each row and
    column; when omitted the matrix is taken to be in temporal order already.
    """
    D = as_distance_matrix(D)
    theta = _check_theta(theta)
    rows = _temporal_order(row_times, D.shape[0], "candidate")
    cols = _temporal_order(col_times, D.shape[1], "ground truth")
    free = list(cols)
    pairs = []
    for i in rows:
        for j in free:
            if D[i, j] < theta:
                pairs.append((i, j))
                free.remove(j)
                break
    return MatchResult(len(pairs), tuple(pairs))


def match_kannappan(D, theta: float) -> MatchResult:
    """Pairs that are each other's nearest neighbour, thresholded afterwards."""
    D = as_distance_matrix(D)
    theta = _check_theta(theta)
    best_col = D.argmin(axis=1)
    best_row = D.argmin(axis=0)
    pairs = tuple(
        (i, int(j)) for i, j in enumerate(best_col)
        if best_row[j] == i and D[i, j] < theta
    )
    return MatchResult(len(pairs), pairs)


def match_maximal(D, theta: float) -> MatchResult:
    """Maximum-cardinality matching on the sub-threshold pairs.

    Solved as a minimum-cost assignment on the 0/1 matrix that marks pairs at
    or above the threshold with cost 1.
    """
    D = as_distance_matrix(D)
    theta = _check_theta(theta)
    binary = (D >= theta).astype(float)
    pairs = tuple((i, j) for i, j in hungarian_assign(binary) if D[i, j] < theta)
    return MatchResult(len(pairs), pairs)


class Matcher(str, enum.Enum):
    naive = "naive"
    greedy = "greedy"
    hungarian = "hungarian"
    mahmoud = "mahmoud"
    kannappan = "kannappan"
    maximal = "maximal"

    @classmethod
    def parse(cls, value) -> "Matcher":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown matcher {value!r}") from None

    @property
    def eliminates(self) -> bool:
        """True when every frame is used in at most one pair."""
        return self is not Matcher.naive


_MATCHERS: dict[Matcher, Callable[..., MatchResult]] = {
    Matcher.naive: match_naive,
    Matcher.greedy: match_greedy,
    Matcher.hungarian: match_hungarian,
    Matcher.kannappan: match_kannappan,
    Matcher.maximal: match_maximal,
}


def run_matcher(matcher, D, theta: float, row_times=None, col_times=None) -> MatchResult:
    matcher = Matcher.parse(matcher)
    if matcher is Matcher.mahmoud:
        return match_mahmoud(D, theta, row_times, col_times)
    return _MATCHERS[matcher](D, theta)
