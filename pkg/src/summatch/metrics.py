"""Summary-level scores built from match counts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "SummaryScore",
    "DiscriminationRecord",
    "f_measure",
    "cus",
    "summary_score",
    "discrimination_capacity",
    "average_discrimination",
]


def _check_sizes(n1: int, n2: int, m: int) -> None:
    if n1 < 1 or n2 < 1:
        raise ValueError("summaries must contain at least one frame")
    if m < 0:
        raise ValueError("match count must be nonnegative")


def f_measure(m: int, n1: int, n2: int) -> float:
    """``2m / (n1 + n2)``, clipped to 1."""
    _check_sizes(n1, n2, m)
    return min(1.0, 2.0 * m / (n1 + n2))


def cus(m: int, n1: int, n2: int) -> tuple[float, float]:
    """Accuracy and error rates ``m / n2`` and ``(n1 - m) / n2``, unclipped.

    ``n1`` is the candidate size, ``n2`` the ground-truth size.
    """
    if n2 < 1:
        raise ValueError("ground truth must contain at least one frame")
    if m < 0:
        raise ValueError("match count must be nonnegative")
    return m / n2, (n1 - m) / n2


@dataclass(frozen=True)
class SummaryScore:
    f: float
    cus_a: float
    cus_e: float
    m: int
    n_candidate: int
    n_truth: int
    clipped: bool

    @property
    def recall(self) -> float:
        return self.m / self.n_candidate

    @property
    def precision(self) -> float:
        return self.m / self.n_truth


def summary_score(m: int, n_candidate: int, n_truth: int) -> SummaryScore:
    f = f_measure(m, n_candidate, n_truth)
    cus_a, cus_e = cus(m, n_candidate, n_truth)
    clipped = 2 * m > n_candidate + n_truth
    return SummaryScore(f, cus_a, cus_e, m, n_candidate, n_truth, clipped)


def discrimination_capacity(f_candidate: float, f_uniform: float) -> float:
    """How far the candidate's F beats the same-size uniform baseline's F.

    Negative when the baseline is closer to the ground truth.
    """
    for name, f in (("f_candidate", f_candidate), ("f_uniform", f_uniform)):
        if not 0.0 <= f <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {f}")
    return f_candidate - f_uniform


@dataclass(frozen=True)
class DiscriminationRecord:
    c_u_per_user: tuple[float, ...]
    c_u_mean: float
    f_candidate_per_user: tuple[float, ...]
    f_uniform_per_user: tuple[float, ...]

    @property
    def f_candidate_mean(self) -> float:
        return sum(self.f_candidate_per_user) / len(self.f_candidate_per_user)

    @property
    def f_uniform_mean(self) -> float:
        return sum(self.f_uniform_per_user) / len(self.f_uniform_per_user)


def average_discrimination(f_candidate_per_user: Sequence[float],
                           f_uniform_per_user: Sequence[float]) -> DiscriminationRecord:
    """Per-user discrimination capacities and their mean over users."""
    f_cand = tuple(float(f) for f in f_candidate_per_user)
    f_unif = tuple(float(f) for f in f_uniform_per_user)
    if not f_cand:
        raise ValueError("need at least one ground truth")
    if len(f_cand) != len(f_unif):
        raise ValueError(f"length mismatch: {len(f_cand)} candidate vs {len(f_unif)} uniform scores")
    per_user = tuple(discrimination_capacity(a, b) for a, b in zip(f_cand, f_unif))
    return DiscriminationRecord(per_user, sum(per_user) / len(per_user), f_cand, f_unif)
