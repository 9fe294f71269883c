"""Evaluation protocol: uniform baselines, candidate scoring and threshold sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .distance import (
    DEFAULT_POOL_CAP,
    Metric,
    SurfProfileTable,
    ThresholdSpec,
    pairwise_distance_pool,
    percentile_threshold,
)
from .features import FeatureSpace, FeatureVector, FrameDescriptor, PixelImage, extract
from .matching import MatchResult, Matcher, build_distance_matrix, run_matcher
from .metrics import DiscriminationRecord, SummaryScore, average_discrimination, summary_score

log = logging.getLogger(__name__)

__all__ = [
    "ProtocolConfig",
    "recommended_config",
    "uniform_summary",
    "FrameSource",
    "InMemoryFrameSource",
    "VideoCase",
    "CandidateEvaluation",
    "evaluate_candidate",
    "SweepCell",
    "CurvePoint",
    "SweepResult",
    "build_grid",
    "run_sweep",
    "CURVE_HEADER",
]


@dataclass(frozen=True)
class ProtocolConfig:
    """One choice of feature space, frame metric, threshold and matcher."""

    feature_space: FeatureSpace
    metric: Metric
    threshold: ThresholdSpec
    matcher: Matcher

    def __post_init__(self):
        object.__setattr__(self, "feature_space", FeatureSpace.parse(self.feature_space))
        object.__setattr__(self, "metric", Metric.parse(self.metric))
        object.__setattr__(self, "matcher", Matcher.parse(self.matcher))
        if (self.metric is Metric.surf) != (self.feature_space is FeatureSpace.SURF):
            raise ValueError("the surf metric is used with, and only with, the SURF feature space")
        if self.metric is Metric.surf and self.threshold.is_percentile:
            raise ValueError("percentile thresholds are not supported for the surf metric")

    def to_dict(self) -> dict:
        return {
            "feature": self.feature_space.name,
            "metric": self.metric.value,
            "threshold": {"kind": self.threshold.kind, "value": self.threshold.value},
            "matcher": self.matcher.value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ProtocolConfig":
        thr = d["threshold"]
        if isinstance(thr, Mapping):
            threshold = ThresholdSpec(thr["kind"], float(thr["value"]))
        else:
            threshold = ThresholdSpec.absolute(float(thr))
        return cls(d["feature"], d["metric"], threshold, d["matcher"])


def recommended_config() -> ProtocolConfig:
    """32-bin whole-image hue histogram, Manhattan distance, threshold 0.3, mutual-best matching."""
    return ProtocolConfig(FeatureSpace.H32_1block, Metric.manhattan, ThresholdSpec.absolute(0.3), Matcher.kannappan)


def uniform_summary(n_frames: int, k: int) -> list[int]:
    """Middle frames of ``k`` consecutive, near-equal segments of the video.

    Segment i covers frames ``floor(i n / k)`` to ``floor((i+1) n / k) - 1``;
    its middle is the floor of the mean of the two ends.
    """
    if not 1 <= k <= n_frames:
        raise ValueError(f"summary size k={k} out of range for a {n_frames}-frame video")
    out = []
    for i in range(k):
        start = i * n_frames // k
        end = (i + 1) * n_frames // k - 1
        out.append((start + end) // 2)
    return out


# --- frame sources -------------------------------------------------------------

class FrameSource:
    """Per-video access to frame descriptors, with a cache.

    Subclasses implement :meth:`_image` (decoding) and may supply
    precomputed vectors or SURF profiles.
    """

    def __init__(self, frame_count: int, *, surf_profiles: SurfProfileTable | None = None,
                 precomputed: Mapping[FeatureSpace, Mapping[int, FeatureVector]] | None = None):
        if frame_count < 1:
            raise ValueError("video has no frames")
        self.frame_count = frame_count
        self.surf_profiles = surf_profiles
        self._precomputed = dict(precomputed or {})
        self._cache: dict[tuple[FeatureSpace, int], FrameDescriptor] = {}
        self._pools: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()

    def _image(self, index: int) -> PixelImage:
        raise NotImplementedError

    def _source_name(self, index: int) -> str:
        return f"frame {index}"

    def descriptor(self, index: int, space) -> FrameDescriptor:
        space = FeatureSpace.parse(space)
        if not 0 <= index < self.frame_count:
            raise IndexError(f"frame index {index} out of range (video has {self.frame_count} frames)")
        key = (space, index)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        if space is FeatureSpace.SURF:
            if self.surf_profiles is None:
                raise ValueError("no SURF profiles available for this video")
            desc = FrameDescriptor(index, space, None, "surf-profiles")
        elif space in self._precomputed:
            vectors = self._precomputed[space]
            if index not in vectors:
                raise ValueError(f"no precomputed {space.name} vector for frame {index}")
            desc = FrameDescriptor(index, space, vectors[index], "precomputed")
        elif space.extractable:
            desc = FrameDescriptor(index, space, extract(self._image(index), space), self._source_name(index))
        else:
            raise ValueError(f"no precomputed {space.name} features for this video")
        with self._lock:
            return self._cache.setdefault(key, desc)

    def descriptors(self, indices: Iterable[int], space) -> list[FrameDescriptor]:
        return [self.descriptor(i, space) for i in indices]

    def distance_pool(self, space, metric, seed: int = 0, cap: int = DEFAULT_POOL_CAP) -> np.ndarray:
        """Distances between (sampled) frame pairs of the whole video."""
        space = FeatureSpace.parse(space)
        metric = Metric.parse(metric)
        key = (space, metric, seed, cap)
        with self._lock:
            pool = self._pools.get(key)
        if pool is not None:
            return pool

        def pair_distance(i: int, j: int) -> float:
            D = build_distance_matrix([self.descriptor(i, space)], [self.descriptor(j, space)],
                                      metric, self.surf_profiles)
            return float(D[0, 0])

        pool = pairwise_distance_pool(range(self.frame_count), pair_distance, cap, seed, by_index=True)
        with self._lock:
            return self._pools.setdefault(key, pool)


class InMemoryFrameSource(FrameSource):
    """Frames held as decoded images (or only as precomputed vectors)."""

    def __init__(self, images: Sequence[PixelImage] | None = None, *, frame_count: int | None = None, **kwargs):
        self._images = list(images or [])
        super().__init__(frame_count if frame_count is not None else len(self._images), **kwargs)

    def _image(self, index: int) -> PixelImage:
        if index >= len(self._images):
            raise ValueError(f"no image for frame {index}")
        return self._images[index]


# --- single evaluation ---------------------------------------------------------

def resolve_threshold(source: FrameSource, config: ProtocolConfig, seed: int = 0,
                      pool_cap: int = DEFAULT_POOL_CAP) -> float:
    if not config.threshold.is_percentile:
        return config.threshold.value
    pool = source.distance_pool(config.feature_space, config.metric, seed, pool_cap)
    return percentile_threshold(pool, config.threshold.value)


@dataclass(frozen=True)
class CandidateEvaluation:
    config: ProtocolConfig
    theta: float
    candidate: tuple[int, ...]
    uniform: tuple[int, ...]
    user_ids: tuple[str, ...]
    ground_truths: tuple[tuple[int, ...], ...]
    candidate_scores: tuple[SummaryScore, ...]
    uniform_scores: tuple[SummaryScore, ...]
    candidate_matches: tuple[list, ...]  # per user: [[i, j, d_ij], ...] in frame indices
    uniform_matches: tuple[list, ...]
    record: DiscriminationRecord

    @property
    def c_u(self) -> float:
        return self.record.c_u_mean


def _match_summaries(source, a: Sequence[int], b: Sequence[int], config: ProtocolConfig, theta: float,
                     matrices: dict | None = None) -> tuple[MatchResult, np.ndarray]:
    key = (config.feature_space, config.metric, tuple(a), tuple(b))
    D = matrices.get(key) if matrices is not None else None
    if D is None:
        D = build_distance_matrix(source.descriptors(a, config.feature_space),
                                  source.descriptors(b, config.feature_space),
                                  config.metric, source.surf_profiles)
        if matrices is not None:
            matrices[key] = D
    return run_matcher(config.matcher, D, theta, row_times=a, col_times=b), D


def _frame_pairs(result: MatchResult, D: np.ndarray, a: Sequence[int], b: Sequence[int]) -> list:
    return [[a[i], b[j], d] for i, j, d in result.to_record(D)]


def evaluate_candidate(candidate: Sequence[int], ground_truths: Sequence[Sequence[int]], source: FrameSource,
                       config: ProtocolConfig | None = None, *, user_ids: Sequence[str] | None = None,
                       seed: int = 0, pool_cap: int = DEFAULT_POOL_CAP, theta: float | None = None,
                       _matrices: dict | None = None) -> CandidateEvaluation:
    """Score a candidate summary against each ground truth and against a
    uniform summary of the same size, averaging the discrimination capacity
    over the ground truths.

    Summaries are frame-index lists into ``source``. ``theta`` overrides the
    resolved threshold (used by sweeps that have already resolved it).
    """
    config = config or recommended_config()
    candidate = tuple(int(i) for i in candidate)
    if not candidate:
        raise ValueError("candidate summary is empty")
    if not ground_truths:
        raise ValueError("need at least one ground truth")
    gts = tuple(tuple(int(i) for i in g) for g in ground_truths)
    if any(not g for g in gts):
        raise ValueError("ground truth summary is empty")
    ids = tuple(str(u) for u in user_ids) if user_ids is not None else tuple(str(i + 1) for i in range(len(gts)))
    if len(ids) != len(gts):
        raise ValueError("user_ids and ground_truths differ in length")
    for idx in candidate + sum(gts, ()):
        if not 0 <= idx < source.frame_count:
            raise ValueError(f"unresolved frame index {idx} (video has {source.frame_count} frames)")

    uniform = tuple(uniform_summary(source.frame_count, min(len(candidate), source.frame_count)))
    if theta is None:
        theta = resolve_threshold(source, config, seed, pool_cap)

    cand_scores, unif_scores, cand_pairs, unif_pairs = [], [], [], []
    for gt in gts:
        res, D = _match_summaries(source, candidate, gt, config, theta, _matrices)
        cand_scores.append(summary_score(res.m, len(candidate), len(gt)))
        cand_pairs.append(_frame_pairs(res, D, candidate, gt))
        res, D = _match_summaries(source, uniform, gt, config, theta, _matrices)
        unif_scores.append(summary_score(res.m, len(uniform), len(gt)))
        unif_pairs.append(_frame_pairs(res, D, uniform, gt))

    record = average_discrimination([s.f for s in cand_scores], [s.f for s in unif_scores])
    return CandidateEvaluation(config, float(theta), candidate, uniform, ids, gts, tuple(cand_scores),
                               tuple(unif_scores), tuple(cand_pairs), tuple(unif_pairs), record)


# --- sweeps ----------------------------------------------------------------------

@dataclass
class VideoCase:
    """One video with its ground truths and the algorithmic summaries to score."""

    video_id: str
    source: FrameSource
    user_summaries: Mapping[str, Sequence[int]]
    algo_summaries: Mapping[str, Sequence[int]] = field(default_factory=dict)


@dataclass(frozen=True)
class SweepCell:
    config: ProtocolConfig
    video_id: str
    summarizer_id: str
    c_u: float
    f_candidate_mean: float
    f_uniform_mean: float
    theta: float
    n_users: int

    def to_dict(self) -> dict:
        return {
            **self.config.to_dict(),
            "video_id": self.video_id,
            "summarizer_id": self.summarizer_id,
            "theta_resolved": self.theta,
            "c_u": self.c_u,
            "f_candidate_mean": self.f_candidate_mean,
            "f_uniform_mean": self.f_uniform_mean,
            "n_users": self.n_users,
        }


@dataclass(frozen=True)
class CurvePoint:
    feature: str
    metric: str
    matcher: str
    summarizer: str
    theta: str
    c_u_mean: float
    f_cand_mean: float
    f_unif_mean: float
    n_videos: int


CURVE_HEADER = ("feature", "metric", "matcher", "summarizer", "theta",
                "c_u_mean", "f_cand_mean", "f_unif_mean", "n_videos")


@dataclass
class SweepResult:
    cells: list[SweepCell]
    curves: list[CurvePoint]
    failures: list[dict]

    def curves_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CURVE_HEADER)
        for p in self.curves:
            writer.writerow([p.feature, p.metric, p.matcher, p.summarizer, p.theta,
                             repr(p.c_u_mean), repr(p.f_cand_mean), repr(p.f_unif_mean), p.n_videos])
        return buf.getvalue()

    def cells_jsonl(self) -> str:
        return "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in self.cells)


def build_grid(features: Sequence, metrics: Sequence, matchers: Sequence,
               thresholds: Mapping | None = None) -> list[ProtocolConfig]:
    """Cartesian product of the options; ``thresholds`` maps metric -> ThresholdSpec list.

    Metrics without an entry use their built-in grid. Incompatible
    (feature, metric) combinations are skipped.
    """
    thresholds = {Metric.parse(k): v for k, v in (thresholds or {}).items()}
    grid = []
    for feature in features:
        feature = FeatureSpace.parse(feature)
        for metric in metrics:
            metric = Metric.parse(metric)
            if (metric is Metric.surf) != (feature is FeatureSpace.SURF):
                continue
            for matcher in matchers:
                for thr in thresholds.get(metric) or metric.default_threshold_grid():
                    grid.append(ProtocolConfig(feature, metric, thr, matcher))
    return grid


def _aggregate(cells: Sequence[SweepCell]) -> list[CurvePoint]:
    groups: OrderedDict[tuple, list[SweepCell]] = OrderedDict()
    for c in cells:
        key = (c.config.feature_space.name, c.config.metric.value, c.config.matcher.value,
               c.summarizer_id, str(c.config.threshold))
        groups.setdefault(key, []).append(c)
    points = []
    for key, members in groups.items():
        n = len(members)
        points.append(CurvePoint(
            *key,
            c_u_mean=sum(c.c_u for c in members) / n,
            f_cand_mean=sum(c.f_candidate_mean for c in members) / n,
            f_unif_mean=sum(c.f_uniform_mean for c in members) / n,
            n_videos=len({c.video_id for c in members}),
        ))
    return points


def run_sweep(videos: Sequence[VideoCase], configs: Sequence[ProtocolConfig],
              summarizers: Sequence[str] | None = None, *, seed: int = 0,
              pool_cap: int = DEFAULT_POOL_CAP) -> SweepResult:
    """Evaluate every (config, video, summarizer) cell and average over videos.

    A failing cell is logged and recorded in ``failures``; the sweep only
    fails when no cell succeeds.
    """
    if not configs:
        raise ValueError("empty grid")
    if not videos:
        raise ValueError("no videos to sweep")
    matrices: dict[str, dict] = {v.video_id: {} for v in videos}
    thetas: dict[tuple, float] = {}
    cells, failures = [], []
    for config in configs:
        for video in videos:
            names = summarizers if summarizers is not None else list(video.algo_summaries)
            for name in names:
                try:
                    if name not in video.algo_summaries:
                        raise KeyError(f"video {video.video_id} has no summary from {name!r}")
                    tkey = (video.video_id, config.feature_space, config.metric, config.threshold)
                    if tkey not in thetas:
                        thetas[tkey] = resolve_threshold(video.source, config, seed, pool_cap)
                    users = list(video.user_summaries)
                    ev = evaluate_candidate(video.algo_summaries[name], [video.user_summaries[u] for u in users],
                                            video.source, config, user_ids=users, theta=thetas[tkey],
                                            _matrices=matrices[video.video_id])
                except Exception as exc:  # noqa: BLE001 - cells are isolated by design
                    log.warning("cell failed: %s video=%s summarizer=%s: %s",
                                config.to_dict(), video.video_id, name, exc)
                    failures.append({**config.to_dict(), "video_id": video.video_id,
                                     "summarizer_id": name, "error": str(exc)})
                    continue
                rec = ev.record
                cells.append(SweepCell(config, video.video_id, name, rec.c_u_mean, rec.f_candidate_mean,
                                       rec.f_uniform_mean, ev.theta, len(users)))
    if not cells:
        raise RuntimeError(f"sweep produced no successful cells ({len(failures)} failed)")
    return SweepResult(cells, _aggregate(cells), failures)
