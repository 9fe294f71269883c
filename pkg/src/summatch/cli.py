"""Command-line interface.

Exit status: 0 on success, 1 on validation errors (bad flags, bad input
files, inconsistent options), 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .dataset import import_vsumm, load_manifest, save_manifest
from .distance import DEFAULT_POOL_CAP, Metric, ThresholdSpec
from .features import FeatureSpace, write_feature_file
from .matching import Matcher, build_distance_matrix, run_matcher
from .protocol import (
    ProtocolConfig,
    build_grid,
    evaluate_candidate,
    recommended_config,
    resolve_threshold,
    run_sweep,
    uniform_summary,
)
from .report import evaluation_entry, evaluation_report

log = logging.getLogger("summatch")

EXTRACTABLE = [s.name for s in FeatureSpace if s.extractable]


class UsageError(ValueError):
    pass


class OutputError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SUMMATCH_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SUMMATCH_SEED must be an integer, got {env!r}") from None


def _open_out(out):
    try:
        return open(out, "w", encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {out}: {exc.strerror}") from None


def _write(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        with _open_out(out) as fh:
            fh.write(text)


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _config_from_args(args) -> ProtocolConfig:
    if args.theta is not None and args.percentile is not None:
        raise UsageError("--theta and --percentile are mutually exclusive")
    base = recommended_config()
    metric = Metric.parse(args.metric) if args.metric else base.metric
    if args.theta is not None:
        threshold = ThresholdSpec.absolute(args.theta)
    elif args.percentile is not None:
        threshold = ThresholdSpec.percentile(args.percentile)
    elif metric is base.metric:
        threshold = base.threshold
    else:
        raise UsageError(f"--metric {metric.value} needs an explicit --theta or --percentile")
    feature = args.feature or (FeatureSpace.SURF.name if metric is Metric.surf else base.feature_space.name)
    return ProtocolConfig(FeatureSpace.parse(feature), metric, threshold, Matcher.parse(args.matcher or base.matcher))


def _read_indices(path) -> list[int]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        indices = [int(t) for t in text.split()]
    except ValueError:
        raise UsageError(f"{path}: summary file must hold whitespace-separated integers") from None
    if not indices:
        raise UsageError(f"{path}: empty summary")
    return indices


# --- subcommands --------------------------------------------------------------

def cmd_baseline(args) -> int:
    indices = uniform_summary(args.frames, args.k)
    _write(" ".join(str(i) for i in indices) + "\n", args.out)
    return 0


def cmd_evaluate(args) -> int:
    seed = _seed(args)
    config = _config_from_args(args)
    manifest = load_manifest(args.manifest)
    entries = []
    videos = [manifest.video(v) for v in args.video] if args.video else list(manifest.videos)
    for video in videos:
        source = manifest.open_video(video)
        users = args.users or list(video.user_summaries)
        missing = [u for u in users if u not in video.user_summaries]
        if missing:
            raise UsageError(f"video {video.video_id}: unknown user(s) {missing}")
        summarizers = args.summarizer or list(video.algo_summaries)
        for name in summarizers:
            if name not in video.algo_summaries:
                raise UsageError(f"video {video.video_id}: no summary from {name!r}")
            ev = evaluate_candidate(video.algo_summaries[name], [video.user_summaries[u] for u in users],
                                    source, config, user_ids=users, seed=seed, pool_cap=args.pool_cap)
            entries.append(evaluation_entry(video.video_id, name, ev, manifest.panel_size))
    if not entries:
        raise UsageError("nothing to evaluate: no algorithmic summaries selected")
    _write(_dump(evaluation_report(entries, seed=seed, config=config.to_dict())), args.out)
    return 0


def _grid_from_file(path) -> list[ProtocolConfig]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: parse error: {exc}") from None
    if isinstance(doc, list):
        doc = {"configs": doc}
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: grid must be a JSON object or list")
    if "configs" in doc:
        return [ProtocolConfig.from_dict(c) for c in doc["configs"]]
    thresholds = {}
    for metric, values in (doc.get("thresholds") or {}).items():
        specs = []
        for v in values:
            specs.append(ThresholdSpec(v["kind"], float(v["value"])) if isinstance(v, dict)
                         else ThresholdSpec.percentile(float(v)) if Metric.parse(metric) is Metric.euclidean
                         else ThresholdSpec.absolute(float(v)))
        thresholds[metric] = specs
    features, metrics, matchers = doc.get("features", []), doc.get("metrics", []), doc.get("matchers", [])
    return build_grid(features, metrics, matchers, thresholds) if features and metrics and matchers else []


def cmd_sweep(args) -> int:
    seed = _seed(args)
    if args.grid:
        configs = _grid_from_file(args.grid)
    else:
        configs = build_grid(args.features, args.metrics, args.matchers)
    if not configs:
        raise UsageError("empty grid")
    manifest = load_manifest(args.manifest)
    cases = manifest.cases(args.video or None)
    result = run_sweep(cases, configs, args.summarizer or None, seed=seed, pool_cap=args.pool_cap)
    _write(result.curves_csv(), args.out)
    cells = args.cells
    if cells is None and args.out not in (None, "-"):
        cells = str(Path(args.out).with_suffix(".cells.jsonl"))
    if cells is not None:
        _write(result.cells_jsonl(), cells)
    for failure in result.failures:
        print(f"cell failed: {json.dumps(failure, sort_keys=True)}", file=sys.stderr)
    return 0


def cmd_match(args) -> int:
    config = _config_from_args(args)
    manifest = load_manifest(args.manifest)
    video = manifest.video(args.video)
    source = manifest.open_video(video)
    a, b = _read_indices(args.candidate), _read_indices(args.truth)
    for i in a + b:
        if not 0 <= i < video.frame_count:
            raise UsageError(f"frame index {i} out of range (frame_count {video.frame_count})")
    theta = resolve_threshold(source, config, _seed(args), args.pool_cap)
    D = build_distance_matrix(source.descriptors(a, config.feature_space), source.descriptors(b, config.feature_space),
                              config.metric, source.surf_profiles)
    matchers = list(Matcher) if args.all_matchers else [config.matcher]
    records = []
    for matcher in matchers:
        res = run_matcher(matcher, D, theta, row_times=a, col_times=b)
        records.append({
            "matcher": matcher.value,
            "theta": theta,
            "m": res.m,
            "pairs": [[a[i], b[j], d] for i, j, d in res.to_record(D)],
        })
    _write(_dump(records if args.all_matchers else records[0]), args.out)
    return 0


def cmd_features(args) -> int:
    manifest = load_manifest(args.manifest)
    video = manifest.video(args.video)
    source = manifest.open_video(video)
    space = FeatureSpace.parse(args.feature)
    if space is FeatureSpace.SURF:
        raise UsageError("SURF frames have no feature vectors")
    indices = args.frames if args.frames else range(video.frame_count)
    descs = source.descriptors(indices, space)
    tag = space.name if space.extractable else "CNN"
    if args.out is None or args.out == "-":
        write_feature_file(sys.stdout, tag, descs)
    else:
        with _open_out(args.out) as fh:
            write_feature_file(fh, tag, descs)
    return 0


def cmd_import_vsumm(args) -> int:
    manifest = import_vsumm(args.root, index_base=args.index_base)
    if args.out is None or args.out == "-":
        _write(_dump(manifest.to_dict()), None)
    else:
        try:
            save_manifest(manifest, args.out)
        except OSError as exc:
            raise OutputError(f"cannot write {args.out}: {exc.strerror}") from None
    return 0


# --- parser ----------------------------------------------------------------------

def _add_config_flags(p) -> None:
    p.add_argument("--feature", help=f"feature space ({', '.join(s.name for s in FeatureSpace)})")
    p.add_argument("--metric", choices=[m.value for m in Metric])
    p.add_argument("--theta", type=float, help="absolute threshold")
    p.add_argument("--percentile", type=float, help="threshold as a percentile of the video's distance pool")
    p.add_argument("--matcher", choices=[m.value for m in Matcher])


def _add_common(p) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to $SUMMATCH_SEED, then 0)")
    p.add_argument("--pool-cap", type=int, default=DEFAULT_POOL_CAP,
                   help="maximum number of frame pairs sampled for percentile thresholds")
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="summatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="score algorithmic summaries against user ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video", action="append", help="video id (repeatable; default: all)")
    p.add_argument("--summarizer", action="append", help="summarizer id (repeatable; default: all)")
    p.add_argument("--users", nargs="+", help="restrict to these user ids")
    _add_config_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate a grid of configurations and write C_U curves")
    p.add_argument("--manifest", required=True)
    p.add_argument("--grid", help="JSON grid file")
    p.add_argument("--features", nargs="+", default=EXTRACTABLE)
    p.add_argument("--metrics", nargs="+", default=["manhattan", "euclidean"],
                   choices=[m.value for m in Metric])
    p.add_argument("--matchers", nargs="+", default=[m.value for m in Matcher],
                   choices=[m.value for m in Matcher])
    p.add_argument("--video", action="append")
    p.add_argument("--summarizer", action="append")
    p.add_argument("--cells", help="JSON-lines cell output (default: next to --out)")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("baseline", help="print uniform summary frame indices")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("match", help="match two summaries of one video")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--candidate", required=True, help="file of frame indices")
    p.add_argument("--truth", required=True, help="file of frame indices")
    p.add_argument("--all-matchers", action="store_true")
    _add_config_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("features", help="dump feature vectors in the feature-file format")
    p.add_argument("--manifest", required=True)
    p.add_argument("--video", required=True)
    p.add_argument("--feature", default=recommended_config().feature_space.name)
    p.add_argument("--frames", type=int, nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("import-vsumm", help="build a manifest from a VSUMM-style directory tree")
    p.add_argument("--root", required=True)
    p.add_argument("--index-base", type=int, default=0, choices=[0, 1],
                   help="subtract this from keyframe numbers (1 for one-based names)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_import_vsumm)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"summatch: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, IndexError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"summatch: error: {msg}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"summatch: failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
