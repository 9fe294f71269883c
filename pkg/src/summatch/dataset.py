"""Dataset manifests, frame decoding and the VSUMM layout importer.

A manifest is one JSON document::

    {"videos": [{"video_id": "v22",
                 "frames_dir": "frames/v22",
                 "frame_count": 1500,
                 "user_summaries": [{"user_id": "1", "frames": [12, 480, 901]}],
                 "algo_summaries": [{"summarizer_id": "VSUMM1", "frames": [15, 470]}],
                 "surf_profile_path": null,
                 "precomputed_feature_paths": {"CNN": "features/v22_cnn.txt"}}]}

Relative paths are resolved against the manifest's directory. Frames are
still images named ``frame_%06d.<ext>`` with zero-based indices.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .distance import load_surf_profiles
from .features import PixelImage, load_precomputed_features
from .protocol import FrameSource, VideoCase

__all__ = [
    "FrameDecodeError",
    "VideoEntry",
    "DatasetManifest",
    "load_manifest",
    "save_manifest",
    "decode_frame",
    "frame_path",
    "DirectoryFrameSource",
    "import_vsumm",
    "FRAME_EXTENSIONS",
]

FRAME_EXTENSIONS = ("png", "jpg", "jpeg", "bmp")


class FrameDecodeError(ValueError):
    pass


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    frames_dir: str
    frame_count: int
    user_summaries: dict[str, tuple[int, ...]]
    algo_summaries: dict[str, tuple[int, ...]] = field(default_factory=dict)
    surf_profile_path: str | None = None
    precomputed_feature_paths: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "frames_dir": self.frames_dir,
            "frame_count": self.frame_count,
            "user_summaries": [{"user_id": u, "frames": list(f)} for u, f in self.user_summaries.items()],
            "algo_summaries": [{"summarizer_id": s, "frames": list(f)} for s, f in self.algo_summaries.items()],
            "surf_profile_path": self.surf_profile_path,
            "precomputed_feature_paths": dict(self.precomputed_feature_paths),
        }


@dataclass(frozen=True)
class DatasetManifest:
    videos: tuple[VideoEntry, ...]
    base_dir: Path = field(default=Path("."), compare=False)

    def to_dict(self) -> dict:
        return {"videos": [v.to_dict() for v in self.videos]}

    def video(self, video_id: str) -> VideoEntry:
        for v in self.videos:
            if v.video_id == str(video_id):
                return v
        raise KeyError(f"no video {video_id!r} in manifest")

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def panel_size(self) -> int:
        """Largest number of ground truths over the videos."""
        return max((len(v.user_summaries) for v in self.videos), default=0)

    def open_video(self, entry: VideoEntry) -> "DirectoryFrameSource":
        surf = load_surf_profiles(self.resolve(entry.surf_profile_path)) if entry.surf_profile_path else None
        precomputed = {}
        for tag, path in entry.precomputed_feature_paths.items():
            descs = load_precomputed_features(self.resolve(path), expected_space=tag)
            space = descs[0].space
            vectors = {d.frame_index: d.vector for d in descs}
            bad = [i for i in vectors if i >= entry.frame_count]
            if bad:
                raise ValueError(f"{path}: frame index {bad[0]} out of range")
            precomputed[space] = vectors
        return DirectoryFrameSource(self.resolve(entry.frames_dir), entry.frame_count,
                                    surf_profiles=surf, precomputed=precomputed)

    def cases(self, video_ids=None) -> list[VideoCase]:
        entries = self.videos if video_ids is None else [self.video(v) for v in video_ids]
        return [VideoCase(e.video_id, self.open_video(e), e.user_summaries, e.algo_summaries) for e in entries]


def _index_list(value, where: str) -> tuple[int, ...]:
    if not isinstance(value, list):
        raise ValueError(f"{where}: frames must be a list of integers")
    if any(not isinstance(i, int) or isinstance(i, bool) for i in value):
        raise ValueError(f"{where}: frames must be integers")
    return tuple(value)


def _summaries(items, id_key: str, where: str) -> dict[str, tuple[int, ...]]:
    if not isinstance(items, list):
        raise ValueError(f"{where}: expected a list")
    out: dict[str, tuple[int, ...]] = {}
    for item in items:
        if not isinstance(item, dict) or id_key not in item or "frames" not in item:
            raise ValueError(f"{where}: each entry needs {id_key!r} and 'frames'")
        sid = str(item[id_key])
        if sid in out:
            raise ValueError(f"{where}: duplicate id {sid!r}")
        frames = _index_list(item["frames"], f"{where}[{sid}]")
        if not frames:
            raise ValueError(f"{where}[{sid}]: empty summary")
        if len(set(frames)) != len(frames):
            raise ValueError(f"{where}[{sid}]: repeated frame index")
        out[sid] = frames
    return out


def parse_manifest(doc, base_dir: Path = Path("."), *, check_dirs: bool = True) -> DatasetManifest:
    if not isinstance(doc, dict) or not isinstance(doc.get("videos"), list):
        raise ValueError("manifest must be an object with a 'videos' list")
    videos, seen = [], set()
    for n, raw in enumerate(doc["videos"]):
        if not isinstance(raw, dict):
            raise ValueError(f"videos[{n}]: expected an object")
        for key in ("video_id", "frames_dir", "frame_count", "user_summaries"):
            if key not in raw:
                raise ValueError(f"videos[{n}]: missing {key!r}")
        vid = str(raw["video_id"])
        if vid in seen:
            raise ValueError(f"duplicate id {vid!r}")
        seen.add(vid)
        count = raw["frame_count"]
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            raise ValueError(f"video {vid}: frame_count must be a positive integer")
        users = _summaries(raw["user_summaries"], "user_id", f"video {vid} user_summaries")
        algos = _summaries(raw.get("algo_summaries", []), "summarizer_id", f"video {vid} algo_summaries")
        for frames in list(users.values()) + list(algos.values()):
            for i in frames:
                if not 0 <= i < count:
                    raise ValueError(f"video {vid}: frame index {i} out of range (frame_count {count})")
        paths = raw.get("precomputed_feature_paths") or {}
        if not isinstance(paths, dict):
            raise ValueError(f"video {vid}: precomputed_feature_paths must be an object")
        entry = VideoEntry(vid, str(raw["frames_dir"]), count, users, algos,
                           raw.get("surf_profile_path"), {str(k): str(v) for k, v in paths.items()})
        if check_dirs:
            d = Path(entry.frames_dir)
            d = d if d.is_absolute() else base_dir / d
            if not d.is_dir():
                raise ValueError(f"video {vid}: missing frames_dir {d}")
        videos.append(entry)
    return DatasetManifest(tuple(videos), base_dir)


def load_manifest(path, *, check_dirs: bool = True) -> DatasetManifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: parse error: {exc}") from None
    return parse_manifest(doc, path.parent, check_dirs=check_dirs)


def save_manifest(manifest: DatasetManifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")


# --- frames ---------------------------------------------------------------------

def frame_path(frames_dir, index: int) -> Path:
    """Existing file for frame ``index``; raises FileNotFoundError naming the expected path."""
    frames_dir = Path(frames_dir)
    stem = f"frame_{index:06d}"
    for ext in FRAME_EXTENSIONS:
        p = frames_dir / f"{stem}.{ext}"
        if p.is_file():
            return p
    raise FileNotFoundError(f"missing frame {index}: expected {frames_dir / stem}.{{{','.join(FRAME_EXTENSIONS)}}}")


def decode_frame(frames_dir, index: int) -> PixelImage:
    path = frame_path(frames_dir, index)
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=float) / 255.0
    except (OSError, SyntaxError, UnidentifiedImageError) as exc:
        raise FrameDecodeError(f"cannot decode {path}: {exc}") from None
    return PixelImage(rgb)


class DirectoryFrameSource(FrameSource):
    def __init__(self, frames_dir, frame_count: int, **kwargs):
        super().__init__(frame_count, **kwargs)
        self.frames_dir = Path(frames_dir)

    def _image(self, index: int) -> PixelImage:
        return decode_frame(self.frames_dir, index)

    def _source_name(self, index: int) -> str:
        return str(self.frames_dir / f"frame_{index:06d}")


# --- VSUMM import -------------------------------------------------------------------

_KEYFRAME = re.compile(r"^frame_?(\d+)\.(jpe?g|png|bmp)$", re.IGNORECASE)
_USER_DIR = re.compile(r"^user_?(\d+)$", re.IGNORECASE)


def _keyframe_indices(directory: Path, base: int) -> list[int]:
    indices = []
    for p in sorted(directory.iterdir()):
        if p.is_dir():
            raise ValueError(f"unrecognized layout: unexpected directory {p}")
        match = _KEYFRAME.match(p.name)
        if not match:
            raise ValueError(f"unrecognized layout: keyframe file name {p}")
        indices.append(int(match.group(1)) - base)
    if not indices:
        raise ValueError(f"unrecognized layout: empty summary directory {directory}")
    return sorted(set(indices))


def import_vsumm(root, *, index_base: int = 0) -> DatasetManifest:
    """Build a manifest from a VSUMM-style tree with pre-extracted frames.

    Expected layout::

        root/frames/<video>/frame_000000.png ...
        root/UserSummary/<video>/user<k>/Frame<n>.jpeg
        root/<Summarizer>/<video>/Frame<n>.jpeg      (any other top-level directory)

    ``<n>`` is the frame number; ``index_base`` is subtracted from it. Any
    deviation from this layout raises ValueError rather than being guessed.
    """
    root = Path(root)
    frames_root = root / "frames"
    users_root = root / "UserSummary"
    if not frames_root.is_dir() or not users_root.is_dir():
        raise ValueError(f"unrecognized layout under {root}: need 'frames/' and 'UserSummary/' directories")

    summarizer_dirs = sorted(p for p in root.iterdir()
                             if p.is_dir() and p.name not in ("frames", "UserSummary") and not p.name.startswith("."))
    videos = []
    for vdir in sorted(p for p in users_root.iterdir() if p.is_dir()):
        vid = vdir.name
        fdir = frames_root / vid
        if not fdir.is_dir():
            raise ValueError(f"unrecognized layout: no frames directory for video {vid}")
        count = 0
        names = {p.name for p in fdir.iterdir()}
        while any(f"frame_{count:06d}.{ext}" in names for ext in FRAME_EXTENSIONS):
            count += 1
        if count == 0:
            raise ValueError(f"unrecognized layout: no frame_000000.* in {fdir}")

        users = {}
        for udir in sorted(p for p in vdir.iterdir()):
            match = _USER_DIR.match(udir.name)
            if not udir.is_dir() or not match:
                raise ValueError(f"unrecognized layout: {udir} is not a user<k> directory")
            users[match.group(1)] = _keyframe_indices(udir, index_base)
        if not users:
            raise ValueError(f"unrecognized layout: video {vid} has no user summaries")

        algos = {}
        for sdir in summarizer_dirs:
            if (sdir / vid).is_dir():
                algos[sdir.name] = _keyframe_indices(sdir / vid, index_base)

        doc_users = [{"user_id": u, "frames": f} for u, f in users.items()]
        doc_algos = [{"summarizer_id": s, "frames": f} for s, f in algos.items()]
        videos.append({"video_id": vid, "frames_dir": f"frames/{vid}", "frame_count": count,
                       "user_summaries": doc_users, "algo_summaries": doc_algos})
    if not videos:
        raise ValueError(f"unrecognized layout: no videos under {users_root}")
    return parse_manifest({"videos": videos}, root)

