"""Synthetic frame datasets with planted ground truths."""

from __future__ import annotations

import colorsys
import json
from pathlib import Path

import numpy as np
from PIL import Image

N_USERS = 5


def scene_frame(hue: float, width: int = 24, height: int = 16, gray: float | None = None,
                gradient: bool = True, hue_jitter: np.ndarray | None = None) -> np.ndarray:
    """Frame of one dominant hue whose brightness ramps left to right (or a gray frame).

    ``hue_jitter`` is an optional (height, width) array added to the hue per pixel.
    """
    if gray is not None:
        return np.full((height, width, 3), gray)
    values = np.linspace(0.55, 1.0, width) if gradient else np.full(width, 0.9)
    hues = np.full((height, width), hue) if hue_jitter is None else (hue + hue_jitter) % 1.0
    px = np.empty((height, width, 3))
    for y in range(height):
        for x in range(width):
            px[y, x] = colorsys.hsv_to_rgb(hues[y, x], 0.85, values[x])
    return px


def scene_lengths(n_scenes: int, frames_per_scene: int, rng) -> list[int]:
    """Unequal scene lengths with the same total as equal ones."""
    total = n_scenes * frames_per_scene
    cuts = np.sort(rng.choice(np.arange(1, total), size=n_scenes - 1, replace=False))
    lengths = np.diff(np.concatenate([[0], cuts, [total]]))
    while lengths.min() < 2:
        cuts = np.sort(rng.choice(np.arange(1, total), size=n_scenes - 1, replace=False))
        lengths = np.diff(np.concatenate([[0], cuts, [total]]))
    return [int(n) for n in lengths]


def make_video(lengths: list[int], hue_offset: float, rng) -> list[np.ndarray]:
    frames = []
    n_scenes = len(lengths)
    for s, length in enumerate(lengths):
        hue = (hue_offset + s / n_scenes) % 1.0
        for t in range(length):
            if s == 0:
                frames.append(scene_frame(0.0, gray=0.3 + 0.02 * t))
            else:
                jitter = rng.normal(0.0, 0.02, size=(16, 24))
                frames.append(scene_frame((hue + 0.01 * t) % 1.0, gradient=t % 2 == 0, hue_jitter=jitter))
    return frames


def write_frames(frames, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for i, px in enumerate(frames):
        Image.fromarray(np.round(px * 255).astype(np.uint8)).save(directory / f"frame_{i:06d}.png")


def make_dataset(root, n_videos: int = 3, n_scenes: int = 6, frames_per_scene: int = 8, seed: int = 7) -> Path:
    """Write frames and ``manifest.json`` under ``root``; returns the manifest path.

    Scenes have unequal lengths, so a uniform summary over- and under-samples
    them. Each user picks a frame from a random subset of scenes. The
    ``scenes`` summarizer takes the middle frame of every scene (close to the
    users), ``opening`` takes the first frames of the video (far from them).
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    videos = []
    for v in range(n_videos):
        vid = f"v{v + 1:02d}"
        lengths = scene_lengths(n_scenes, frames_per_scene, rng)
        starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        frames = make_video(lengths, hue_offset=0.05 * v, rng=rng)
        write_frames(frames, root / "frames" / vid)
        users = []
        for u in range(N_USERS):
            k = int(rng.integers(3, n_scenes + 1))
            scenes = sorted(rng.choice(n_scenes, size=k, replace=False))
            picks = [int(starts[s] + rng.integers(0, lengths[s])) for s in scenes]
            users.append({"user_id": str(u + 1), "frames": picks})
        scenes_summary = [int(starts[s] + lengths[s] // 2) for s in range(n_scenes)]
        opening = list(range(0, 4))
        videos.append({
            "video_id": vid,
            "frames_dir": f"frames/{vid}",
            "frame_count": len(frames),
            "user_summaries": users,
            "algo_summaries": [
                {"summarizer_id": "scenes", "frames": scenes_summary},
                {"summarizer_id": "opening", "frames": opening},
            ],
        })
    path = root / "manifest.json"
    path.write_text(json.dumps({"videos": videos}, indent=2), encoding="utf-8")
    return path
