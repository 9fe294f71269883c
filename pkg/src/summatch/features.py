"""Frame feature extraction.

Colour block statistics (RGB, HSV, chrominance, Ohta), hue histograms on
1x1 / 2x2 / 3x3 grids, and ingestion of precomputed vectors (CNN and other
external descriptors) from the plain-text feature-file format.

Every channel is a real in [0, 1]; hue is measured in turns, in [0, 1).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "FeatureSpace",
    "PixelImage",
    "HsvPixel",
    "FeatureVector",
    "FrameDescriptor",
    "rgb_to_hsv",
    "rgb_to_hsv_array",
    "chrominance",
    "chrominance_array",
    "ohta",
    "ohta_array",
    "split_blocks",
    "block_stats",
    "hue_histogram",
    "extract",
    "feature_length",
    "load_precomputed_features",
    "write_feature_file",
]


class FeatureSpace(enum.Enum):
    """The eleven frame representations, numbered as in the experiments."""

    RGB_9blocks = 1
    HSV_9blocks = 2
    CHR_9blocks = 3
    OHT_9blocks = 4
    H8_9blocks = 5
    H16_1block = 6
    H16_4blocks = 7
    H16_9blocks = 8
    H32_1block = 9
    CNN = 10
    SURF = 11

    @classmethod
    def parse(cls, value: "FeatureSpace | str | int") -> "FeatureSpace":
        if isinstance(value, cls):
            return value
        if isinstance(value, int) or (isinstance(value, str) and value.isdigit()):
            return cls(int(value))
        text = str(value).lower()
        for member in cls:
            if member.name.lower() == text:
                return member
        # short colour-space aliases such as "RGB" for RGB_9blocks
        prefixed = [m for m in cls if m.name.lower().split("_")[0] == text]
        if len(prefixed) == 1:
            return prefixed[0]
        raise ValueError(f"unknown feature space {value!r}")

    @property
    def extractable(self) -> bool:
        return self.value <= 9

    @property
    def is_histogram(self) -> bool:
        return 5 <= self.value <= 9

    @property
    def grid(self) -> int:
        """Blocks per side (1, 2 or 3); CNN and SURF are whole-image."""
        return _GRID.get(self, 1)

    @property
    def bins(self) -> int | None:
        return _BINS.get(self)


_GRID = {
    FeatureSpace.RGB_9blocks: 3,
    FeatureSpace.HSV_9blocks: 3,
    FeatureSpace.CHR_9blocks: 3,
    FeatureSpace.OHT_9blocks: 3,
    FeatureSpace.H8_9blocks: 3,
    FeatureSpace.H16_1block: 1,
    FeatureSpace.H16_4blocks: 2,
    FeatureSpace.H16_9blocks: 3,
    FeatureSpace.H32_1block: 1,
}
_BINS = {
    FeatureSpace.H8_9blocks: 8,
    FeatureSpace.H16_1block: 16,
    FeatureSpace.H16_4blocks: 16,
    FeatureSpace.H16_9blocks: 16,
    FeatureSpace.H32_1block: 32,
}
# components per pixel for the block-statistics spaces
_CHANNELS = {
    FeatureSpace.RGB_9blocks: 3,
    FeatureSpace.HSV_9blocks: 3,
    FeatureSpace.CHR_9blocks: 2,
    FeatureSpace.OHT_9blocks: 3,
}

ALLOWED_GRIDS = (1, 2, 3)
ALLOWED_BINS = (8, 16, 32)


@dataclass(frozen=True)
class PixelImage:
    """A decoded frame: ``pixels`` has shape (height, width, 3), values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must have shape (height, width, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("channel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def constant(cls, width: int, height: int, rgb: Sequence[float]) -> "PixelImage":
        return cls(np.broadcast_to(np.asarray(rgb, dtype=float), (height, width, 3)).copy())


@dataclass(frozen=True)
class HsvPixel:
    h: float
    s: float
    v: float


@dataclass(frozen=True, eq=False)
class FeatureVector:
    space: FeatureSpace
    values: np.ndarray
    grid: int = 1

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (self.space is other.space and self.grid == other.grid
                and np.array_equal(self.values, other.values))

    def blocks(self) -> np.ndarray:
        """Values reshaped to (block_count, features_per_block)."""
        return self.values.reshape(self.grid * self.grid, -1)


@dataclass(frozen=True)
class FrameDescriptor:
    """One frame's representation together with where it came from.

    ``vector`` is None for SURF frames, which are compared through keypoint
    profiles rather than coordinates.
    """

    frame_index: int
    space: FeatureSpace
    vector: FeatureVector | None = None
    source: str = field(default="", compare=False)


# --- colour conversions -------------------------------------------------------

def rgb_to_hsv_array(rgb: np.ndarray) -> np.ndarray:
    """Hexcone RGB -> HSV over the last axis. Gray pixels get h = 0, s = 0."""
    rgb = np.asarray(rgb, dtype=float)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    delta = v - rgb.min(axis=-1)
    chromatic = delta > 0
    safe = np.where(chromatic, delta, 1.0)
    s = np.where(v > 0, delta / np.where(v > 0, v, 1.0), 0.0)

    # sector selection follows r, then g, then b priority on ties
    h = np.where(
        v == r,
        ((g - b) / safe) % 6.0,
        np.where(v == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    ) / 6.0
    h = np.where(chromatic, h, 0.0)
    h = np.where(h >= 1.0, 0.0, h)
    return np.stack([h, s, v], axis=-1)


def rgb_to_hsv(pixel: Sequence[float]) -> HsvPixel:
    h, s, v = rgb_to_hsv_array(np.asarray(pixel, dtype=float))
    return HsvPixel(float(h), float(s), float(v))


def chrominance_array(rgb: np.ndarray) -> np.ndarray:
    """(r/q, g/q) with q the RGB vector norm; black pixels map to (0, 0)."""
    rgb = np.asarray(rgb, dtype=float)
    q = np.sqrt(np.sum(rgb * rgb, axis=-1))
    nonzero = q > 0
    q = np.where(nonzero, q, 1.0)
    c1 = np.where(nonzero, rgb[..., 0] / q, 0.0)
    c2 = np.where(nonzero, rgb[..., 1] / q, 0.0)
    return np.stack([c1, c2], axis=-1)


def chrominance(pixel: Sequence[float]) -> tuple[float, float]:
    c1, c2 = chrominance_array(np.asarray(pixel, dtype=float))
    return float(c1), float(c2)


def ohta_array(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=float)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    return np.stack([(r + g + b) / 3.0, r - b, (2.0 * g - r - b) / 2.0], axis=-1)


def ohta(pixel: Sequence[float]) -> tuple[float, float, float]:
    i1, i2, i3 = ohta_array(np.asarray(pixel, dtype=float))
    return float(i1), float(i2), float(i3)


_CONVERTERS = {
    FeatureSpace.RGB_9blocks: lambda px: px,
    FeatureSpace.HSV_9blocks: rgb_to_hsv_array,
    FeatureSpace.CHR_9blocks: chrominance_array,
    FeatureSpace.OHT_9blocks: ohta_array,
}


# --- block features ----------------------------------------------------------

def _grid_size(grid) -> int:
    if isinstance(grid, tuple):
        rows, cols = grid
        if rows != cols:
            raise ValueError(f"unsupported grid {grid!r}")
        grid = rows
    if grid not in ALLOWED_GRIDS:
        raise ValueError(f"unsupported grid {grid!r}; expected one of {ALLOWED_GRIDS}")
    return grid


def block_bounds(length: int, parts: int) -> list[tuple[int, int]]:
    """Half-open [start, stop) ranges ``floor(i*length/parts)``."""
    return [(i * length // parts, (i + 1) * length // parts) for i in range(parts)]


def split_blocks(image: PixelImage, grid=3) -> list[PixelImage]:
    """Partition ``image`` into grid x grid sub-images in row-major order."""
    n = _grid_size(grid)
    if image.width < n or image.height < n:
        raise ValueError("image too small for grid")
    if n == 1:
        return [image]
    return [
        PixelImage(image.pixels[r0:r1, c0:c1])
        for r0, r1 in block_bounds(image.height, n)
        for c0, c1 in block_bounds(image.width, n)
    ]


def block_stats(image: PixelImage, space) -> FeatureVector:
    """Per-block channel means followed by population standard deviations."""
    space = FeatureSpace.parse(space)
    if space not in _CONVERTERS:
        raise ValueError(f"{space.name} is not a block-statistics space")
    convert = _CONVERTERS[space]
    parts = []
    for block in split_blocks(image, space.grid):
        comp = convert(block.pixels).reshape(-1, _CHANNELS[space])
        parts.append(comp.mean(axis=0))
        parts.append(comp.std(axis=0))
    return FeatureVector(space, np.concatenate(parts), space.grid)


def _hist_space(bins: int, grid: int) -> FeatureSpace:
    for space, b in _BINS.items():
        if b == bins and space.grid == grid:
            return space
    raise ValueError(f"no named feature space for H{bins} on a {grid}x{grid} grid")


def hue_histogram(image: PixelImage, bins: int, grid=1, space: FeatureSpace | None = None) -> FeatureVector:
    """Normalized hue histograms per block; bin i covers [i/bins, (i+1)/bins).

    The (bins, grid) pair need not be one of the named spaces when ``space``
    is given explicitly.
    """
    if bins not in ALLOWED_BINS:
        raise ValueError(f"unsupported bin count {bins}; expected one of {ALLOWED_BINS}")
    n = _grid_size(grid)
    if space is None:
        space = _hist_space(bins, n)
    hists = []
    for block in split_blocks(image, n):
        hue = rgb_to_hsv_array(block.pixels)[..., 0].ravel()
        idx = np.minimum((hue * bins).astype(int), bins - 1)
        counts = np.bincount(idx, minlength=bins).astype(float)
        hists.append(counts / counts.sum())
    return FeatureVector(space, np.concatenate(hists), n)


def extract(image: PixelImage, space) -> FeatureVector:
    """Feature vector of ``image`` in one of the nine pixel-derived spaces."""
    space = FeatureSpace.parse(space)
    if space.is_histogram:
        return hue_histogram(image, space.bins, space.grid, space)
    if space.extractable:
        return block_stats(image, space)
    raise ValueError(f"{space.name} features cannot be extracted from pixels; ingest them from a feature file")


def feature_length(space) -> int:
    space = FeatureSpace.parse(space)
    if space.is_histogram:
        per_block = space.bins
    elif space.extractable:
        per_block = 2 * _CHANNELS[space]
    else:
        raise ValueError(f"{space.name} has no fixed length")
    return per_block * space.grid ** 2


# --- precomputed feature files -------------------------------------------------

PRECOMPUTED_TAGS = ("CNN", "external")


def _parse_header(line: str) -> dict[str, str]:
    if not line.startswith("#"):
        raise ValueError("malformed feature file: missing '# space=<tag> dim=<d>' header")
    fields = {}
    for token in line[1:].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise ValueError(f"malformed feature file header token {token!r}")
        fields[key] = value
    if "space" not in fields or "dim" not in fields:
        raise ValueError("malformed feature file: header needs space= and dim=")
    return fields


def load_precomputed_features(path, expected_space: str = "CNN") -> list[FrameDescriptor]:
    """Read a feature file.

    Format: a header line ``# space=<tag> dim=<d>`` then one line per frame,
    ``<frame_index> <v1> ... <vd>``. Tags are ``CNN``, ``external`` or the
    name of one of the extractable spaces (as written by the ``features``
    command).
    """
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path}: no frames")
    header = _parse_header(lines[0])
    tag = header["space"]
    if tag not in PRECOMPUTED_TAGS and tag not in {s.name for s in FeatureSpace if s.extractable}:
        raise ValueError(f"{path}: unknown space tag {tag!r}")
    if expected_space is not None and tag != expected_space:
        raise ValueError(f"{path}: space tag {tag!r} does not match expected {expected_space!r}")
    try:
        dim = int(header["dim"])
    except ValueError:
        raise ValueError(f"{path}: malformed dim {header['dim']!r}") from None
    if dim < 1:
        raise ValueError(f"{path}: dim must be positive")

    space = FeatureSpace.CNN if tag in PRECOMPUTED_TAGS else FeatureSpace[tag]
    grid = space.grid if space.extractable else 1
    rows = lines[1:]
    if not rows:
        raise ValueError(f"{path}: no frames")
    out = []
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        tokens = row.split()
        if len(tokens) - 1 != dim:
            raise ValueError(f"{path}:{lineno}: dimension mismatch (expected {dim}, got {len(tokens) - 1})")
        try:
            index = int(tokens[0])
            values = np.array([float(t) for t in tokens[1:]])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row") from None
        if index < 0 or index in seen:
            raise ValueError(f"{path}:{lineno}: bad or duplicate frame index {index}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{path}:{lineno}: non-finite value")
        seen.add(index)
        out.append(FrameDescriptor(index, space, FeatureVector(space, values, grid), source=str(path)))
    return out


def write_feature_file(stream, tag: str, descriptors: Sequence[FrameDescriptor]) -> None:
    """Inverse of :func:`load_precomputed_features`; values written with ``repr``."""
    if not descriptors:
        raise ValueError("no frames")
    dim = len(descriptors[0].vector)
    stream.write(f"# space={tag} dim={dim}\n")
    for d in descriptors:
        if len(d.vector) != dim:
            raise ValueError("dimension mismatch")
        stream.write(" ".join([str(d.frame_index)] + [repr(float(v)) for v in d.vector.values]) + "\n")

