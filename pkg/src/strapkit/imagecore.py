"""Tile representation, color/precision conversion, geometric augmentation, manifest I/O.

Pixels live as float64 arrays of shape (H, W, 3) with values in [0, 1].
8-bit PNG files are converted by v/255 on load and round(v*255) on save.
All randomness flows through explicit :class:`Rng` instances.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    BadLabel,
    DuplicateTileId,
    MissingColumn,
    UnresolvablePath,
    ZeroDimension,
)

MANIFEST_COLUMNS = ["tile_path", "patient_id", "slide_id", "domain_id", "label", "split"]
SPLITS = ("train", "valid", "test")


class Rng:
    """Counter-based reproducible generator (Philox 4x64).

    Identical seeds produce identical streams on every platform. Per-tile
    child generators are derived by hashing (seed, tile_id), so parallel
    pipelines are independent of scheduling order.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def child(self, key: str) -> "Rng":
        h = hashlib.blake2b(f"{self.seed}:{key}".encode(), digest_size=8)
        return Rng(int.from_bytes(h.digest(), "little"))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low, high, size=None):
        if size is None:
            return int(self._gen.integers(low, high))
        return self._gen.integers(low, high, size)


@dataclass(frozen=True)
class TileMeta:
    tile_id: str
    patient_id: str
    slide_id: str
    domain_id: str
    label: int
    split: str
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ImageTile:
    pixels: np.ndarray  # (H, W, 3) float64 in [0, 1]
    meta: TileMeta

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def with_pixels(self, pixels: np.ndarray) -> "ImageTile":
        return replace(self, pixels=np.clip(pixels, 0.0, 1.0))


@dataclass(frozen=True)
class Manifest:
    entries: tuple  # of (tile_path: Path, TileMeta)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _dummy_meta(tile_id: str = "tile") -> TileMeta:
    return TileMeta(tile_id=tile_id, patient_id="", slide_id="", domain_id="",
                    label=0, split="train")


def tile_from_array(pixels: np.ndarray, meta: TileMeta | None = None) -> ImageTile:
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ZeroDimension(f"expected (H, W, 3) array, got {pixels.shape}")
    if pixels.shape[0] < 1 or pixels.shape[1] < 1:
        raise ZeroDimension(f"empty image {pixels.shape}")
    return ImageTile(np.clip(pixels, 0.0, 1.0), meta or _dummy_meta())


def load_tile(path, meta: TileMeta | None = None) -> ImageTile:
    img = Image.open(path).convert("RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    if meta is None:
        meta = _dummy_meta(Path(path).stem)
    return ImageTile(arr, meta)


def save_tile(tile: ImageTile, path) -> None:
    arr = np.clip(np.round(tile.pixels * 255.0), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG", optimize=False)


def load_manifest(path) -> Manifest:
    """Read a manifest CSV; fails atomically on any invalid row.

    Header: tile_path,patient_id,slide_id,domain_id,label,split (extra
    columns are preserved in TileMeta.extra). Relative tile paths are
    resolved against the manifest's directory.
    """
    path = Path(path)
    if not path.exists():
        raise UnresolvablePath(str(path))
    base = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in MANIFEST_COLUMNS if c not in cols]
        if missing:
            raise MissingColumn(f"{path}: missing columns {missing}")
        extra_cols = [c for c in cols if c not in MANIFEST_COLUMNS]
        entries = []
        seen = set()
        for i, row in enumerate(reader, start=2):
            tile_path = Path(row["tile_path"])
            resolved = tile_path if tile_path.is_absolute() else base / tile_path
            if not resolved.exists():
                raise UnresolvablePath(f"{path}:{i}: {tile_path}")
            if row["label"] not in ("0", "1"):
                raise BadLabel(f"{path}:{i}: label {row['label']!r} not in {{0,1}}")
            tile_id = tile_path.stem
            if tile_id in seen:
                raise DuplicateTileId(f"{path}:{i}: {tile_id}")
            seen.add(tile_id)
            meta = TileMeta(
                tile_id=tile_id,
                patient_id=row["patient_id"],
                slide_id=row["slide_id"],
                domain_id=row["domain_id"],
                label=int(row["label"]),
                split=row["split"],
                extra={c: row[c] for c in extra_cols},
            )
            entries.append((resolved, meta))
    return Manifest(tuple(entries))


def save_manifest(manifest: Manifest, path, extra_columns: list[str] | None = None,
                  relative_to=None) -> None:
    """Write a manifest CSV in canonical form (posix paths, declared columns)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    extra_columns = extra_columns or []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS + extra_columns)
        for tile_path, meta in manifest:
            p = Path(tile_path)
            if relative_to is not None:
                try:
                    p = p.relative_to(relative_to)
                except ValueError:
                    pass
            writer.writerow([
                p.as_posix(), meta.patient_id, meta.slide_id, meta.domain_id,
                meta.label, meta.split,
            ] + [meta.extra.get(c, "") for c in extra_columns])


def resize(tile: ImageTile, out_w: int, out_h: int) -> ImageTile:
    """Bilinear resize with the half-pixel-center coordinate convention."""
    if out_w < 1 or out_h < 1:
        raise ZeroDimension(f"target size {out_w}x{out_h}")
    out = _bilinear(tile.pixels, out_w, out_h)
    return tile.with_pixels(out)


def _bilinear(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    h, w = pixels.shape[:2]
    if (out_h, out_w) == (h, w):
        return pixels.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    top = pixels[y0][:, x0] * (1 - fx) + pixels[y0][:, x1] * fx
    bot = pixels[y1][:, x0] * (1 - fx) + pixels[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def random_flip(tile: ImageTile, p_h: float, p_v: float, rng: Rng) -> ImageTile:
    """Horizontal then vertical flip, each applied with its own probability.

    The two uniform draws are always consumed (in that order) so the stream
    position does not depend on the probabilities.
    """
    u_h = rng.uniform()
    u_v = rng.uniform()
    out = tile.pixels
    if u_h < p_h:
        out = out[:, ::-1, :]
    if u_v < p_v:
        out = out[::-1, :, :]
    return tile.with_pixels(out)


def flip_horizontal(tile: ImageTile) -> ImageTile:
    return tile.with_pixels(tile.pixels[:, ::-1, :])


def flip_vertical(tile: ImageTile) -> ImageTile:
    return tile.with_pixels(tile.pixels[::-1, :, :])


DEFAULT_CROP_SCALE = (0.08, 1.0)
DEFAULT_ASPECT_RANGE = (3.0 / 4.0, 4.0 / 3.0)


def random_resized_crop(tile: ImageTile, out_size: int,
                        scale_range: tuple[float, float] = DEFAULT_CROP_SCALE,
                        rng: Rng | None = None,
                        aspect_range: tuple[float, float] = DEFAULT_ASPECT_RANGE) -> ImageTile:
    """Crop a random area/aspect region (clipped to fit) and resize to a square."""
    if out_size < 1:
        raise ZeroDimension(f"out_size {out_size}")
    lo, hi = scale_range
    if not (0 < lo <= hi <= 1):
        raise ValueError(f"scale_range {scale_range} must satisfy 0 < lo <= hi <= 1")
    if rng is None:
        rng = Rng(0)
    h, w = tile.height, tile.width
    frac = rng.uniform(lo, hi)
    aspect = rng.uniform(*aspect_range)
    area = frac * h * w
    cw = int(np.clip(round(np.sqrt(area * aspect)), 1, w))
    ch = int(np.clip(round(np.sqrt(area / aspect)), 1, h))
    x0 = rng.integers(0, w - cw + 1)
    y0 = rng.integers(0, h - ch + 1)
    crop = tile.pixels[y0:y0 + ch, x0:x0 + cw, :]
    return tile.with_pixels(_bilinear(crop, out_size, out_size))
