"""Low-frequency decomposition via centered FFT and circular low-pass masks.

Each channel is transformed with a 2-D FFT, the spectrum is centered, every
bin farther than the filter radius from the center is zeroed (boundary
inclusive), and the inverse transform's real part is taken. The tiny
imaginary residue from even-dimension asymmetry is asserted negligible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ZeroDimension
from .imagecore import ImageTile, Manifest, load_tile, save_manifest, save_tile

DEFAULT_RADII = tuple(range(14, 155, 14))  # 14, 28, ..., 154


@dataclass(frozen=True)
class FilterSpec:
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius {self.radius} must be positive")


@dataclass(frozen=True)
class SweepSpec:
    radii: tuple = DEFAULT_RADII

    def __post_init__(self):
        radii = tuple(self.radii)
        if any(r <= 0 for r in radii):
            raise ValueError("all radii must be positive")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ValueError(f"radii must be strictly increasing: {radii}")
        object.__setattr__(self, "radii", radii)


def build_mask(h: int, w: int, spec: FilterSpec) -> np.ndarray:
    """Binary keep-mask in centered frequency coordinates.

    Center bin sits at (floor(h/2), floor(w/2)), matching fftshift.
    """
    if h < 1 or w < 1:
        raise ZeroDimension(f"mask size {h}x{w}")
    cy, cx = h // 2, w // 2
    yy = np.arange(h)[:, None] - cy
    xx = np.arange(w)[None, :] - cx
    return (yy * yy + xx * xx <= spec.radius ** 2).astype(np.float64)


def lowpass_array(pixels: np.ndarray, spec: FilterSpec, clamp: bool = True) -> np.ndarray:
    """Low-pass filter each channel; clamp is disabled only by test hooks."""
    h, w = pixels.shape[:2]
    mask = build_mask(h, w, spec)
    out = np.empty_like(pixels, dtype=np.float64)
    for c in range(pixels.shape[2]):
        spec2d = np.fft.fftshift(np.fft.fft2(pixels[:, :, c]))
        filtered = np.fft.ifft2(np.fft.ifftshift(spec2d * mask))
        residue = np.abs(filtered.imag).max()
        scale = max(np.abs(filtered.real).max(), 1.0)
        assert residue / scale < 1e-9, f"imaginary residue {residue}"
        out[:, :, c] = filtered.real
    return np.clip(out, 0.0, 1.0) if clamp else out


def lowpass(tile: ImageTile, spec: FilterSpec) -> ImageTile:
    return tile.with_pixels(lowpass_array(tile.pixels, spec))


def retained_energy_fraction(pixels: np.ndarray, spec: FilterSpec) -> float:
    """Fraction of spectral energy kept by the mask (Parseval diagnostic)."""
    h, w = pixels.shape[:2]
    mask = build_mask(h, w, spec)
    total = kept = 0.0
    for c in range(pixels.shape[2]):
        power = np.abs(np.fft.fftshift(np.fft.fft2(pixels[:, :, c]))) ** 2
        total += power.sum()
        kept += (power * mask).sum()
    return kept / total if total > 0 else 1.0


def sweep_lowpass(manifest: Manifest, sweep: SweepSpec, out_dir) -> list:
    """One filtered dataset per radius under out_dir/r{radius}/, each with a
    manifest carrying a `lowpass_radius` column. Partial outputs for a radius
    are removed if that radius fails."""
    out_dir = Path(out_dir)
    results = []
    for radius in sweep.radii:
        radius_dir = out_dir / f"r{_fmt_radius(radius)}"
        try:
            entries = []
            for tile_path, meta in manifest:
                tile = load_tile(tile_path, meta)
                filtered = lowpass(tile, FilterSpec(radius))
                out_path = radius_dir / "tiles" / f"{meta.tile_id}.png"
                save_tile(filtered, out_path)
                new_meta = replace(
                    meta, extra={**meta.extra, "lowpass_radius": _fmt_radius(radius)})
                entries.append((out_path, new_meta))
            out_manifest = Manifest(tuple(sorted(entries, key=lambda e: e[1].tile_id)))
            save_manifest(out_manifest, radius_dir / "manifest.csv",
                          extra_columns=["lowpass_radius"], relative_to=radius_dir)
            results.append((radius, out_manifest))
        except Exception:
            import shutil
            shutil.rmtree(radius_dir, ignore_errors=True)
            raise
    return results


def _fmt_radius(radius) -> str:
    return str(int(radius)) if float(radius).is_integer() else str(radius)
