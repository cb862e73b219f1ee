"""Macenko stain normalization and HED stain augmentation for H&E tiles.

All math happens in optical-density (OD) space: od = -log10((v + 1/255) / io),
the Beer-Lambert linearization of stain absorbance. Concentrations are solved
with a true non-negative least squares (projected coordinate descent), never
by clamping an unconstrained solve, which would bias faint pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import DegenerateSpectrum, InsufficientTissue
from .imagecore import ImageTile, Rng

OD_DELTA = 1.0 / 255.0

# Ruifrok-Johnson absorbance rows (H, E, DAB), unit-normalized below. The DAB
# row is kept so the matrix stays invertible even though H&E tiles carry ~0 DAB.
_HED_RAW = np.array([
    [0.650, 0.704, 0.286],
    [0.072, 0.990, 0.105],
    [0.268, 0.570, 0.776],
])
HED_MATRIX = _HED_RAW / np.linalg.norm(_HED_RAW, axis=1, keepdims=True)
HED_INVERSE = np.linalg.inv(HED_MATRIX)


@dataclass(frozen=True)
class StainProfile:
    stain_matrix: np.ndarray  # (3, 2), unit-norm columns: hematoxylin, eosin
    max_conc: np.ndarray      # (2,) robust per-stain concentration scale

    def __post_init__(self):
        m = np.asarray(self.stain_matrix, dtype=np.float64)
        if m.shape != (3, 2):
            raise ValueError(f"stain_matrix shape {m.shape}, want (3, 2)")
        if (m < -1e-9).any():
            raise ValueError("stain_matrix entries must be non-negative")
        norms = np.linalg.norm(m, axis=0)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise ValueError(f"stain_matrix columns not unit-norm: {norms}")


@dataclass(frozen=True)
class MacenkoParams:
    od_threshold: float = 0.15
    angle_percentile: float = 1.0
    conc_percentile: float = 99.0
    io: float = 1.0
    min_tissue_fraction: float = 0.05

    def __post_init__(self):
        if not 0 < self.angle_percentile < 50:
            raise ValueError(f"angle_percentile {self.angle_percentile}")
        if not 0 < self.conc_percentile <= 100:
            raise ValueError(f"conc_percentile {self.conc_percentile}")


@dataclass(frozen=True)
class HedAugmentParams:
    sigma_scale: float = 0.05
    sigma_shift: float = 0.05
    channels: tuple = ("H", "E", "D")

    def __post_init__(self):
        if not (np.isfinite(self.sigma_scale) and self.sigma_scale >= 0):
            raise ValueError(f"sigma_scale {self.sigma_scale}")
        if not (np.isfinite(self.sigma_shift) and self.sigma_shift >= 0):
            raise ValueError(f"sigma_shift {self.sigma_shift}")


def rgb_to_od(pixels: np.ndarray, io: float = 1.0) -> np.ndarray:
    """Beer-Lambert transform; the 1/255 offset guards v = 0."""
    if io <= 0:
        raise ValueError("io must be positive")
    return -np.log10((np.asarray(pixels, dtype=np.float64) + OD_DELTA) / io)


def od_to_rgb(od: np.ndarray, io: float = 1.0) -> np.ndarray:
    """Exact algebraic inverse of rgb_to_od (no clamping)."""
    return io * np.power(10.0, -np.asarray(od, dtype=np.float64)) - OD_DELTA


def nnls_2(basis: np.ndarray, od: np.ndarray) -> np.ndarray:
    """Exact non-negative least squares for od ~ conc @ basis.T with 2 stains.

    basis: (3, 2); od: (N, 3); returns conc: (N, 2). With two variables the
    KKT conditions have a closed form: take the unconstrained solution when
    it is feasible, otherwise the better of the two single-stain axis
    solutions. Exact and one-pass (an unconstrained solve followed by
    clamping would bias faint pixels and is deliberately not used).
    """
    g = basis.T @ basis            # (2, 2) Gram
    atb = od @ basis               # (N, 2)
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[0, 1]
    free = np.empty_like(atb)
    free[:, 0] = (g[1, 1] * atb[:, 0] - g[0, 1] * atb[:, 1]) / det
    free[:, 1] = (g[0, 0] * atb[:, 1] - g[0, 1] * atb[:, 0]) / det
    axis0 = np.maximum(atb[:, 0] / g[0, 0], 0.0)  # eosin forced to zero
    axis1 = np.maximum(atb[:, 1] / g[1, 1], 0.0)  # hematoxylin forced to zero
    # objective difference between the two axis candidates (constant terms cancel)
    obj0 = 0.5 * g[0, 0] * axis0 ** 2 - atb[:, 0] * axis0
    obj1 = 0.5 * g[1, 1] * axis1 ** 2 - atb[:, 1] * axis1
    use0 = obj0 <= obj1
    conc = np.where(use0[:, None],
                    np.stack([axis0, np.zeros_like(axis0)], axis=1),
                    np.stack([np.zeros_like(axis1), axis1], axis=1))
    feasible = (free[:, 0] >= 0) & (free[:, 1] >= 0)
    conc[feasible] = free[feasible]
    return conc


# estimation statistics (plane, angle percentiles, concentration percentile)
# are computed on at most this many tissue pixels, subsampled deterministically
_MAX_ESTIMATION_PIXELS = 50_000


def estimate_stain_profile(tile: ImageTile,
                           params: MacenkoParams = MacenkoParams()) -> StainProfile:
    """Macenko estimation: SVD plane of tissue OD, extreme angles, NNLS scale."""
    od = rgb_to_od(tile.pixels, params.io).reshape(-1, 3)
    return _estimate_from_od(od, params)


def _estimate_from_od(od: np.ndarray, params: MacenkoParams) -> StainProfile:
    tissue = od[np.einsum("ij,ij->i", od, od) > params.od_threshold ** 2]
    n_total = od.shape[0]
    if tissue.shape[0] < max(2, params.min_tissue_fraction * n_total):
        raise InsufficientTissue(
            f"{tissue.shape[0]}/{n_total} tissue pixels below fraction "
            f"{params.min_tissue_fraction}")
    if tissue.shape[0] > _MAX_ESTIMATION_PIXELS:
        step = int(np.ceil(tissue.shape[0] / _MAX_ESTIMATION_PIXELS))
        tissue = tissue[::step]

    cov = np.cov(tissue.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[-2] < 1e-10 * max(eigvals[-1], 1e-300) or eigvals[-1] <= 0:
        raise DegenerateSpectrum(f"OD cloud rank < 2 (eigvals {eigvals})")
    plane = eigvecs[:, [-1, -2]]  # top-2 eigenvectors, columns
    # orient each axis so the bulk of the cloud projects positively
    proj = tissue @ plane
    for j in range(2):
        if proj[:, j].sum() < 0:
            plane[:, j] *= -1
            proj[:, j] *= -1

    phi = np.arctan2(proj[:, 1], proj[:, 0])
    phi_lo = np.percentile(phi, params.angle_percentile)
    phi_hi = np.percentile(phi, 100.0 - params.angle_percentile)
    v_lo = plane @ np.array([np.cos(phi_lo), np.sin(phi_lo)])
    v_hi = plane @ np.array([np.cos(phi_hi), np.sin(phi_hi)])
    # absorbance vectors are non-negative; kill tiny numerical negatives
    v_lo = np.maximum(v_lo, 0.0)
    v_hi = np.maximum(v_hi, 0.0)
    n_lo, n_hi = np.linalg.norm(v_lo), np.linalg.norm(v_hi)
    if n_lo < 1e-8 or n_hi < 1e-8:
        raise DegenerateSpectrum("extreme-angle stain vector collapsed to zero")
    v_lo, v_hi = v_lo / n_lo, v_hi / n_hi

    # hematoxylin has the larger blue-channel OD; it goes in column 0
    if v_lo[2] >= v_hi[2]:
        matrix = np.stack([v_lo, v_hi], axis=1)
    else:
        matrix = np.stack([v_hi, v_lo], axis=1)

    conc = nnls_2(matrix, tissue)
    max_conc = np.percentile(conc, params.conc_percentile, axis=0)
    return StainProfile(matrix, max_conc)


def macenko_normalize(tile: ImageTile, reference: StainProfile,
                      params: MacenkoParams = MacenkoParams()) -> ImageTile:
    """Re-express the tile's stains in the reference basis at reference scale."""
    od = rgb_to_od(tile.pixels, params.io).reshape(-1, 3)
    source = _estimate_from_od(od, params)
    conc = nnls_2(source.stain_matrix, od)
    scale = np.where(source.max_conc > 1e-12,
                     reference.max_conc / np.maximum(source.max_conc, 1e-12), 1.0)
    od_out = (conc * scale) @ reference.stain_matrix.T
    rgb = od_to_rgb(od_out, params.io).reshape(tile.pixels.shape)
    return tile.with_pixels(rgb)


def hed_decompose(tile: ImageTile) -> np.ndarray:
    """Per-pixel H/E/DAB concentrations via Ruifrok-Johnson deconvolution."""
    od = rgb_to_od(tile.pixels)
    return od @ HED_INVERSE


def hed_recompose(conc: np.ndarray, tile: ImageTile) -> ImageTile:
    od = np.asarray(conc) @ HED_MATRIX
    return tile.with_pixels(od_to_rgb(od))


def stain_augment(tile: ImageTile, params: HedAugmentParams = HedAugmentParams(),
                  rng: Rng | None = None) -> ImageTile:
    """Per-stain jitter: conc' = a * conc + b, a ~ U(1 +/- sigma_scale),
    b ~ U(+/- sigma_shift). Draw order fixed: channels H, E, D; scale before
    shift; draws happen only for selected channels."""
    if rng is None:
        rng = Rng(0)
    conc = hed_decompose(tile)
    out = conc.copy()
    for i, name in enumerate(("H", "E", "D")):
        if name not in params.channels:
            continue
        a = rng.uniform(1.0 - params.sigma_scale, 1.0 + params.sigma_scale)
        b = rng.uniform(-params.sigma_shift, params.sigma_shift)
        out[..., i] = a * conc[..., i] + b
    return hed_recompose(out, tile)


# --- reference profile I/O ---

def save_profile(profile: StainProfile, path) -> None:
    with open(path, "w") as fh:
        json.dump({"stain_matrix": profile.stain_matrix.tolist(),
                   "max_conc": profile.max_conc.tolist()}, fh, indent=2)


def load_profile(path) -> StainProfile:
    with open(path) as fh:
        data = json.load(fh)
    return StainProfile(np.asarray(data["stain_matrix"], dtype=np.float64),
                        np.asarray(data["max_conc"], dtype=np.float64))


def default_reference_profile() -> StainProfile:
    """Canonical reference shipped with the package (data/reference_stain.json)."""
    ref = resources.files("strapkit").joinpath("data/reference_stain.json")
    with resources.as_file(ref) as path:
        return load_profile(path)
