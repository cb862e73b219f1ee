import numpy as np
import pytest

from strapkit.errors import ZeroDimension
from strapkit.freq import (
    DEFAULT_RADII,
    FilterSpec,
    SweepSpec,
    build_mask,
    lowpass,
    lowpass_array,
    retained_energy_fraction,
    sweep_lowpass,
)
from strapkit.imagecore import Manifest, load_manifest, tile_from_array

from conftest import make_tile, write_manifest


# --- masks ---

def test_mask_dc_only():
    mask = build_mask(8, 8, FilterSpec(0.5))
    assert mask.sum() == 1
    assert mask[4, 4] == 1


def test_mask_full_coverage():
    mask = build_mask(8, 8, FilterSpec(np.sqrt(32)))
    assert mask.sum() == 64


def test_mask_radius_one_neighborhood():
    mask = build_mask(8, 8, FilterSpec(1.0))
    assert mask.sum() == 5
    assert mask[4, 4] == mask[3, 4] == mask[5, 4] == mask[4, 3] == mask[4, 5] == 1


def test_mask_nested():
    for r1, r2 in [(3, 7), (1, 2), (5, 20)]:
        m1 = build_mask(32, 32, FilterSpec(r1))
        m2 = build_mask(32, 32, FilterSpec(r2))
        assert np.all(m2 >= m1)


def test_mask_zero_dimension():
    with pytest.raises(ZeroDimension):
        build_mask(0, 8, FilterSpec(1.0))


def test_filterspec_validation():
    with pytest.raises(ValueError):
        FilterSpec(0.0)
    with pytest.raises(ValueError):
        SweepSpec((14.0, 14.0))


# --- lowpass ---

def test_full_coverage_radius_identity():
    tile = make_tile(0, 32, 32)
    r = np.sqrt((32 / 2) ** 2 + (32 / 2) ** 2)
    out = lowpass(tile, FilterSpec(r))
    assert np.abs(out.pixels - tile.pixels).mean() <= 1e-5


def test_constant_tile_any_radius():
    tile = tile_from_array(np.full((16, 16, 3), 0.37))
    for r in [0.5, 1, 4, 10]:
        out = lowpass(tile, FilterSpec(r))
        assert np.allclose(out.pixels, 0.37, atol=1e-9)


def test_cosine_keep_kill_dichotomy():
    x = np.arange(64)
    signal = 0.5 + 0.4 * np.cos(2 * np.pi * 8 * x / 64)
    pixels = np.repeat(signal[None, :, None], 64, axis=0).repeat(3, axis=2)
    tile = tile_from_array(pixels)
    kept = lowpass(tile, FilterSpec(10.0))
    assert np.abs(kept.pixels - tile.pixels).mean() < 1e-4
    killed = lowpass(tile, FilterSpec(6.0))
    assert np.abs(killed.pixels - 0.5).mean() < 1e-4


def test_parseval_full_coverage():
    tile = make_tile(1, 24, 24)
    r = np.sqrt(2) * 12 + 1
    assert abs(retained_energy_fraction(tile.pixels, FilterSpec(r)) - 1.0) <= 1e-6


def test_retained_energy_monotone():
    tile = make_tile(2, 32, 32)
    fracs = [retained_energy_fraction(tile.pixels, FilterSpec(r))
             for r in [2, 5, 10, 16, 23]]
    assert all(b >= a - 1e-12 for a, b in zip(fracs, fracs[1:]))


def test_linearity_before_clamp():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(16, 16, 3))
    y = rng.uniform(size=(16, 16, 3))
    a, b = 0.3, 1.7
    spec = FilterSpec(4.0)
    lhs = lowpass_array(a * x + b * y, spec, clamp=False)
    rhs = a * lowpass_array(x, spec, clamp=False) + b * lowpass_array(y, spec, clamp=False)
    assert np.allclose(lhs, rhs, atol=1e-6)


def test_output_range_clamped():
    tile = make_tile(4, 32, 32)
    out = lowpass(tile, FilterSpec(3.0))
    assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0


# --- sweep ---

def test_default_radii():
    assert DEFAULT_RADII == tuple(range(14, 155, 14))
    assert len(DEFAULT_RADII) == 11
    assert DEFAULT_RADII[0] == 14 and DEFAULT_RADII[-1] == 154


def test_sweep_single_radius(tmp_path):
    path, _ = write_manifest(tmp_path, [make_tile(i, 16, 16) for i in range(2)])
    manifest = load_manifest(path)
    results = sweep_lowpass(manifest, SweepSpec((14.0,)), tmp_path / "out")
    assert len(results) == 1
    radius, out_manifest = results[0]
    assert radius == 14.0
    assert len(out_manifest) == 2
    reloaded = load_manifest(tmp_path / "out" / "r14" / "manifest.csv")
    assert len(reloaded) == 2
    assert all(m.extra["lowpass_radius"] == "14" for _, m in reloaded)


def test_sweep_default_count(tmp_path):
    path, _ = write_manifest(tmp_path, [make_tile(0, 16, 16)])
    manifest = load_manifest(path)
    results = sweep_lowpass(manifest, SweepSpec(), tmp_path / "out")
    assert len(results) == 11


def test_sweep_empty_manifest(tmp_path):
    results = sweep_lowpass(Manifest(()), SweepSpec((14.0, 28.0)), tmp_path / "out")
    assert len(results) == 2
    assert all(len(m) == 0 for _, m in results)
