import numpy as np
import pytest

from strapkit.errors import DegenerateSpectrum, InsufficientTissue
from strapkit.imagecore import Rng, tile_from_array
from strapkit.stain import (
    HED_MATRIX,
    HedAugmentParams,
    MacenkoParams,
    StainProfile,
    default_reference_profile,
    estimate_stain_profile,
    hed_decompose,
    hed_recompose,
    load_profile,
    macenko_normalize,
    nnls_2,
    od_to_rgb,
    rgb_to_od,
    save_profile,
    stain_augment,
)

from conftest import make_tissue_tile


def unit(v):
    return np.asarray(v) / np.linalg.norm(v)


def synthetic_two_stain(v1, v2, n=2500, seed=0, pure_fraction=0.05):
    """Tile mixing two unit OD vectors with random positive concentrations,
    including near-pure pixels so the angle percentiles see the extremes."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.05, 1.5, size=(n, 2))
    n_pure = int(n * pure_fraction)
    c[:n_pure, 1] = rng.uniform(0, 0.01, size=n_pure)
    c[n_pure:2 * n_pure, 0] = rng.uniform(0, 0.01, size=n_pure)
    od = c[:, :1] * v1[None, :] + c[:, 1:] * v2[None, :]
    rgb = np.clip(od_to_rgb(od), 0, 1)
    side = int(np.sqrt(n))
    return tile_from_array(rgb[:side * side].reshape(side, side, 3))


def angle_deg(a, b):
    cosang = np.clip(np.dot(unit(a), unit(b)), -1, 1)
    return np.degrees(np.arccos(cosang))


# --- OD transforms ---

def test_od_white_point():
    od = rgb_to_od(np.array([[[1.0, 1.0, 1.0]]]), io=1.0)
    assert np.all(np.abs(od) < 2e-3)


def test_od_one_decade():
    od = rgb_to_od(np.array([[[0.1, 0.1, 0.1]]]), io=1.0)
    assert np.allclose(od, 1.0, atol=0.02)


def test_od_round_trip():
    rng = np.random.default_rng(0)
    v = rng.uniform(0.05, 1.0, size=(10, 10, 3))
    assert np.allclose(od_to_rgb(rgb_to_od(v)), v, atol=1e-6)


def test_od_nonnegative_below_white():
    v = np.linspace(0.0, 1.0 - 1 / 255, 50).reshape(-1, 1)
    assert (rgb_to_od(v, io=1.0) >= 0).all()


# --- NNLS ---

def test_nnls_exact_recovery():
    rng = np.random.default_rng(1)
    basis = default_reference_profile().stain_matrix
    conc = rng.uniform(0, 2, size=(100, 2))
    od = conc @ basis.T
    rec = nnls_2(basis, od)
    assert np.allclose(rec, conc, atol=1e-6)


def test_nnls_enforces_nonnegativity():
    basis = default_reference_profile().stain_matrix
    od = -0.5 * basis[:, 0][None, :]  # unreachable with c >= 0
    rec = nnls_2(basis, od)
    assert (rec >= 0).all()


# --- stain profile estimation ---

def test_all_white_insufficient_tissue():
    tile = tile_from_array(np.ones((32, 32, 3)))
    with pytest.raises(InsufficientTissue):
        estimate_stain_profile(tile)


def test_single_stain_degenerate():
    v1 = unit([0.65, 0.70, 0.29])
    rng = np.random.default_rng(2)
    c = rng.uniform(0.2, 1.5, size=(1024, 1))
    rgb = np.clip(od_to_rgb(c * v1[None, :]), 0, 1)
    tile = tile_from_array(rgb.reshape(32, 32, 3))
    with pytest.raises(DegenerateSpectrum):
        estimate_stain_profile(tile)


def test_generate_then_recover():
    v1 = unit([0.65, 0.70, 0.29])
    v2 = unit([0.07, 0.99, 0.11])
    tile = synthetic_two_stain(v1, v2, seed=3)
    profile = estimate_stain_profile(tile)
    # column 0 is hematoxylin (larger blue OD)
    assert angle_deg(profile.stain_matrix[:, 0], v1) < 1.0
    assert angle_deg(profile.stain_matrix[:, 1], v2) < 1.0


def test_recovered_profile_invariants():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        v1 = unit(np.abs(unit([0.65, 0.70, 0.29]) + rng.normal(0, 0.03, 3)))
        v2 = unit(np.abs(unit([0.07, 0.99, 0.11]) + rng.normal(0, 0.03, 3)))
        profile = estimate_stain_profile(synthetic_two_stain(v1, v2, seed=seed))
        norms = np.linalg.norm(profile.stain_matrix, axis=0)
        assert np.allclose(norms, 1.0, atol=1e-9)
        assert (profile.stain_matrix >= 0).all()
        assert (profile.max_conc > 0).all()


# --- normalization ---

def test_normalize_idempotent():
    tile = make_tissue_tile(seed=4)
    ref = default_reference_profile()
    once = macenko_normalize(tile, ref)
    twice = macenko_normalize(once, ref)
    assert np.abs(twice.pixels - once.pixels).mean() <= 0.01


def test_normalize_fixed_point():
    ref = default_reference_profile()
    rng = np.random.default_rng(5)
    n = 2500
    conc = rng.uniform(0.05, 1.0, size=(n, 2)) * ref.max_conc[None, :]
    n_pure = 100
    conc[:n_pure, 1] = 0.0
    conc[n_pure:2 * n_pure, 0] = 0.0
    # pin the percentile scale to the reference scale
    conc[2 * n_pure] = ref.max_conc * 1.02
    od = conc @ ref.stain_matrix.T
    side = 50
    tile = tile_from_array(np.clip(od_to_rgb(od), 0, 1).reshape(side, side, 3))
    out = macenko_normalize(tile, ref)
    assert np.abs(out.pixels - tile.pixels).mean() <= 0.01


def test_normalize_all_white_raises():
    with pytest.raises(InsufficientTissue):
        macenko_normalize(tile_from_array(np.ones((16, 16, 3))),
                          default_reference_profile())


def test_normalize_collapses_stain_rotation():
    # two tiles drawn from slightly rotated stain bases, same concentrations
    ref = default_reference_profile()
    v1 = unit([0.65, 0.70, 0.29])
    v2 = unit([0.07, 0.99, 0.11])

    def rot(v, eps):
        return unit(np.abs(v + eps))

    t1 = synthetic_two_stain(v1, v2, seed=6)
    t2 = synthetic_two_stain(rot(v1, np.array([0.03, -0.02, 0.02])),
                             rot(v2, np.array([0.02, 0.01, -0.02])), seed=6)
    n1 = macenko_normalize(t1, ref)
    n2 = macenko_normalize(t2, ref)
    assert np.abs(n1.pixels - n2.pixels).mean() <= 0.02
    assert np.abs(n1.pixels - n2.pixels).mean() < np.abs(t1.pixels - t2.pixels).mean()


# --- HED decomposition ---

def test_hed_matrix_rows_unit_norm():
    assert np.allclose(np.linalg.norm(HED_MATRIX, axis=1), 1.0, atol=1e-12)


def test_hed_round_trip():
    tile = make_tissue_tile(seed=7)
    conc = hed_decompose(tile)
    out = hed_recompose(conc, tile)
    assert np.abs(out.pixels - tile.pixels).mean() <= 1e-4


def test_hed_white_tile_near_zero():
    tile = tile_from_array(np.ones((8, 8, 3)))
    conc = hed_decompose(tile)
    assert np.abs(conc).max() < 5e-3


def test_hed_pure_hematoxylin_preimage():
    c = 0.8
    od = c * HED_MATRIX[0]
    rgb = od_to_rgb(od)
    tile = tile_from_array(np.tile(rgb, (4, 4, 1)))
    conc = hed_decompose(tile)
    assert np.allclose(conc[..., 0], c, atol=1e-6)
    assert np.allclose(conc[..., 1:], 0.0, atol=1e-6)


# --- stain augmentation ---

def test_augment_zero_sigma_is_round_trip():
    tile = make_tissue_tile(seed=8)
    params = HedAugmentParams(sigma_scale=0.0, sigma_shift=0.0)
    out = stain_augment(tile, params, Rng(0))
    rt = hed_recompose(hed_decompose(tile), tile)
    assert np.abs(out.pixels - rt.pixels).mean() <= 1e-4


def test_augment_determinism():
    tile = make_tissue_tile(seed=9)
    a = stain_augment(tile, HedAugmentParams(), Rng(77))
    b = stain_augment(tile, HedAugmentParams(), Rng(77))
    assert np.array_equal(a.pixels, b.pixels)


def test_augment_forced_scale_doubles_concentration():
    c = 0.4
    rgb = od_to_rgb(c * HED_MATRIX[0])
    tile = tile_from_array(np.tile(rgb, (4, 4, 1)))

    class ForcedRng:
        def __init__(self):
            self.draws = iter([2.0, 0.0, 1.0, 0.0, 1.0, 0.0])

        def uniform(self, low=0.0, high=1.0, size=None):
            val = next(self.draws)
            # map the forced value through the interval the op requests
            return val if size is None else np.full(size, val)

    # use explicit params with zero sigmas except a forced generator is
    # simpler: set sigma so U(lo,hi) collapses to the forced endpoints
    params = HedAugmentParams(sigma_scale=1.0, sigma_shift=0.0)

    class EndpointRng:
        def __init__(self, values):
            self.values = iter(values)

        def uniform(self, low, high, size=None):
            frac = next(self.values)
            return low + frac * (high - low)

    rng = EndpointRng([1.0, 0.5, 0.5, 0.5, 0.5, 0.5])  # a_H=2, b=0, a_E=1, a_D=1
    out = stain_augment(tile, params, rng)
    conc = hed_decompose(out)
    assert np.allclose(conc[..., 0], 2 * c, atol=1e-4)


def test_augment_distance_monotone_in_sigma():
    tile = make_tissue_tile(seed=10)
    dists = []
    for sigma in [0.0, 0.05, 0.1, 0.2, 0.4]:
        out = stain_augment(tile, HedAugmentParams(sigma, sigma), Rng(5))
        dists.append(np.abs(out.pixels - tile.pixels).mean())
    assert all(b >= a - 1e-12 for a, b in zip(dists, dists[1:]))


def test_augment_output_range():
    tile = make_tissue_tile(seed=11)
    out = stain_augment(tile, HedAugmentParams(0.3, 0.3), Rng(1))
    assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0


# --- profile I/O ---

def test_profile_json_round_trip(tmp_path):
    ref = default_reference_profile()
    save_profile(ref, tmp_path / "p.json")
    loaded = load_profile(tmp_path / "p.json")
    assert np.allclose(loaded.stain_matrix, ref.stain_matrix)
    assert np.allclose(loaded.max_conc, ref.max_conc)


def test_profile_validation():
    with pytest.raises(ValueError):
        StainProfile(np.ones((3, 2)), np.ones(2))  # not unit norm
