import numpy as np
import pytest

from strapkit.imagecore import (
    Manifest,
    Rng,
    TileMeta,
    save_manifest,
    save_tile,
    tile_from_array,
)


def make_tile(seed=0, h=32, w=32, low=0.0, high=1.0):
    rng = np.random.default_rng(seed)
    return tile_from_array(rng.uniform(low, high, size=(h, w, 3)))


def make_tissue_tile(seed=0, h=48, w=48):
    """Synthetic H&E-looking tile: mixture of the two reference stains."""
    from strapkit.stain import default_reference_profile, od_to_rgb

    rng = np.random.default_rng(seed)
    basis = default_reference_profile().stain_matrix
    conc = rng.uniform(0.05, 1.2, size=(h * w, 2))
    od = conc @ basis.T
    return tile_from_array(np.clip(od_to_rgb(od), 0, 1).reshape(h, w, 3))


def write_manifest(tmp_path, tiles, name="manifest.csv", labels=None, split="train"):
    """Save tiles as PNGs under tmp_path and write a manifest referencing them."""
    tile_dir = tmp_path / "tiles"
    entries = []
    for i, tile in enumerate(tiles):
        label = labels[i] if labels else i % 2
        meta = TileMeta(tile_id=f"t{i:03d}", patient_id=f"p{i % 3}",
                        slide_id=f"s{i}", domain_id="d0", label=label, split=split)
        path = tile_dir / f"{meta.tile_id}.png"
        save_tile(tile, path)
        entries.append((path, meta))
    manifest = Manifest(tuple(entries))
    manifest_path = tmp_path / name
    save_manifest(manifest, manifest_path, relative_to=tmp_path)
    return manifest_path, manifest


@pytest.fixture
def rng():
    return Rng(12345)
