"""strapkit: style-transfer augmentation, stain normalization/augmentation,
frequency filtering, and evaluation statistics for histopathology tiles."""

from .adain import (
    FeatureMap,
    FeatureStats,
    NetworkWeights,
    StylizeConfig,
    adain_align,
    blend,
    channel_stats,
    decode,
    encode,
    load_weights,
    save_weights,
    stylize,
)
from .evalstats import (
    ScoreRow,
    ScoreTable,
    TestResult,
    aggregate_patient,
    auroc,
    bh_adjust,
    bootstrap_ci,
    delong_test,
    integrated_gradients,
    paired_t_test,
    permutation_test,
)
from .freq import FilterSpec, SweepSpec, build_mask, lowpass, sweep_lowpass
from .imagecore import (
    ImageTile,
    Manifest,
    Rng,
    TileMeta,
    load_manifest,
    load_tile,
    random_flip,
    random_resized_crop,
    resize,
    save_manifest,
    save_tile,
    tile_from_array,
)
from .stain import (
    HedAugmentParams,
    MacenkoParams,
    StainProfile,
    estimate_stain_profile,
    hed_decompose,
    hed_recompose,
    macenko_normalize,
    rgb_to_od,
    od_to_rgb,
    stain_augment,
)

__version__ = "0.1.0"
