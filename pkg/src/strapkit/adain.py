"""Forward-only stylization network: encoder, statistic alignment, blend, decoder.

The network is described by explicit layer lists (conv / relu / maxpool /
upsample) loaded from a portable binary weight file, and executed with
numpy. Convolutions use reflection padding and stride 1, so spatial size is
changed only by the pooling/upsampling layers (factor 8 each way for the
default VGG19-relu4_1 architecture).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChannelMismatch,
    FormatError,
    IndivisibleInput,
    NonFiniteWeight,
    ShapeMismatch,
)
from .imagecore import ImageTile, Rng, resize

WEIGHT_MAGIC = b"STRAPW1\0"
_TAG_CONV, _TAG_RELU, _TAG_MAXPOOL, _TAG_UPSAMPLE = 1, 2, 3, 4

# ImageNet RGB statistics used by pretrained VGG weights; applied only when
# StylizeConfig.vgg_normalize is set.
VGG_MEAN = np.array([0.485, 0.456, 0.406])
VGG_STD = np.array([0.229, 0.224, 0.225])


@dataclass(frozen=True)
class Conv:
    weight: np.ndarray  # (Cout, Cin, kh, kw)
    bias: np.ndarray    # (Cout,)


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    pass  # 2x2, stride 2


@dataclass(frozen=True)
class Upsample:
    pass  # nearest neighbor, x2


LayerSpec = Conv | ReLU | MaxPool | Upsample


@dataclass(frozen=True)
class NetworkWeights:
    encoder: tuple
    decoder: tuple


@dataclass(frozen=True)
class FeatureMap:
    values: np.ndarray  # (C, H, W)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class FeatureStats:
    mean: np.ndarray  # (C,)
    std: np.ndarray   # (C,)


@dataclass(frozen=True)
class StylizeConfig:
    alpha: float = 1.0
    content_size: int = 1024
    style_size: int = 256
    eps: float = 1e-5
    vgg_normalize: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha {self.alpha} outside [0, 1]")
        if self.eps <= 0:
            raise ValueError("eps must be positive")


# --- architecture bookkeeping ---

def _check_chain(layers, in_channels, what):
    """Validate channel compatibility; returns (out_channels, down, up)."""
    c, down, up = in_channels, 1, 1
    for i, layer in enumerate(layers):
        if isinstance(layer, Conv):
            cout, cin, kh, kw = layer.weight.shape
            if cin != c:
                raise ShapeMismatch(
                    f"{what} layer {i}: expects {cin} input channels, got {c}")
            if layer.bias.shape != (cout,):
                raise ShapeMismatch(f"{what} layer {i}: bias shape {layer.bias.shape}")
            if not (np.isfinite(layer.weight).all() and np.isfinite(layer.bias).all()):
                raise NonFiniteWeight(f"{what} layer {i}")
            c = cout
        elif isinstance(layer, MaxPool):
            down *= 2
        elif isinstance(layer, Upsample):
            up *= 2
    return c, down, up


def validate_network(net: NetworkWeights) -> None:
    enc_out, _, _ = _check_chain(net.encoder, 3, "encoder")
    dec_in = None
    for layer in net.decoder:
        if isinstance(layer, Conv):
            dec_in = layer.weight.shape[1]
            break
    if dec_in is not None and dec_in != enc_out:
        raise ShapeMismatch(
            f"encoder emits {enc_out} channels but decoder consumes {dec_in}")
    _check_chain(net.decoder, enc_out, "decoder")


def encoder_downsampling(net: NetworkWeights) -> int:
    _, down, _ = _check_chain(net.encoder, 3, "encoder")
    return down


def decoder_upsampling(net: NetworkWeights) -> int:
    c, _, _ = _check_chain(net.encoder, 3, "encoder")
    _, _, up = _check_chain(net.decoder, c, "decoder")
    return up


# --- weight file format ---
# Little-endian. Header: magic "STRAPW1\0", u32 encoder layer count,
# u32 decoder layer count. Conv layer: tag u8, dims Cout,Cin,kh,kw as u32,
# float32 kernel (row-major Cout,Cin,kh,kw), float32 bias (Cout).
# ReLU/MaxPool/Upsample: tag u8 only. A JSON sidecar (<path>.json) lists
# layer names for diagnostics.

def save_weights(net: NetworkWeights, path) -> None:
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<II", len(net.encoder), len(net.decoder)))
        for layer in list(net.encoder) + list(net.decoder):
            if isinstance(layer, Conv):
                fh.write(struct.pack("<B", _TAG_CONV))
                fh.write(struct.pack("<IIII", *layer.weight.shape))
                fh.write(layer.weight.astype("<f4").tobytes())
                fh.write(layer.bias.astype("<f4").tobytes())
            elif isinstance(layer, ReLU):
                fh.write(struct.pack("<B", _TAG_RELU))
            elif isinstance(layer, MaxPool):
                fh.write(struct.pack("<B", _TAG_MAXPOOL))
            elif isinstance(layer, Upsample):
                fh.write(struct.pack("<B", _TAG_UPSAMPLE))
    names = [type(layer).__name__ for layer in list(net.encoder) + list(net.decoder)]
    with open(str(path) + ".json", "w") as fh:
        json.dump({"encoder_layers": len(net.encoder),
                   "decoder_layers": len(net.decoder),
                   "layers": names}, fh, indent=2)


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated weight file while reading {what}")
    return buf


def load_weights(path) -> NetworkWeights:
    """Load and validate a network from the portable binary format."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 8, "magic") != WEIGHT_MAGIC:
            raise FormatError(f"{path}: bad magic")
        n_enc, n_dec = struct.unpack("<II", _read_exact(fh, 8, "layer counts"))
        layers = []
        for i in range(n_enc + n_dec):
            (tag,) = struct.unpack("<B", _read_exact(fh, 1, f"layer {i} tag"))
            if tag == _TAG_CONV:
                cout, cin, kh, kw = struct.unpack(
                    "<IIII", _read_exact(fh, 16, f"layer {i} dims"))
                w = np.frombuffer(
                    _read_exact(fh, 4 * cout * cin * kh * kw, f"layer {i} kernel"),
                    dtype="<f4").reshape(cout, cin, kh, kw).astype(np.float64)
                b = np.frombuffer(
                    _read_exact(fh, 4 * cout, f"layer {i} bias"),
                    dtype="<f4").astype(np.float64)
                if not (np.isfinite(w).all() and np.isfinite(b).all()):
                    raise NonFiniteWeight(f"layer {i}")
                layers.append(Conv(w, b))
            elif tag == _TAG_RELU:
                layers.append(ReLU())
            elif tag == _TAG_MAXPOOL:
                layers.append(MaxPool())
            elif tag == _TAG_UPSAMPLE:
                layers.append(Upsample())
            else:
                raise FormatError(f"layer {i}: unknown kind tag {tag}")
        if fh.read(1):
            raise FormatError("trailing bytes after last layer")
    net = NetworkWeights(tuple(layers[:n_enc]), tuple(layers[n_enc:]))
    validate_network(net)
    return net


# --- forward pass ---

_CONV_ROW_BLOCK = 64  # output rows per im2col block, bounds scratch memory


def conv2d_reflect(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Stride-1 convolution with reflection padding; x is (C, H, W)."""
    cout, cin, kh, kw = weight.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw)), mode="reflect") if ph or pw else x
    h, w = x.shape[1], x.shape[2]
    wf = weight.reshape(cout, cin * kh * kw).astype(np.float32)
    out = np.empty((cout, h, w), dtype=np.float32)
    xp32 = xp.astype(np.float32)
    for y0 in range(0, h, _CONV_ROW_BLOCK):
        y1 = min(y0 + _CONV_ROW_BLOCK, h)
        win = np.lib.stride_tricks.sliding_window_view(
            xp32[:, y0:y1 + kh - 1, :], (kh, kw), axis=(1, 2))
        # win: (cin, rows, w, kh, kw) -> (rows*w, cin*kh*kw)
        cols = win.transpose(1, 2, 0, 3, 4).reshape((y1 - y0) * w, cin * kh * kw)
        out[:, y0:y1, :] = (cols @ wf.T).T.reshape(cout, y1 - y0, w)
    return out.astype(np.float64) + bias[:, None, None]


def maxpool2x2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise IndivisibleInput(f"maxpool on odd spatial size {h}x{w}")
    return x.reshape(c, h // 2, 2, w // 2, 2).max(axis=(2, 4))


def upsample2x(x: np.ndarray) -> np.ndarray:
    return x.repeat(2, axis=1).repeat(2, axis=2)


def _forward(layers, x: np.ndarray) -> np.ndarray:
    for layer in layers:
        if isinstance(layer, Conv):
            if layer.weight.shape[1] != x.shape[0]:
                raise ChannelMismatch(
                    f"conv expects {layer.weight.shape[1]} channels, got {x.shape[0]}")
            x = conv2d_reflect(x, layer.weight, layer.bias)
        elif isinstance(layer, ReLU):
            x = np.maximum(x, 0.0)
        elif isinstance(layer, MaxPool):
            x = maxpool2x2(x)
        elif isinstance(layer, Upsample):
            x = upsample2x(x)
    return x


def encode(net: NetworkWeights, img: ImageTile, vgg_normalize: bool = False) -> FeatureMap:
    factor = encoder_downsampling(net)
    if img.height % factor or img.width % factor:
        raise IndivisibleInput(
            f"input {img.height}x{img.width} not divisible by {factor}")
    x = img.pixels.transpose(2, 0, 1)
    if vgg_normalize:
        x = (x - VGG_MEAN[:, None, None]) / VGG_STD[:, None, None]
    return FeatureMap(_forward(net.encoder, x))


def decode(net: NetworkWeights, feats: FeatureMap) -> ImageTile:
    first_conv = next((l for l in net.decoder if isinstance(l, Conv)), None)
    if first_conv is not None and first_conv.weight.shape[1] != feats.channels:
        raise ChannelMismatch(
            f"decoder consumes {first_conv.weight.shape[1]} channels, "
            f"features have {feats.channels}")
    out = _forward(net.decoder, feats.values)
    if out.shape[0] != 3:
        raise ChannelMismatch(f"decoder emitted {out.shape[0]} channels, want 3")
    from .imagecore import tile_from_array
    return tile_from_array(out.transpose(1, 2, 0))


def channel_stats(f: FeatureMap, eps: float = 0.0) -> FeatureStats:
    """Per-channel mean and std over the spatial axes (population variance)."""
    flat = f.values.reshape(f.channels, -1)
    mean = flat.mean(axis=1)
    var = flat.var(axis=1)
    return FeatureStats(mean, np.sqrt(var + eps))


def adain_align(content: FeatureMap, style: FeatureMap, eps: float = 1e-5) -> FeatureMap:
    """Shift content features so their per-channel mean/std match the style's."""
    if content.channels != style.channels:
        raise ChannelMismatch(
            f"content has {content.channels} channels, style {style.channels}")
    cs = channel_stats(content, eps)
    ss = channel_stats(style, eps)
    normalized = (content.values - cs.mean[:, None, None]) / cs.std[:, None, None]
    return FeatureMap(normalized * ss.std[:, None, None] + ss.mean[:, None, None])


def blend(content_feats: FeatureMap, target_feats: FeatureMap, alpha: float) -> FeatureMap:
    if content_feats.values.shape != target_feats.values.shape:
        raise ShapeMismatch(
            f"{content_feats.values.shape} vs {target_feats.values.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha {alpha} outside [0, 1]")
    return FeatureMap(alpha * target_feats.values + (1.0 - alpha) * content_feats.values)


def stylize(net: NetworkWeights, content: ImageTile, style: ImageTile,
            cfg: StylizeConfig = StylizeConfig()) -> ImageTile:
    """Full pass: resize, encode both, align statistics, blend, decode."""
    c = resize(content, cfg.content_size, cfg.content_size)
    s = resize(style, cfg.style_size, cfg.style_size)
    cf = encode(net, c, cfg.vgg_normalize)
    if cfg.alpha == 0.0:
        target = cf
    else:
        sf = encode(net, s, cfg.vgg_normalize)
        target = blend(cf, adain_align(cf, sf, cfg.eps), cfg.alpha)
    out = decode(net, target)
    return ImageTile(out.pixels, content.meta)


# --- architecture plans and fixture weights ---

# VGG19 truncated at relu4_1 (channels 3->64->64->128->128->256x4->512) and a
# mirror decoder with nearest-neighbor upsampling; all kernels 3x3.
VGG19_ENCODER_PLAN = [
    ("conv", 3, 64), ("relu",), ("conv", 64, 64), ("relu",), ("pool",),
    ("conv", 64, 128), ("relu",), ("conv", 128, 128), ("relu",), ("pool",),
    ("conv", 128, 256), ("relu",), ("conv", 256, 256), ("relu",),
    ("conv", 256, 256), ("relu",), ("conv", 256, 256), ("relu",), ("pool",),
    ("conv", 256, 512), ("relu",),
]
VGG19_DECODER_PLAN = [
    ("conv", 512, 256), ("relu",), ("up",),
    ("conv", 256, 256), ("relu",), ("conv", 256, 256), ("relu",),
    ("conv", 256, 256), ("relu",), ("conv", 256, 128), ("relu",), ("up",),
    ("conv", 128, 128), ("relu",), ("conv", 128, 64), ("relu",), ("up",),
    ("conv", 64, 64), ("relu",), ("conv", 64, 3),
]

TINY_ENCODER_PLAN = [
    ("conv", 3, 8), ("relu",), ("pool",), ("conv", 8, 16), ("relu",),
]
TINY_DECODER_PLAN = [
    ("conv", 16, 8), ("relu",), ("up",), ("conv", 8, 3),
]


def _build_plan(plan, rng: Rng, k: int = 3):
    layers = []
    for item in plan:
        if item[0] == "conv":
            cin, cout = item[1], item[2]
            scale = np.sqrt(2.0 / (cin * k * k))
            w = rng.uniform(-scale, scale, size=(cout, cin, k, k))
            layers.append(Conv(np.asarray(w), np.zeros(cout)))
        elif item[0] == "relu":
            layers.append(ReLU())
        elif item[0] == "pool":
            layers.append(MaxPool())
        elif item[0] == "up":
            layers.append(Upsample())
    return tuple(layers)


def random_network(encoder_plan=None, decoder_plan=None, seed: int = 0) -> NetworkWeights:
    """Randomly initialized network for fixtures/tests (not trained)."""
    rng = Rng(seed)
    net = NetworkWeights(
        _build_plan(encoder_plan or TINY_ENCODER_PLAN, rng),
        _build_plan(decoder_plan or TINY_DECODER_PLAN, rng),
    )
    validate_network(net)
    return net


def identity_network() -> NetworkWeights:
    """1x1 identity conv encoder/decoder; features equal input channels."""
    eye = np.eye(3).reshape(3, 3, 1, 1)
    layer = Conv(eye, np.zeros(3))
    return NetworkWeights((layer,), (layer,))
