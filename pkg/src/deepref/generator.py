"""The reference-picture generator network.

Topology: two 3x3 head convolutions (each + ReLU), three dilated-inception
blocks, and a final 3x3 convolution with no activation. Each block runs three
multi-scale convolution branches (receptive fields 3, 9 and 15), concatenates
them, and fuses with the block input through two 1x1 convolutions:

    out = ReLU( k * fuse(concat(branch1, branch2, branch3)) + skip(x) )

where ``k`` in [0, 1] weights how much of the newly learned features is kept
and ``skip`` is a 1x1 convolution that approximately carries the input
through. The whole network is same-padded, so it maps a single-channel plane
of any size >= the kernel size to a plane of identical size.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError, ShapeMismatchError
from .fileio import atomic_write_bytes
from .nn import (
    ConvParams,
    concat_channels,
    conv2d_backward,
    conv2d_forward,
    relu,
    relu_backward,
    split_channels,
)

WEIGHT_MAGIC = b"DRPG"
WEIGHT_VERSION = 1

# (kernel, dilation) per conv, per branch; every branch starts with a 1x1
# channel reduction. Receptive fields: 3, 9, 15.
_BRANCH_LAYOUT = (
    ((1, 1), (3, 1)),
    ((1, 1), (3, 1), (3, 3)),
    ((1, 1), (3, 1), (3, 1), (3, 5)),
)
_BRANCH_RF = (3, 9, 15)
_NUM_BLOCKS = 3


@dataclass
class ModelConfig:
    head_channels: int = 64
    branch_reduce_channels: int = 32
    branch_out_channels: int = 32
    trunk_channels: int = 64
    k: float = 0.5
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        for name in ("head_channels", "branch_reduce_channels",
                     "branch_out_channels", "trunk_channels"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.k <= 1.0:
            raise ConfigError(f"k must be in [0,1], got {self.k}")
        if np.dtype(self.dtype) not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype}")


@dataclass
class BranchSpec:
    """One multi-scale branch: a stack of convolutions, each followed by ReLU."""

    layers: list[ConvParams]
    declared_receptive_field: int

    def __post_init__(self):
        if self.receptive_field != self.declared_receptive_field:
            raise ConfigError(
                f"branch receptive field {self.receptive_field} != "
                f"declared {self.declared_receptive_field}"
            )

    @property
    def receptive_field(self) -> int:
        return 1 + sum(p.dilation * (p.kernel_size - 1) for p in self.layers)


@dataclass
class DilatedInceptionBlock:
    branches: list[BranchSpec]
    fuse: ConvParams  # 1x1 on the concatenated branch outputs
    skip: ConvParams  # 1x1 on the block input (approximate-identity branch)
    k: float

    def __post_init__(self):
        if not 0.0 <= self.k <= 1.0:
            raise ConfigError(f"block k must be in [0,1], got {self.k}")
        concat_ch = sum(b.layers[-1].out_ch for b in self.branches)
        if self.fuse.in_ch != concat_ch:
            raise ShapeMismatchError(
                f"fuse expects {self.fuse.in_ch} channels, branches concat to {concat_ch}"
            )
        if self.skip.in_ch != self.skip.out_ch or self.fuse.out_ch != self.skip.out_ch:
            raise ShapeMismatchError(
                "block input and output channel counts must match so blocks stack"
            )


@dataclass
class GeneratorNet:
    head: list[ConvParams]
    blocks: list[DilatedInceptionBlock]
    tail: ConvParams
    config: ModelConfig


def build_network(config: ModelConfig) -> GeneratorNet:
    """Build the generator with seeded Kaiming-style initialization; the skip
    (approximate-identity) 1x1 convolutions start as exact identities so the
    stacked blocks begin as near-pass-through maps.

    Two builds from the same config are bit-identical.
    """
    rng = np.random.default_rng(config.seed)
    dtype = np.dtype(config.dtype)

    def conv(cin, cout, kernel, dilation=1):
        std = np.sqrt(2.0 / (cin * kernel * kernel))
        w = rng.normal(0.0, std, size=(cout, cin, kernel, kernel)).astype(dtype)
        return ConvParams(w, np.zeros(cout, dtype=dtype), dilation=dilation)

    def identity_conv(ch):
        w = np.zeros((ch, ch, 1, 1), dtype=dtype)
        w[np.arange(ch), np.arange(ch), 0, 0] = 1.0
        return ConvParams(w, np.zeros(ch, dtype=dtype))

    t = config.trunk_channels
    r = config.branch_reduce_channels
    o = config.branch_out_channels

    head = [conv(1, config.head_channels, 3), conv(config.head_channels, t, 3)]
    blocks = []
    for _ in range(_NUM_BLOCKS):
        branches = []
        for layout, rf in zip(_BRANCH_LAYOUT, _BRANCH_RF):
            layers, cin = [], t
            for kernel, dilation in layout:
                cout = r if kernel == 1 else o
                layers.append(conv(cin, cout, kernel, dilation))
                cin = cout
            branches.append(BranchSpec(layers, rf))
        fuse = conv(len(branches) * o, t, 1)
        skip = identity_conv(t)
        blocks.append(DilatedInceptionBlock(branches, fuse, skip, config.k))
    tail = conv(t, 1, 3)
    return GeneratorNet(head, blocks, tail, config)


def named_params(net: GeneratorNet) -> list[tuple[str, ConvParams]]:
    """All trainable convolutions in fixed traversal order."""
    items = [(f"head{i + 1}", p) for i, p in enumerate(net.head)]
    for bi, blk in enumerate(net.blocks, start=1):
        for ri, branch in enumerate(blk.branches, start=1):
            for li, layer in enumerate(branch.layers, start=1):
                items.append((f"block{bi}.branch{ri}.conv{li}", layer))
        items.append((f"block{bi}.fuse", blk.fuse))
        items.append((f"block{bi}.skip", blk.skip))
    items.append(("tail", net.tail))
    return items


def copy_network(net: GeneratorNet) -> GeneratorNet:
    """Deep copy; training mutates the copy, never the original."""
    copied = build_network(net.config)
    for (_, src), (_, dst) in zip(named_params(net), named_params(copied)):
        dst.weights = src.weights.copy()
        dst.bias = src.bias.copy()
    for blk_src, blk_dst in zip(net.blocks, copied.blocks):
        blk_dst.k = blk_src.k
    return copied


def branch_forward(branch: BranchSpec, x: np.ndarray) -> np.ndarray:
    for layer in branch.layers:
        x = relu(conv2d_forward(x, layer))
    return x


def block_forward(block: DilatedInceptionBlock, x: np.ndarray, want_cache: bool = False):
    """out = ReLU(k * fuse(concat(branches(x))) + skip(x)); spatial dims preserved."""
    branch_outs, branch_caches = [], []
    for branch in block.branches:
        h, cache = x, []
        for layer in branch.layers:
            z = conv2d_forward(h, layer)
            cache.append((h, z))
            h = relu(z)
        branch_outs.append(h)
        branch_caches.append(cache)
    phi = concat_channels(branch_outs)
    pre = block.k * conv2d_forward(phi, block.fuse) + conv2d_forward(x, block.skip)
    out = relu(pre)
    if want_cache:
        return out, (x, branch_caches, phi, pre)
    return out


def _block_backward(block, cache, grad_out, grads, prefix):
    x, branch_caches, phi, pre = cache
    g_pre = relu_backward(pre, grad_out)
    g_phi, gw, gb = conv2d_backward(phi, block.fuse, block.k * g_pre)
    grads[f"{prefix}.fuse"] = (gw, gb)
    g_x, gw, gb = conv2d_backward(x, block.skip, g_pre)
    grads[f"{prefix}.skip"] = (gw, gb)
    parts = split_channels(g_phi, [b.layers[-1].out_ch for b in block.branches])
    for ri, (branch, cache_b, g) in enumerate(zip(block.branches, branch_caches, parts), start=1):
        for li in reversed(range(len(branch.layers))):
            h_in, z = cache_b[li]
            g_z = relu_backward(z, g)
            g, gw, gb = conv2d_backward(h_in, branch.layers[li], g_z)
            grads[f"{prefix}.branch{ri}.conv{li + 1}"] = (gw, gb)
        g_x = g_x + g
    return g_x


def net_forward(net: GeneratorNet, x: np.ndarray, want_cache: bool = False):
    """Full forward pass on a (batch, 1, H, W) tensor in the [0,1] domain."""
    head_cache, h = [], x
    for layer in net.head:
        z = conv2d_forward(h, layer)
        head_cache.append((h, z))
        h = relu(z)
    block_caches = []
    for blk in net.blocks:
        if want_cache:
            h, cache = block_forward(blk, h, want_cache=True)
            block_caches.append(cache)
        else:
            h = block_forward(blk, h)
    out = conv2d_forward(h, net.tail)
    if want_cache:
        return out, (head_cache, block_caches, h)
    return out


def net_backward(net: GeneratorNet, cache, grad_out: np.ndarray):
    """Backward through the fixed graph; returns {name: (grad_w, grad_b)} and grad_input."""
    head_cache, block_caches, tail_in = cache
    grads = {}
    g, gw, gb = conv2d_backward(tail_in, net.tail, grad_out)
    grads["tail"] = (gw, gb)
    for bi in reversed(range(len(net.blocks))):
        g = _block_backward(net.blocks[bi], block_caches[bi], g, grads, f"block{bi + 1}")
    for hi in reversed(range(len(net.head))):
        h_in, z = head_cache[hi]
        g_z = relu_backward(z, g)
        g, gw, gb = conv2d_backward(h_in, net.head[hi], g_z)
        grads[f"head{hi + 1}"] = (gw, gb)
    return grads, g


def normalize_plane(plane: np.ndarray, dtype) -> np.ndarray:
    """8-bit plane -> (1, 1, H, W) tensor in [0, 1]."""
    return (np.asarray(plane, dtype=dtype) / 255.0)[None, None]


def denormalize_plane(x: np.ndarray) -> np.ndarray:
    """[0, 1] tensor values -> rounded, clamped 8-bit plane."""
    return np.clip(np.rint(np.asarray(x, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def generate_reference(net: GeneratorNet, frame: np.ndarray) -> np.ndarray:
    """Run the whole frame through the generator; output dims equal input dims."""
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise ShapeMismatchError(f"frame must be 2-D, got {frame.shape}")
    if min(frame.shape) < net.tail.kernel_size:
        raise ShapeMismatchError(
            f"frame {frame.shape} smaller than the {net.tail.kernel_size}x"
            f"{net.tail.kernel_size} tail kernel"
        )
    x = normalize_plane(frame, np.dtype(net.config.dtype))
    y = net_forward(net, x)
    return denormalize_plane(y[0, 0])


FEATURE_SELECTORS = ("head1", "head2", "block1", "block2", "block3")


def forward_activations(net: GeneratorNet, x: np.ndarray) -> dict[str, np.ndarray]:
    acts, h = {}, x
    for i, layer in enumerate(net.head, start=1):
        h = relu(conv2d_forward(h, layer))
        acts[f"head{i}"] = h
    for i, blk in enumerate(net.blocks, start=1):
        h = block_forward(blk, h)
        acts[f"block{i}"] = h
    acts["output"] = conv2d_forward(h, net.tail)
    return acts


def dump_feature_maps(net: GeneratorNet, frame: np.ndarray, layer_selector: str) -> list[np.ndarray]:
    """Min-max normalize every channel of the selected activation to 8-bit planes.

    Constant channels map to 0.
    """
    if layer_selector not in FEATURE_SELECTORS:
        raise ConfigError(
            f"unknown feature selector {layer_selector!r}; choose from {FEATURE_SELECTORS}"
        )
    x = normalize_plane(np.asarray(frame), np.dtype(net.config.dtype))
    act = forward_activations(net, x)[layer_selector][0]
    planes = []
    for chan in act:
        lo, hi = float(chan.min()), float(chan.max())
        if hi == lo:
            planes.append(np.zeros(chan.shape, dtype=np.uint8))
        else:
            planes.append(np.rint((chan - lo) / (hi - lo) * 255.0).astype(np.uint8))
    return planes


def save_weights(net: GeneratorNet, path) -> None:
    """Binary weight file: magic, version, then named little-endian f32 tensors."""
    tensors: list[tuple[str, np.ndarray]] = []
    for name, p in named_params(net):
        tensors.append((f"{name}.weight", p.weights))
        tensors.append((f"{name}.bias", p.bias))
    tensors.append(("k", np.array([blk.k for blk in net.blocks], dtype=np.float32)))

    buf = bytearray()
    buf += WEIGHT_MAGIC
    buf += struct.pack("<II", WEIGHT_VERSION, len(tensors))
    for name, arr in tensors:
        encoded = name.encode("utf-8")
        buf += struct.pack("<H", len(encoded)) + encoded
        buf += struct.pack("<B", arr.ndim)
        buf += struct.pack(f"<{arr.ndim}I", *arr.shape)
        buf += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    atomic_write_bytes(path, bytes(buf))


def _parse_weight_file(data: bytes) -> dict[str, np.ndarray]:
    if data[:4] != WEIGHT_MAGIC:
        raise FormatError(f"bad weight-file magic {data[:4]!r}")
    try:
        version, count = struct.unpack_from("<II", data, 4)
        if version != WEIGHT_VERSION:
            raise FormatError(f"unsupported weight-file version {version}")
        offset = 12
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset : offset + name_len].decode("utf-8")
            if len(data) < offset + name_len:
                raise FormatError("truncated weight file inside tensor name")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", data, offset)
            offset += 1
            dims = struct.unpack_from(f"<{ndim}I", data, offset)
            offset += 4 * ndim
            size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
            end = offset + 4 * size
            if end > len(data):
                raise FormatError(f"truncated weight file in tensor {name!r}")
            tensors[name] = np.frombuffer(data[offset:end], dtype="<f4").reshape(dims)
            offset = end
        if offset != len(data):
            raise FormatError(f"{len(data) - offset} trailing bytes after last tensor")
        return tensors
    except struct.error as exc:
        raise FormatError(f"truncated weight file: {exc}") from exc


def load_weights(path, dtype: str = "float32") -> GeneratorNet:
    """Rebuild a network from a weight file; shapes are validated per layer."""
    with open(path, "rb") as fh:
        tensors = _parse_weight_file(fh.read())

    for required in ("head1.weight", "head2.weight",
                     "block1.branch1.conv1.weight", "block1.branch1.conv2.weight", "k"):
        if required not in tensors:
            raise FormatError(f"weight file is missing tensor {required!r}")
    ks = tensors["k"]
    if ks.shape != (_NUM_BLOCKS,):
        raise FormatError(f"k tensor has shape {ks.shape}, expected ({_NUM_BLOCKS},)")
    config = ModelConfig(
        head_channels=tensors["head1.weight"].shape[0],
        branch_reduce_channels=tensors["block1.branch1.conv1.weight"].shape[0],
        branch_out_channels=tensors["block1.branch1.conv2.weight"].shape[0],
        trunk_channels=tensors["head2.weight"].shape[0],
        k=float(np.clip(ks[0], 0.0, 1.0)),
        seed=0,
        dtype=dtype,
    )
    net = build_network(config)

    expected = {"k"}
    for name, _ in named_params(net):
        expected.update((f"{name}.weight", f"{name}.bias"))
    missing = expected - set(tensors)
    unexpected = set(tensors) - expected
    if missing:
        raise FormatError(f"weight file is missing tensors: {sorted(missing)}")
    if unexpected:
        raise FormatError(f"weight file has unexpected tensors: {sorted(unexpected)}")

    np_dtype = np.dtype(dtype)
    for name, p in named_params(net):
        for part, current in (("weight", p.weights), ("bias", p.bias)):
            arr = tensors[f"{name}.{part}"]
            if arr.shape != current.shape:
                raise FormatError(
                    f"layer {name}: {part} shape {arr.shape} != expected {current.shape}"
                )
        p.weights = tensors[f"{name}.weight"].astype(np_dtype)
        p.bias = tensors[f"{name}.bias"].astype(np_dtype)
    for blk, k in zip(net.blocks, ks):
        if not 0.0 <= float(k) <= 1.0:
            raise FormatError(f"stored k {float(k)} outside [0,1]")
        blk.k = float(k)
    return net
