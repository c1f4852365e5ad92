"""Quarter-pel block motion search, a simplified P-frame codec proxy, and
reference-list substitution.

The proxy codes each block by full integer-pel search (SAD + lambda * mv
bits) followed by half- then quarter-pel refinement, scalar-quantizes the
spatial residual, and prices everything with signed exp-Golomb code lengths.
It is deterministic and dependency-free; its bits are a ranking proxy, not
VVC bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, ShapeMismatchError
from .generator import GeneratorNet, generate_reference
from .interp import MotionVectorQ, interpolate_block
from .metrics import RDPoint, psnr


@dataclass
class SearchConfig:
    search_range: int = 16  # integer-pel radius
    lambda_mv: float = 4.0  # SAD units per mv bit
    block_size: int = 32

    def __post_init__(self):
        if self.search_range < 1:
            raise ConfigError(f"search_range must be >= 1, got {self.search_range}")
        if self.lambda_mv < 0:
            raise ConfigError(f"lambda_mv must be >= 0, got {self.lambda_mv}")
        if self.block_size < 1:
            raise ConfigError(f"block_size must be >= 1, got {self.block_size}")


class MVRecord(NamedTuple):
    block_x: int
    block_y: int
    ref_idx: int
    mv_x_q4: int
    mv_y_q4: int
    sad: int


def signed_exp_golomb_bits(v: int) -> int:
    """Code length of v mapped 0->0, 1->1, -1->2, 2->3, ... then exp-Golomb."""
    v = int(v)
    code = 2 * v - 1 if v > 0 else -2 * v
    return 2 * (code + 1).bit_length() - 1


_SE_TABLE = np.array([2 * (c + 1).bit_length() - 1 for c in range(2048)], dtype=np.int64)


def _se_bits_array(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    code = np.where(v > 0, 2 * v - 1, -2 * v)
    if np.any(code >= len(_SE_TABLE)):
        return np.array([signed_exp_golomb_bits(x) for x in v.ravel()]).reshape(v.shape)
    return _SE_TABLE[code]


def mv_bits(mv: MotionVectorQ) -> int:
    """Signed exp-Golomb lengths of both quarter-pel components, zero predictor."""
    return signed_exp_golomb_bits(mv.x4) + signed_exp_golomb_bits(mv.y4)


def _check_block(frame: np.ndarray, x0: int, y0: int, w: int, h: int) -> None:
    fh, fw = frame.shape
    if not (0 <= x0 and x0 + w <= fw and 0 <= y0 and y0 + h <= fh):
        raise ShapeMismatchError(f"block ({x0},{y0}) size {w}x{h} outside {fw}x{fh} frame")


def motion_search(
    ref: np.ndarray,
    cur: np.ndarray,
    origin: tuple[int, int],
    cfg: SearchConfig,
    size=None,
) -> tuple[MotionVectorQ, float]:
    """Full integer search then half- and quarter-pel refinement.

    Cost = SAD + lambda_mv * mv_bits. Ties broken by smaller |mv|_1, then by
    raster order of candidates (incumbents win against later equal candidates).
    """
    ref = np.asarray(ref)
    cur = np.asarray(cur)
    x0, y0 = origin
    w, h = (cfg.block_size, cfg.block_size) if size is None else (int(size[0]), int(size[1]))
    _check_block(cur, x0, y0, w, h)
    if ref.shape != cur.shape:
        raise ShapeMismatchError(f"ref dims {ref.shape} != cur dims {cur.shape}")

    radius = cfg.search_range
    cur_blk = cur[y0 : y0 + h, x0 : x0 + w].astype(np.int32)

    margin = radius + 1
    padded = np.pad(ref, margin, mode="edge")
    sub = padded[
        margin + y0 - radius : margin + y0 + h + radius,
        margin + x0 - radius : margin + x0 + w + radius,
    ]
    windows = np.lib.stride_tricks.sliding_window_view(sub, (h, w))
    sad = np.abs(windows.astype(np.int32) - cur_blk).sum(axis=(2, 3), dtype=np.int64)

    offsets = np.arange(-radius, radius + 1)
    comp_bits = _se_bits_array(4 * offsets)
    cost = sad + cfg.lambda_mv * (comp_bits[:, None] + comp_bits[None, :])
    l1 = 4 * (np.abs(offsets)[:, None] + np.abs(offsets)[None, :])
    flat = np.lexsort((l1.ravel(), cost.ravel()))[0]  # stable: raster order breaks ties
    dy, dx = divmod(int(flat), 2 * radius + 1)
    best_mv = MotionVectorQ(4 * (dx - radius), 4 * (dy - radius))
    best_cost = float(cost[dy, dx])
    best_l1 = int(l1[dy, dx])

    def candidate_cost(cand: MotionVectorQ) -> float:
        pred = interpolate_block(ref, origin, (w, h), cand).astype(np.int32)
        cand_sad = int(np.abs(pred - cur_blk).sum())
        return cand_sad + cfg.lambda_mv * mv_bits(cand)

    for step in (2, 1):  # half-pel then quarter-pel neighbors
        cx, cy = best_mv
        for ddy in (-step, 0, step):
            for ddx in (-step, 0, step):
                if ddx == 0 and ddy == 0:
                    continue
                cand = MotionVectorQ(cx + ddx, cy + ddy)
                cand_cost = candidate_cost(cand)
                cand_l1 = abs(cand.x4) + abs(cand.y4)
                if (cand_cost, cand_l1) < (best_cost, best_l1):
                    best_mv, best_cost, best_l1 = cand, cand_cost, cand_l1
    return best_mv, float(best_cost)


def substitute_reference(ref_list, generated: np.ndarray):
    """Return a list whose first entry is the generated picture; rest unchanged."""
    refs = list(ref_list)
    if not refs:
        raise ShapeMismatchError("reference list must hold at least one picture")
    generated = np.asarray(generated)
    for i, ref in enumerate(refs):
        if np.asarray(ref).shape != generated.shape:
            raise ShapeMismatchError(
                f"reference {i} dims {np.asarray(ref).shape} != generated {generated.shape}"
            )
    return [generated] + refs[1:]


def encode_frame_proxy(
    refs, cur: np.ndarray, cfg: SearchConfig, q: int
) -> tuple[float, np.ndarray, list[MVRecord]]:
    """Inter-code one frame against a reference list at quantizer step q.

    Per block: best (reference, mv) by motion_search cost, prediction by
    interpolation, residual quantized as round(r/q), bits = mv bits +
    reference-index bits + signed exp-Golomb lengths of the quantized
    residual. Returns (frame bits, reconstruction, mv field).
    """
    refs = list(refs)
    cur = np.asarray(cur)
    if not refs:
        raise ShapeMismatchError("reference list must hold at least one picture")
    if int(q) < 1:
        raise ConfigError(f"quantizer step must be >= 1, got {q}")
    q = int(q)
    for i, ref in enumerate(refs):
        if np.asarray(ref).shape != cur.shape:
            raise ShapeMismatchError(
                f"reference {i} dims {np.asarray(ref).shape} != frame dims {cur.shape}"
            )
    fh, fw = cur.shape
    bs = cfg.block_size
    ref_idx_bits = (len(refs) - 1).bit_length()

    recon = np.empty_like(cur, dtype=np.uint8)
    mv_field: list[MVRecord] = []
    total_bits = 0
    for by in range(0, fh, bs):
        h = min(bs, fh - by)
        for bx in range(0, fw, bs):
            w = min(bs, fw - bx)
            best = None
            for ri, ref in enumerate(refs):
                mv, cost = motion_search(ref, cur, (bx, by), cfg, size=(w, h))
                if best is None or cost < best[0]:
                    best = (cost, ri, mv)
            _, ri, mv = best
            pred = interpolate_block(refs[ri], (bx, by), (w, h), mv).astype(np.int64)
            cur_blk = cur[by : by + h, bx : bx + w].astype(np.int64)
            resid = cur_blk - pred
            qidx = np.rint(resid / q).astype(np.int64)
            recon[by : by + h, bx : bx + w] = np.clip(pred + qidx * q, 0, 255).astype(np.uint8)
            total_bits += (
                mv_bits(mv) + ref_idx_bits + int(_se_bits_array(qidx).sum())
            )
            mv_field.append(
                MVRecord(bx, by, ri, mv.x4, mv.y4, int(np.abs(pred - cur_blk).sum()))
            )
    return float(total_bits), recon, mv_field


def intra_frame_proxy(frame: np.ndarray, q: int) -> tuple[float, np.ndarray]:
    """Stand-in for the first frame: quantize raw samples, price with exp-Golomb."""
    if int(q) < 1:
        raise ConfigError(f"quantizer step must be >= 1, got {q}")
    q = int(q)
    qidx = np.rint(np.asarray(frame, dtype=np.float64) / q).astype(np.int64)
    bits = float(_se_bits_array(qidx).sum())
    recon = np.clip(qidx * q, 0, 255).astype(np.uint8)
    return bits, recon


def rd_sweep(sequence, net: GeneratorNet | None, cfg: SearchConfig, q_set) -> list[RDPoint]:
    """One RD point per quantizer step: (mean bits/frame, mean luma PSNR).

    Frame 0 is intra-coded; every later frame is inter-coded against the
    previous reconstruction, or against the generator output fed with that
    reconstruction when a network is supplied.
    """
    frames = [np.asarray(f) for f in sequence]
    if len(frames) < 2:
        raise ShapeMismatchError(f"rd_sweep needs at least 2 frames, got {len(frames)}")
    points = []
    for q in q_set:
        bits0, recon = intra_frame_proxy(frames[0], q)
        frame_bits = [bits0]
        frame_psnr = [psnr(recon, frames[0])]
        prev = recon
        for cur in frames[1:]:
            ref_list = [prev]
            if net is not None:
                ref_list = substitute_reference(ref_list, generate_reference(net, prev))
            bits, recon, _ = encode_frame_proxy(ref_list, cur, cfg, q)
            frame_bits.append(bits)
            frame_psnr.append(psnr(recon, cur))
            prev = recon
        points.append(RDPoint(float(np.mean(frame_bits)), float(np.mean(frame_psnr))))
    return points
