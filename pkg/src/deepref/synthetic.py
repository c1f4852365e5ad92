"""Analytic test sequences: band-limited sinusoid textures that can be
sampled at any real coordinate, so panned/zoomed frames are rendered exactly
(no resampling error accumulates)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SinusoidTexture:
    """Sum of random plane waves around a mid-gray level."""

    freqs: np.ndarray  # (n, 2): cycles per pixel along x and y
    phases: np.ndarray  # (n,)
    amps: np.ndarray  # (n,)
    level: float = 128.0

    @classmethod
    def random(
        cls,
        seed: int,
        n_waves: int = 24,
        min_freq: float = 0.015,
        max_freq: float = 0.08,
        contrast: float = 40.0,
    ) -> "SinusoidTexture":
        rng = np.random.default_rng(seed)
        angle = rng.uniform(0.0, 2.0 * math.pi, n_waves)
        mag = rng.uniform(min_freq, max_freq, n_waves)
        freqs = np.stack([mag * np.cos(angle), mag * np.sin(angle)], axis=1)
        phases = rng.uniform(0.0, 2.0 * math.pi, n_waves)
        amps = rng.uniform(0.5, 1.0, n_waves)
        amps *= contrast / math.sqrt(float(np.sum(amps**2)) / 2.0)
        return cls(freqs=freqs, phases=phases, amps=amps)

    def sample(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Texture value at arbitrary real coordinates."""
        acc = np.full(np.broadcast(xs, ys).shape, self.level, dtype=np.float64)
        for (fx, fy), phase, amp in zip(self.freqs, self.phases, self.amps):
            acc += amp * np.sin(2.0 * math.pi * (fx * xs + fy * ys) + phase)
        return acc

    def render(
        self,
        width: int,
        height: int,
        offset: tuple[float, float] = (0.0, 0.0),
        scale: float = 1.0,
    ) -> np.ndarray:
        """8-bit frame showing the texture at coordinates center + scale*(p-center) + offset."""
        ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
        cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
        sx = cx + scale * (xs - cx) + offset[0]
        sy = cy + scale * (ys - cy) + offset[1]
        return np.clip(np.rint(self.sample(sx, sy)), 0, 255).astype(np.uint8)


def pan_zoom_sequence(
    width: int,
    height: int,
    n_frames: int,
    velocity: tuple[float, float],
    zoom_rate: float = 0.0,
    seed: int = 0,
    texture: SinusoidTexture | None = None,
) -> list[np.ndarray]:
    """Frames where frame t shows the texture displaced by t*velocity and
    scaled by (1+zoom_rate)^t, i.e. frame_t(p) == frame_{t-1}(p + velocity)
    when zoom_rate is 0."""
    tex = texture if texture is not None else SinusoidTexture.random(seed)
    vx, vy = velocity
    return [
        tex.render(width, height, offset=(t * vx, t * vy), scale=(1.0 + zoom_rate) ** t)
        for t in range(n_frames)
    ]
