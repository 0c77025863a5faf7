"""Deterministic synthetic fixtures: test images, noise, and frame pairs
with known ground truth.

Noise comes from a small portable generator rather than numpy's, so the
exact same fixture bytes can be reproduced from the seed in any language:
SplitMix64 over the seed gives a uint64 stream; each draw maps to a
uniform via (x >> 11) / 2^53; Gaussians come from the Box-Muller
transform on consecutive uniforms (first of the pair offset to (0,1] so
the log is finite). All arithmetic is exactly specified, so outputs are
bit-identical across platforms.
"""

from __future__ import annotations

import math

import numpy as np

from .flow import FramePair
from .grid import VectorField

_MASK64 = (1 << 64) - 1


def splitmix64(seed: int):
    """Infinite uint64 stream from the SplitMix64 recurrence."""
    state = seed & _MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield z ^ (z >> 31)


def uniforms(seed: int, count: int) -> np.ndarray:
    """First ``count`` uniforms in [0,1) from the seeded stream."""
    gen = splitmix64(seed)
    return np.array([(next(gen) >> 11) * 2.0**-53 for _ in range(count)])


def gaussian_field(shape, seed: int) -> np.ndarray:
    """Standard-normal field via Box-Muller on the SplitMix64 stream."""
    count = int(np.prod(shape))
    gen = splitmix64(seed)
    out = np.empty(count + (count & 1), dtype=np.float64)
    for k in range(0, len(out), 2):
        u1 = ((next(gen) >> 11) + 1) * 2.0**-53
        u2 = (next(gen) >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(u1))
        out[k] = r * math.cos(2.0 * math.pi * u2)
        out[k + 1] = r * math.sin(2.0 * math.pi * u2)
    return out[:count].reshape(shape)


def make_step32(seed: int = 0, sigma: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """32x32 vertical step: left 16 columns 0.25, right 16 columns 0.75.

    Returns (clean, noisy) with additive Gaussian noise of the given sigma.
    """
    clean = np.full((32, 32), 0.25)
    clean[:, 16:] = 0.75
    noisy = clean + sigma * gaussian_field(clean.shape, seed)
    return clean, noisy


def make_piecewise64(seed: int = 0, sigma: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """64x64 piecewise-constant cartoon: background 0.2 with three
    axis-aligned rectangles at 0.7, 0.45 and 0.9."""
    clean = np.full((64, 64), 0.2)
    clean[8:36, 6:30] = 0.7
    clean[30:58, 34:58] = 0.45
    clean[12:26, 40:54] = 0.9
    noisy = clean + sigma * gaussian_field(clean.shape, seed)
    return clean, noisy


def _ramp_texture(seed: int):
    """Smooth band-limited profile with seeded phases, defined on all of
    the plane so shifted evaluations stay exact."""
    phi1, phi2 = (2.0 * math.pi * u for u in uniforms(seed, 2))

    def profile(x, y):
        return (
            0.5
            + 0.15 * np.sin(2.0 * np.pi * x / 16.0 + phi1)
            + 0.1 * np.sin(2.0 * np.pi * (x + y) / 16.0 + phi2)
        )

    return profile


def make_ramp_shift(seed: int = 0, size: int = 32) -> tuple[FramePair, VectorField]:
    """Smoothly textured frame pair translated by exactly (1, 0).

    Frame 2 is the analytic profile evaluated at x-1, so the true flow is
    u=1, v=0 everywhere and the displaced-frame difference vanishes away
    from the right border (where sampling clamps).
    """
    profile = _ramp_texture(seed)
    jj, ii = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    f1 = profile(ii, jj)
    f2 = profile(ii - 1, jj)
    gt = VectorField(np.ones((size, size)), np.zeros((size, size)))
    return FramePair(f1, f2), gt


def make_split_motion(seed: int = 0, size: int = 32) -> tuple[FramePair, VectorField]:
    """Textured scene whose left half translates by (1, 0) while the right
    half stays still; the motion boundary sits mid-image at a place with
    no matching image edge, so image-driven smoothing blurs across it."""
    phases = [2.0 * math.pi * u for u in uniforms(seed, 3)]

    def texture(x, y):
        return (
            0.5
            + 0.15 * np.sin(2.0 * np.pi * x / 8.0 + phases[0])
            + 0.15 * np.sin(2.0 * np.pi * y / 8.0 + phases[1])
            + 0.1 * np.sin(2.0 * np.pi * (x + y) / 16.0 + phases[2])
        )

    half = size // 2
    jj, ii = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    f1 = texture(ii, jj)
    f2 = np.where(ii < half, texture(ii - 1, jj), f1)
    u = np.where(ii < half, 1.0, 0.0)
    gt = VectorField(u, np.zeros((size, size)))
    return FramePair(f1, f2), gt


FIXTURES = ("step32", "piecewise64", "ramp-shift", "split-motion")
