"""Synthetic data generators used by probes, scenarios and tests.

Band-limited spectra stand in for rough initial data: mean-zero
combinations of Fourier modes at least two octaves inside Nyquist and two
octaves above the domain scale, so dyadic manipulations (dilation,
frequency blocks) act exactly.  Space-time ensembles combine Whitney-box
bumps with band-limited noise.
"""

from __future__ import annotations

import numpy as np

from .geometry import GridSpec, SpaceTimeField, TimeLadder

__all__ = [
    "band_limited_datum",
    "band_limits",
    "whitney_bump_field",
    "random_field",
    "random_vector_field",
]


def band_limits(grid: GridSpec) -> tuple[int, int]:
    """Admissible integer mode band [k_min, k_max] per axis."""
    return 4, max(grid.points // 8, 5)


def band_limited_datum(grid: GridSpec, seed: int = 0,
                       modes: int = 6, decay: float = 0.0) -> np.ndarray:
    """Mean-zero random trigonometric datum inside the admissible band.

    ``decay`` tilts amplitudes like k^{-decay} to mimic smoother or rougher
    spectra.
    """
    rng = np.random.default_rng(seed)
    lo, hi = band_limits(grid)
    out = np.zeros(grid.shape)
    coords = grid.coords()
    for _ in range(modes):
        k = np.zeros(grid.dimension, dtype=int)
        while not np.any(k):
            k = rng.integers(lo, hi + 1, size=grid.dimension)
            k *= rng.choice([-1, 1], size=grid.dimension)
        amp = rng.normal() * float(np.linalg.norm(k)) ** (-decay)
        phase = rng.uniform(0, 2 * np.pi)
        arg = sum(2 * np.pi * k[d] / grid.length * coords[d]
                  for d in range(grid.dimension))
        out += amp * np.cos(arg + phase)
    return out


def whitney_bump_field(grid: GridSpec, ladder: TimeLadder,
                       seed: int = 0) -> SpaceTimeField:
    """A smooth bump supported in one randomly chosen Whitney box."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, ladder.depth))
    t = ladder.heights[m]
    xc = rng.uniform(0, grid.length, size=grid.dimension)
    radius = min(np.sqrt(t), grid.length / 2)
    d = grid.distance_from(xc)
    profile = np.clip(1.0 - (d / radius) ** 2, 0.0, None) ** 2
    times = ladder.samples
    envelope = np.clip((times - t / 2) * (t - times), 0.0, None)
    width = (t / 4) ** 2
    envelope = envelope / width
    vals = envelope.reshape(times.shape + (1,) * grid.dimension) * profile
    return SpaceTimeField(grid, ladder, vals)


def random_field(grid: GridSpec, ladder: TimeLadder, seed: int = 0,
                 kind: str = "mixed") -> SpaceTimeField:
    """Whitney bumps plus band-limited noise, the probe input class."""
    rng = np.random.default_rng(seed)
    if kind == "bump":
        return whitney_bump_field(grid, ladder, seed)
    noise_datum = band_limited_datum(grid, seed=seed + 1, modes=4)
    times = ladder.samples
    tmod = 1.0 + 0.5 * np.sin(np.log(times) * rng.uniform(0.5, 2.0))
    noise = tmod.reshape(times.shape + (1,) * grid.dimension) * noise_datum
    if kind == "noise":
        return SpaceTimeField(grid, ladder, noise)
    bump = whitney_bump_field(grid, ladder, seed)
    return SpaceTimeField(grid, ladder,
                          bump.values + 0.3 * noise)


def random_vector_field(grid: GridSpec, ladder: TimeLadder,
                        seed: int = 0) -> SpaceTimeField:
    comps = [random_field(grid, ladder, seed=seed + 17 * d).values
             for d in range(grid.dimension)]
    return SpaceTimeField(grid, ladder, np.stack(comps, axis=0), vector=True)
