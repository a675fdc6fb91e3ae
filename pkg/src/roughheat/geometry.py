"""Discretization of the parabolic half-space.

The spatial domain is a periodic torus [0, L)^n sampled on a uniform grid;
the time axis is a dyadic ladder of heights t_m = T 2^{-m}.  Each ladder
rung m owns the half-open interval (t_m/2, t_m] and carries
``samples_per_rung`` time samples placed at the right endpoints of a
uniform subdivision, so the rung height t_m itself is always a sample.
The outer dt/t measure assigns every rung the exact mass ln 2, split
uniformly over its samples.

Whitney boxes W(x, t) = (t/2, t] x B(x, sqrt(t)) are balls of radius
sqrt(t) in the parabolic distance max(2 sqrt|t-s|, |x-y|) centered at the
3t/4 time level; dilating a box means dilating that metric ball.  Balls
wider than the half-period are clipped to the half-period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyBox, InvalidHeight, InvalidIndex, ShapeError

__all__ = [
    "GridSpec",
    "TimeLadder",
    "ParabolicBox",
    "SpaceTimeField",
    "whitney_box",
    "metric_box",
    "dilate_box",
    "parabolic_annulus",
    "parabolic_distance",
    "box_average",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the torus [0, L_dom)^dimension."""

    dimension: int
    points: int
    length: float = 1.0

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ShapeError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.points < 8 or self.points & (self.points - 1) != 0:
            raise ShapeError(f"points must be a power of two >= 8, got {self.points}")
        if not self.length > 0:
            raise ShapeError("domain length must be positive")

    @property
    def h(self) -> float:
        return self.length / self.points

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dimension

    @property
    def cell_volume(self) -> float:
        return self.h**self.dimension

    @property
    def volume(self) -> float:
        return self.length**self.dimension

    def axis(self) -> np.ndarray:
        return np.arange(self.points) * self.h

    def coords(self) -> tuple[np.ndarray, ...]:
        """Meshgrid of point coordinates, one array per axis."""
        axes = [self.axis() for _ in range(self.dimension)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def torus_delta(self, a: np.ndarray, b: float) -> np.ndarray:
        """Signed per-axis distance folded into [-L/2, L/2)."""
        d = (a - b) % self.length
        return np.where(d >= self.length / 2, d - self.length, d)

    def distance_from(self, x: Sequence[float] | float) -> np.ndarray:
        """Torus distance of every grid point to the point x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dimension,):
            raise ShapeError(f"point must have {self.dimension} coordinates")
        deltas = [self.torus_delta(c, x[d]) for d, c in enumerate(self.coords())]
        return np.sqrt(sum(d**2 for d in deltas))

    def wavenumbers(self) -> np.ndarray:
        """Radial modulus |xi| of the FFT frequencies, shape == grid shape."""
        k1 = 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.h)
        if self.dimension == 1:
            return np.abs(k1)
        kx, ky = np.meshgrid(k1, k1, indexing="ij")
        return np.sqrt(kx**2 + ky**2)


@dataclass(frozen=True)
class TimeLadder:
    """Dyadic ladder t_m = T 2^{-m}, m = 0..depth, with per-rung samples.

    Rung m covers (t_m/2, t_m].  Its samples sit at
    s_{m,k} = t_m/2 + (k+1) t_m/(2K), k = 0..K-1, so s_{m,K-1} = t_m and
    consecutive rungs tile (T 2^{-depth-1}, T] without gaps.
    """

    horizon: float
    depth: int
    samples_per_rung: int = 1

    def __post_init__(self):
        if not self.horizon > 0:
            raise InvalidHeight("horizon must be positive")
        if self.depth < 0 or self.samples_per_rung < 1:
            raise ShapeError("depth must be >= 0 and samples_per_rung >= 1")

    @property
    def heights(self) -> np.ndarray:
        """Rung heights t_m, strictly decreasing with ratio exactly 2."""
        return self.horizon * 0.5 ** np.arange(self.depth + 1)

    @property
    def samples(self) -> np.ndarray:
        """All time samples, shape (depth+1, samples_per_rung)."""
        t = self.heights[:, None]
        k = np.arange(1, self.samples_per_rung + 1)[None, :]
        return t / 2 + k * (t / 2) / self.samples_per_rung

    @property
    def sample_spacing(self) -> np.ndarray:
        """Length of the sub-interval owned by each sample (same shape)."""
        dt = (self.heights / 2) / self.samples_per_rung
        return np.broadcast_to(dt[:, None], self.samples.shape)

    @property
    def log_weights(self) -> np.ndarray:
        """dt/t mass per sample: ln 2 split uniformly inside each rung."""
        w = np.full(self.samples.shape, np.log(2.0) / self.samples_per_rung)
        return w

    def ascending(self) -> np.ndarray:
        """Flat sample times sorted increasing (deepest rung first)."""
        return self.samples[::-1].reshape(-1)

    def rung_for(self, t: float) -> int:
        """Index m with t in (t_m/2, t_m], for t inside the ladder span."""
        if not 0 < t <= self.horizon:
            raise InvalidHeight(f"t={t} outside (0, {self.horizon}]")
        m = int(np.floor(np.log2(self.horizon / t) + 1e-12))
        return min(m, self.depth)


@dataclass(frozen=True)
class ParabolicBox:
    """A ball in the parabolic metric, stored as interval x spatial ball.

    ``t_lo``/``t_hi`` bound the half-open time interval (t_lo, t_hi];
    ``radius`` is the spatial radius around ``center`` (before clipping to
    the half-period, which happens at sampling time).  A Whitney box of
    height t has t_lo = t/2, t_hi = t, radius = sqrt(t).
    """

    center: tuple[float, ...]
    t_lo: float
    t_hi: float
    radius: float

    def __post_init__(self):
        if not (self.t_hi > self.t_lo >= 0):
            raise InvalidHeight("need 0 <= t_lo < t_hi")
        if not self.radius > 0:
            raise InvalidHeight("radius must be positive")

    @property
    def height(self) -> float:
        return self.t_hi

    @property
    def time_center(self) -> float:
        return 0.5 * (self.t_lo + self.t_hi)


def whitney_box(grid: GridSpec, x: Sequence[float] | float, t: float,
                horizon: float | None = None) -> ParabolicBox:
    """Whitney box (t/2, t] x B(x, sqrt(t)), ball clipped to L/2."""
    if not t > 0 or (horizon is not None and t > horizon):
        raise InvalidHeight(f"height t={t} outside (0, {horizon}]")
    x = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
    radius = min(np.sqrt(t), grid.length / 2)
    return ParabolicBox(center=x, t_lo=t / 2, t_hi=t, radius=radius)


def metric_box(grid: GridSpec, x: Sequence[float] | float, time_center: float,
               radius: float) -> ParabolicBox:
    """Parabolic-distance ball of given radius centered at (time_center, x)."""
    x = tuple(np.atleast_1d(np.asarray(x, dtype=float)))
    half = radius**2 / 4
    return ParabolicBox(
        center=x,
        t_lo=max(time_center - half, 0.0),
        t_hi=time_center + half,
        radius=min(radius, grid.length / 2),
    )


def dilate_box(grid: GridSpec, box: ParabolicBox, lam: float) -> ParabolicBox:
    """Dilate a box as a parabolic metric ball about its own center.

    The time half-width scales by lam^2 and the spatial radius by lam,
    matching the parabolic ball of radius lam*r at the same center.
    """
    if not lam > 0:
        raise InvalidHeight("dilation factor must be positive")
    c = box.time_center
    half = 0.5 * (box.t_hi - box.t_lo) * lam**2
    return ParabolicBox(
        center=box.center,
        t_lo=max(c - half, 0.0),
        t_hi=c + half,
        radius=min(box.radius * lam, grid.length / 2),
    )


def parabolic_annulus(grid: GridSpec, x: Sequence[float] | float, t: float,
                      j: int) -> np.ndarray:
    """Boolean mask of the j-th dyadic shell around (x, t).

    j = 1 is the full ball of radius sqrt(4t); j >= 2 is the shell with
    radii sqrt(2^j t) <= d < sqrt(2^{j+1} t).
    """
    if t <= 0:
        raise InvalidHeight(f"t={t} must be positive")
    if j < 1:
        raise InvalidIndex(f"annulus index must be >= 1, got {j}")
    d = grid.distance_from(x)
    if j == 1:
        return d < np.sqrt(4 * t)
    return (d >= np.sqrt(2**j * t)) & (d < np.sqrt(2 ** (j + 1) * t))


def parabolic_distance(grid: GridSpec, p1: tuple, p2: tuple) -> float:
    """Dilated parabolic distance max(2 sqrt|t-s|, torus |x-y|)."""
    t1, x1 = p1[0], np.atleast_1d(np.asarray(p1[1], dtype=float))
    t2, x2 = p2[0], np.atleast_1d(np.asarray(p2[1], dtype=float))
    dx = np.sqrt(sum(grid.torus_delta(a, b) ** 2 for a, b in zip(x1, x2)))
    return float(max(2 * np.sqrt(abs(t1 - t2)), dx))


@dataclass
class SpaceTimeField:
    """Function samples on ladder times x grid points.

    ``values`` has shape (depth+1, samples_per_rung, *grid.shape); entry
    [m, k] is the slice at time ladder.samples[m, k].  Vector fields carry
    one leading component axis of length grid.dimension.
    """

    grid: GridSpec
    ladder: TimeLadder
    values: np.ndarray
    vector: bool = field(default=False)

    def __post_init__(self):
        expected = self.ladder.samples.shape + self.grid.shape
        if self.vector:
            expected = (self.grid.dimension,) + expected
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != expected:
            raise ShapeError(
                f"field shape {self.values.shape} != expected {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ShapeError("field contains non-finite entries")

    @classmethod
    def zeros(cls, grid: GridSpec, ladder: TimeLadder, vector: bool = False):
        shape = ladder.samples.shape + grid.shape
        if vector:
            shape = (grid.dimension,) + shape
        return cls(grid, ladder, np.zeros(shape), vector=vector)

    @classmethod
    def from_function(cls, grid: GridSpec, ladder: TimeLadder,
                      fn: Callable[..., np.ndarray]):
        """Sample fn(t, *coords) at every ladder time."""
        coords = grid.coords()
        times = ladder.samples
        out = np.empty(times.shape + grid.shape)
        for m in range(times.shape[0]):
            for k in range(times.shape[1]):
                out[m, k] = np.broadcast_to(
                    np.asarray(fn(times[m, k], *coords), dtype=float), grid.shape)
        return cls(grid, ladder, out)

    def copy(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.ladder, self.values.copy(),
                              vector=self.vector)

    def slab_max(self) -> float:
        return float(np.max(np.abs(self.values)))


def _box_sample_masks(field: SpaceTimeField, box: ParabolicBox):
    """Time mask over (rung, sample) and spatial mask over grid points."""
    s = field.ladder.samples
    tmask = (s > box.t_lo) & (s <= box.t_hi)
    d = field.grid.distance_from(box.center)
    xmask = d < box.radius
    return tmask, xmask


def box_average(field: SpaceTimeField, box: ParabolicBox, q: float,
                time_weight_power: float = 0.0) -> float:
    """q-average of |s^gamma u| over the box, midpoint quadrature.

    Returns ( avg over box of |s^gamma u(s,y)|^q )^{1/q}; q = inf gives the
    max over samples.  Sample membership is by cell center (space) and by
    sample time in (t_lo, t_hi]; each time sample carries its sub-interval
    length as quadrature weight, so boxes spanning several rungs mix
    resolutions correctly.
    """
    if field.vector:
        raise ShapeError("box_average expects a scalar field")
    tmask, xmask = _box_sample_masks(field, box)
    if not tmask.any() or not xmask.any():
        raise EmptyBox(f"no samples in box {box}")
    s = field.ladder.samples[tmask]
    w = field.ladder.sample_spacing[tmask]
    vals = field.values[tmask][:, xmask]
    if time_weight_power != 0.0:
        vals = s[:, None] ** time_weight_power * vals
    if np.isinf(q):
        return float(np.max(np.abs(vals)))
    num = np.sum(w[:, None] * np.abs(vals) ** q)
    den = np.sum(w) * np.count_nonzero(xmask)
    return float((num / den) ** (1.0 / q))
