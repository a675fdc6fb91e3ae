"""Weighted space-time norms and Littlewood-Paley machinery.

Weighted L^p ladder norms split the dt/t mass ln 2 of each dyadic rung
uniformly over the rung's samples; Z-norms take Whitney-box q-averages at
the rung heights and integrate them in L^p(dx dt/t) on the same ladder.
With one sample per rung the two discretizations coincide literally; for
any per-rung sample count the p = q case collapses to the weighted L^p
norm exactly (discrete Fubini), which the tests pin at 1e-10.

The homogeneous Besov norm uses a smooth dyadic partition chi normalized
pointwise on the resolvable frequency band, so the partition of unity is
exact up to rounding.  The mean (frequency zero) is always annihilated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.ndimage

from .errors import EmptyBox, IndexOutOfRange, InvalidParams, ShapeError
from .geometry import (GridSpec, SpaceTimeField, TimeLadder, box_average,
                       whitney_box)

__all__ = [
    "ZParams",
    "BesovParams",
    "LPLadder",
    "weighted_lp_norm",
    "z_norm",
    "lp_project",
    "besov_norm",
    "vanishing_profile",
    "embedding_probe",
    "change_of_angle_probe",
    "dilate_data",
]


@dataclass(frozen=True)
class ZParams:
    p: float
    q: float
    beta: float = 0.0
    horizon: float = np.inf

    def __post_init__(self):
        if not (self.p > 1 and self.q > 1):
            raise InvalidParams(f"need p, q > 1, got ({self.p}, {self.q})")
        if not self.horizon > 0:
            raise InvalidParams("horizon must be positive")


@dataclass(frozen=True)
class BesovParams:
    alpha: float
    p: float

    def __post_init__(self):
        if not self.alpha < 0:
            raise InvalidParams(f"need alpha < 0, got {self.alpha}")
        if not self.p > 1:
            raise InvalidParams(f"need p > 1, got {self.p}")


# ---------------------------------------------------------------------------
# weighted L^p ladder norms


def _rung_mask(ladder: TimeLadder, horizon: float) -> np.ndarray:
    return ladder.heights <= horizon * (1 + 1e-12)


def weighted_lp_norm(field: SpaceTimeField, p: float, beta: float = 0.0,
                     horizon: float = np.inf) -> float:
    """Ladder norm of t^{-beta} u in L^p(dx dt/t) up to the horizon."""
    if not p > 1:
        raise InvalidParams(f"need p > 1, got {p}")
    lad, grid = field.ladder, field.grid
    keep = _rung_mask(lad, horizon)
    s = lad.samples[keep]
    vals = field.values[keep]
    s_bc = s.reshape(s.shape + (1,) * grid.dimension)
    weighted = s_bc ** (-beta) * vals
    if np.isinf(p):
        return float(np.max(np.abs(weighted))) if weighted.size else 0.0
    w = lad.log_weights[keep]
    per_sample = np.sum(np.abs(weighted) ** p, axis=tuple(range(2, weighted.ndim)))
    total = np.sum(w * per_sample) * grid.cell_volume
    return float(total ** (1.0 / p))


# ---------------------------------------------------------------------------
# Whitney averages vectorized over box centers


def _ball_footprint(grid: GridSpec, radius: float) -> np.ndarray:
    """Boolean mask of grid offsets with torus distance < radius."""
    d = grid.distance_from([0.0] * grid.dimension)
    return d < min(radius, grid.length / 2)


def whitney_averages(field: SpaceTimeField, m: int, q: float,
                     beta: float = 0.0, lam: float = 1.0,
                     normalized: bool = True) -> np.ndarray:
    """q-average of |s^{-beta} u| over W(x, t_m) for every center x at once.

    With ``lam`` > 1 the spatial ball is dilated to radius lam sqrt(t_m)
    while the time window stays (t_m/2, t_m], matching the change-of-angle
    functional; ``normalized=False`` replaces the ball average by
    t^{-n/2} * integral, again as in that functional.
    """
    grid, lad = field.grid, field.ladder
    t = lad.heights[m]
    s = lad.samples[m]
    s_bc = s.reshape(s.shape + (1,) * grid.dimension)
    vals = np.abs(s_bc ** (-beta) * field.values[m])
    foot = _ball_footprint(grid, lam * np.sqrt(t))
    count = int(np.count_nonzero(foot))
    if count == 0:
        raise EmptyBox(f"ball of radius {lam * np.sqrt(t)} captures no points")
    if np.isinf(q):
        # ess-sup over the box; the lam-dilated functional has the same
        # q -> inf limit, so no volume factor in either mode.
        time_max = np.max(vals, axis=0)
        return scipy.ndimage.maximum_filter(
            time_max, footprint=np.fft.fftshift(foot), mode="wrap")
    time_avg = np.mean(vals**q, axis=0)
    # foot is indexed by offset from the origin, which is what circular
    # convolution wants; no shift.
    kernel = foot.astype(float)
    conv = np.real(np.fft.ifftn(np.fft.fftn(time_avg) * np.fft.fftn(kernel)))
    conv = np.maximum(conv, 0.0)
    if normalized:
        return (conv / count) ** (1.0 / q)
    return (conv * grid.cell_volume / t ** (grid.dimension / 2)) ** (1.0 / q)


def z_norm(field: SpaceTimeField, params: ZParams) -> float:
    """Weighted Z-norm: L^p(dx dt/t) of Whitney q-averages of t^{-beta} u."""
    p, q = params.p, params.q
    grid, lad = field.grid, field.ladder
    keep = _rung_mask(lad, params.horizon)
    total = 0.0
    sup = 0.0
    for m in np.nonzero(keep)[0]:
        av = whitney_averages(field, int(m), q, beta=params.beta)
        if np.isinf(p):
            sup = max(sup, float(np.max(av)))
        else:
            total += np.log(2.0) * grid.cell_volume * float(np.sum(av**p))
    if np.isinf(p):
        return sup
    return float(total ** (1.0 / p))


def vanishing_profile(field: SpaceTimeField, q: float, beta: float,
                      taus: Sequence[float]) -> list[tuple[float, float]]:
    """tau -> Z^{inf,q}_beta norm restricted to heights <= tau.

    Decaying profiles diagnose membership in the vanishing subclass; the
    profile is nondecreasing in tau by construction.
    """
    out = []
    for tau in taus:
        if tau > field.ladder.horizon * (1 + 1e-12):
            raise InvalidParams(f"tau={tau} beyond ladder horizon")
        out.append((float(tau),
                    z_norm(field, ZParams(np.inf, q, beta, horizon=tau))))
    return out


# ---------------------------------------------------------------------------
# Littlewood-Paley ladder and Besov norms


def _smooth_bump(r: np.ndarray) -> np.ndarray:
    """C^inf bump supported on (1/2, 4)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = (r > 0.5) & (r < 4.0)
    ri = r[inside]
    out[inside] = np.exp(-1.0 / ((ri - 0.5) * (4.0 - ri)))
    return out


@dataclass(frozen=True)
class LPLadder:
    """Dyadic frequency ladder for one grid.

    ``j_range`` covers every octave whose annulus [2^{j-1}, 2^{j+2}]
    intersects the resolvable band of the grid, so the normalized profile
    sums to one on every nonzero frequency.
    """

    grid: GridSpec
    j_min: int
    j_max: int

    @classmethod
    def for_grid(cls, grid: GridSpec) -> "LPLadder":
        xi = grid.wavenumbers()
        ximin = 2 * np.pi / grid.length
        ximax = float(np.max(xi))
        j_min = int(np.floor(np.log2(ximin))) - 2
        j_max = int(np.ceil(np.log2(ximax))) + 1
        return cls(grid=grid, j_min=j_min, j_max=j_max)

    @property
    def indices(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def chi(self, j: int) -> np.ndarray:
        """Multiplier chi(2^{-j} |xi|) on the grid frequencies."""
        xi = self.grid.wavenumbers()
        num = _smooth_bump(xi / 2.0**j)
        den = np.zeros_like(xi)
        for m in self.indices:
            den += _smooth_bump(xi / 2.0**m)
        out = np.zeros_like(xi)
        nz = den > 0
        out[nz] = num[nz] / den[nz]
        out[xi == 0] = 0.0
        return out


def lp_project(u0: np.ndarray, j: int, ladder: LPLadder) -> np.ndarray:
    """j-th dyadic frequency block of u0; the mean is always removed."""
    if j not in ladder.indices:
        raise IndexOutOfRange(
            f"j={j} outside resolvable range [{ladder.j_min}, {ladder.j_max}]")
    grid = ladder.grid
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != grid.shape:
        raise ShapeError(f"data shape {u0.shape} != grid {grid.shape}")
    spec = np.fft.fftn(u0) * ladder.chi(j)
    return np.real(np.fft.ifftn(spec))


def besov_norm(u0: np.ndarray, params: BesovParams,
               ladder: LPLadder) -> float:
    """Homogeneous Besov norm via weighted dyadic blocks.

    ( sum_j 2^{j alpha p} |block_j|_p^p )^{1/p}; p = inf gives
    sup_j 2^{j alpha} |block_j|_inf.
    """
    grid = ladder.grid
    p, alpha = params.p, params.alpha
    if np.isinf(p):
        return max(
            (2.0 ** (j * alpha) * float(np.max(np.abs(lp_project(u0, j, ladder))))
             for j in ladder.indices),
            default=0.0)
    total = 0.0
    for j in ladder.indices:
        block = lp_project(u0, j, ladder)
        total += 2.0 ** (j * alpha * p) * float(
            np.sum(np.abs(block) ** p)) * grid.cell_volume
    return float(total ** (1.0 / p))


def dilate_data(u0: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, GridSpec]:
    """Dyadic dilation u0 -> u0(2 .), returned on the half-length grid.

    The point i of the half-length grid sits at x_i/2, where u0(2 .)
    takes the value u0(x_i): the sample array is unchanged and only the
    grid metadata halves, which shifts every frequency up one octave and
    makes the dilation an exact re-indexing of the dyadic ladder.
    """
    u0 = np.asarray(u0, dtype=float)
    return u0.copy(), GridSpec(grid.dimension, grid.points, grid.length / 2)


# ---------------------------------------------------------------------------
# empirical probes


def embedding_probe(make_field: Callable[[int], SpaceTimeField], p0: float,
                    beta0: float, p1: float, q: float,
                    ensemble: int = 20) -> float:
    """Max ratio |u|_{Z^{p1,q}_{beta1}} / |u|_{Z^{p0,q}_{beta0}}.

    beta1 follows from the trace relation 2 beta0 - n/p0 = 2 beta1 - n/p1;
    the probe draws ``ensemble`` fields from ``make_field(seed)``.
    """
    if not p0 < p1:
        raise InvalidParams(f"need p0 < p1, got ({p0}, {p1})")
    probe0 = make_field(0)
    n = probe0.grid.dimension
    beta1 = beta0 - (n / 2) * (_inv(p0) - _inv(p1))
    worst = 0.0
    for seed in range(ensemble):
        u = make_field(seed)
        hi = z_norm(u, ZParams(p1, q, beta1))
        lo = z_norm(u, ZParams(p0, q, beta0))
        if lo > 0:
            worst = max(worst, hi / lo)
    return worst


def trace_conjugate_beta(n: int, p0: float, beta0: float, p1: float) -> float:
    """beta1 with 2 beta0 - n/p0 = 2 beta1 - n/p1."""
    return beta0 - (n / 2) * (_inv(p0) - _inv(p1))


def change_of_angle_probe(field: SpaceTimeField, p: float, q: float,
                          beta: float, lams: Sequence[float]) -> dict:
    """Growth of the dilated-ball functional against the predicted slope.

    For each lam the functional replaces the Whitney ball average by
    t^{-n/2} times the integral over the lam-dilated ball; the log-log
    slope over ``lams`` is compared with n / min(p, q).  Rungs whose
    dilated ball would exceed the half-period are skipped.
    """
    if min(lams) < 1:
        raise InvalidParams("dilation factors must be >= 1")
    grid, lad = field.grid, field.ladder
    lam_max = max(lams)
    values = []
    usable = [m for m, t in enumerate(lad.heights)
              if lam_max * np.sqrt(t) <= grid.length / 2]
    if not usable:
        raise InvalidParams("no rung supports the largest dilation")
    for lam in lams:
        total, sup = 0.0, 0.0
        for m in usable:
            av = whitney_averages(field, m, q, beta=beta, lam=lam,
                                  normalized=False)
            if np.isinf(p):
                sup = max(sup, float(np.max(av)))
            else:
                total += np.log(2.0) * grid.cell_volume * float(np.sum(av**p))
        values.append(sup if np.isinf(p) else total ** (1.0 / p))
    lams = np.asarray(lams, dtype=float)
    values = np.asarray(values)
    if len(lams) > 1:
        slope = float(np.polyfit(np.log(lams), np.log(values), 1)[0])
    else:
        slope = 0.0
    tau = min(p, q)
    return {
        "lams": lams.tolist(),
        "values": values.tolist(),
        "slope": slope,
        "predicted": grid.dimension / tau,
        "ratios": (values / values[0]).tolist(),
    }


def _inv(p: float) -> float:
    return 0.0 if np.isinf(p) else 1.0 / p
