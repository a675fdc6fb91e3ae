"""PDE-level verification: weak residuals, traces, reverse Holder.

The weak-form residual pairs sampled solutions with smooth separable
space-time bumps whose derivatives are known analytically.  Spatial
pairing uses face-centered gradients (forward differences for the
solution, analytic gradients at face midpoints for the test function), so
the flux term is consistent with the face-flux stencil to O(h^2) even for
jump coefficients.  Time integration is composite Simpson per dyadic rung,
which is exact enough that the time-interpolation of the source dominates
the budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .coefficients import CoefficientField
from .errors import (InvalidBox, InvalidParams, InvalidTestFunction,
                     ShapeError)
from .exponents import rat, sobolev_lower, sobolev_upper
from .geometry import (GridSpec, ParabolicBox, SpaceTimeField, TimeLadder,
                       box_average, dilate_box, whitney_box)

__all__ = [
    "TestFunction",
    "TestFunctionBank",
    "weak_residual",
    "initial_trace_error",
    "rh_check",
    "rh_improved_check",
    "RHReport",
]


_BUMP_POWER = 6  # C^5 contact at the support edge; keeps Simpson happy


def _bump(y: np.ndarray) -> np.ndarray:
    """(1 - y^2)^6 on |y| < 1, zero outside; peak value 1.

    Polynomially flat edges keep the high derivatives moderate, so the
    per-rung Simpson quadrature of residual integrands converges at its
    nominal fourth order with small constants (the classical exponential
    mollifier has edge derivatives large enough to dominate the residual
    budget at practical sample counts).
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = (1.0 - yi**2) ** _BUMP_POWER
    return out


def _bump_derivative(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    inside = np.abs(y) < 1.0
    yi = y[inside]
    out[inside] = (-2.0 * _BUMP_POWER * yi
                   * (1.0 - yi**2) ** (_BUMP_POWER - 1))
    return out


@dataclass(frozen=True)
class TestFunction:
    """Separable mollifier g(t) prod_d b((x_d - c_d)/w) on the torus."""

    __test__ = False  # not a pytest collection target

    grid: GridSpec
    t_center: float
    t_width: float
    x_center: tuple[float, ...]
    x_width: float

    def time_profile(self, t: np.ndarray) -> np.ndarray:
        return _bump((np.asarray(t, dtype=float) - self.t_center) / self.t_width)

    def time_derivative(self, t: np.ndarray) -> np.ndarray:
        return _bump_derivative(
            (np.asarray(t, dtype=float) - self.t_center) / self.t_width
        ) / self.t_width

    def _factors(self, coords: Sequence[np.ndarray]) -> list[np.ndarray]:
        return [
            _bump(self.grid.torus_delta(c, self.x_center[d]) / self.x_width)
            for d, c in enumerate(coords)
        ]

    def space_profile(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        out = np.ones_like(np.asarray(coords[0], dtype=float))
        for f in self._factors(coords):
            out = out * f
        return out

    def space_gradient(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        factors = self._factors(coords)
        grads = []
        for d, c in enumerate(coords):
            g = _bump_derivative(
                self.grid.torus_delta(c, self.x_center[d]) / self.x_width
            ) / self.x_width
            for e, f in enumerate(factors):
                if e != d:
                    g = g * f
            grads.append(g)
        return np.stack(grads, axis=0)


@dataclass
class TestFunctionBank:
    """Finitely many bumps with supports strictly inside the sampled slab."""

    __test__ = False  # not a pytest collection target

    grid: GridSpec
    ladder: TimeLadder
    functions: list[TestFunction]

    @classmethod
    def random(cls, grid: GridSpec, ladder: TimeLadder, count: int = 20,
               seed: int = 0) -> "TestFunctionBank":
        rng = np.random.default_rng(seed)
        T = ladder.horizon
        floor = ladder.heights[-1]  # deepest rung height
        fns = []
        for _ in range(count):
            tc = rng.uniform(T / 6, 2 * T / 3)
            # width proportional to height: keeps the number of ladder
            # samples across the bump independent of where it sits
            tw = min(tc * rng.uniform(0.35, 0.6),
                     0.9 * min(tc - floor, T - tc))
            xc = tuple(rng.uniform(0, grid.length, size=grid.dimension))
            xw = rng.uniform(grid.length / 8, grid.length / 3)
            fns.append(TestFunction(grid, tc, tw, xc, xw))
        bank = cls(grid, ladder, fns)
        bank.validate()
        return bank

    def validate(self) -> None:
        T = self.ladder.horizon
        floor = self.ladder.heights[-1] / 2
        for fn in self.functions:
            if fn.t_center - fn.t_width <= floor or fn.t_center + fn.t_width >= T:
                raise InvalidTestFunction(
                    f"time support [{fn.t_center - fn.t_width}, "
                    f"{fn.t_center + fn.t_width}] escapes ({floor}, {T})")
            if not fn.x_width <= self.grid.length / 2:
                raise InvalidTestFunction("spatial width beyond half period")

    def derivative_consistency(self) -> float:
        """Max gap between analytic and numerical derivative samples."""
        worst = 0.0
        ts = np.linspace(self.ladder.heights[-1], self.ladder.horizon, 201)
        eps = 1e-6 * self.ladder.horizon
        for fn in self.functions:
            num = (fn.time_profile(ts + eps) - fn.time_profile(ts - eps)) / (2 * eps)
            worst = max(worst, float(np.max(np.abs(num - fn.time_derivative(ts)))))
        return worst


# ---------------------------------------------------------------------------
# ladder time quadrature


def ladder_quadrature(ladder: TimeLadder,
                      samples: np.ndarray) -> float:
    """Integral over the sampled span of a scalar time series.

    ``samples`` has the ladder sample shape (rungs, K).  Within each rung
    the K right-endpoint samples plus the rung's left boundary (the top
    sample of the next-deeper rung) form K+1 uniform nodes; composite
    Simpson is used for even K, trapezoid otherwise.  The deepest rung has
    no left neighbor and falls back to a right-endpoint rectangle rule on
    its (negligible) sliver.
    """
    lad = ladder
    vals = np.asarray(samples, dtype=float)
    if vals.shape != lad.samples.shape:
        raise ShapeError("sample series does not match the ladder")
    K = lad.samples_per_rung
    total = 0.0
    for m in range(lad.depth + 1):
        dt = (lad.heights[m] / 2) / K
        if m < lad.depth:
            nodes = np.concatenate(([vals[m + 1, -1]], vals[m]))
            total += _uniform_integral(nodes, dt)
        else:
            total += float(np.sum(vals[m])) * dt
    return total


def _uniform_integral(nodes: np.ndarray, dt: float) -> float:
    n = nodes.size - 1
    if n % 2 == 0 and n >= 2:
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return float(np.sum(w * nodes) * dt / 3.0)
    return float(np.trapz(nodes, dx=dt))


# ---------------------------------------------------------------------------
# weak residual


def weak_residual(u: SpaceTimeField, coeff: CoefficientField,
                  f: SpaceTimeField | None, F: SpaceTimeField | None,
                  bank: TestFunctionBank, normalized: bool = True) -> float:
    """Max normalized defect of the weak identity over the bank.

    For each test function phi the residual is

        int ( -u dphi/dt + a grad u . grad phi - f phi + F . grad phi ) ,

    i.e. the weak form of du/dt - div(a grad u) = f + div F; it is
    normalized by the total absolute mass of the four terms.

    The time derivative of phi is analytic; the spatial gradients are the
    face/centered differences of the exactly sampled phi, which are the
    exact discrete duals of the flux stencil and of the divergence.  That
    keeps differentiation error of the test function out of the residual
    budget even across coefficient jumps, where the analytic gradient of
    phi paired with the kinked discrete solution would contribute O(h^2)
    terms that do not vanish with the time resolution.
    """
    grid, lad = u.grid, u.ladder
    if coeff.grid != grid:
        raise ShapeError("coefficient grid mismatch")
    for g in (f, F):
        if g is not None and (g.grid != grid or g.ladder != lad):
            raise ShapeError("source fields must share grid and ladder")
    bank.validate()
    coords = grid.coords()
    hn = grid.cell_volume
    times = lad.samples
    worst = 0.0
    for fn in bank.functions:
        phi = fn.space_profile(coords)
        grad_phi_faces = [(np.roll(phi, -1, axis=d) - phi) / grid.h
                          for d in range(grid.dimension)]
        grad_phi_cells = np.stack(
            [(np.roll(phi, -1, axis=d) - np.roll(phi, 1, axis=d))
             / (2 * grid.h) for d in range(grid.dimension)])
        g_t = fn.time_profile(times)
        g_dt = fn.time_derivative(times)

        series = np.zeros(times.shape)
        mass = np.zeros(times.shape)
        for m in range(times.shape[0]):
            for k in range(times.shape[1]):
                if g_t[m, k] == 0.0 and g_dt[m, k] == 0.0:
                    continue
                uk = u.values[m, k]
                term_t = -np.sum(uk * phi) * g_dt[m, k] * hn
                flux = 0.0
                for d in range(grid.dimension):
                    du = (np.roll(uk, -1, axis=d) - uk) / grid.h
                    flux += np.sum(coeff.faces[d] * du * grad_phi_faces[d])
                term_x = flux * g_t[m, k] * hn
                term_f = 0.0
                if f is not None:
                    term_f = np.sum(f.values[m, k] * phi) * g_t[m, k] * hn
                term_F = 0.0
                if F is not None:
                    term_F = -np.sum(F.values[:, m, k]
                                     * grad_phi_cells) * g_t[m, k] * hn
                series[m, k] = term_t + term_x - term_f - term_F
                mass[m, k] = (abs(term_t) + abs(term_x) + abs(term_f)
                              + abs(term_F))
        resid = abs(ladder_quadrature(lad, series))
        if normalized:
            scale = max(ladder_quadrature(lad, mass), 1e-300)
            resid = resid / scale
        worst = max(worst, resid)
    return worst


def trace_decay_rate(points: Sequence[tuple[float, float]]) -> float:
    """Extrapolated decay order of trace pairings as t -> 0.

    Local dyadic slopes approach the asymptotic rate linearly in t, so a
    Richardson step on the two deepest slopes removes the leading
    curvature bias of a plain log-log fit.
    """
    pts = sorted(points)
    satisfying = [(t, e) for t, e in pts if e > 0]
    if len(satisfying) < 3:
        raise InvalidParams("need at least three positive pairings")
    ts = np.array([t for t, _ in satisfying])
    es = np.array([e for _, e in satisfying])
    slopes = np.log(es[1:] / es[:-1]) / np.log(ts[1:] / ts[:-1])
    return float(2 * slopes[0] - slopes[1])


def initial_trace_error(u: SpaceTimeField, u0: np.ndarray,
                        bank: TestFunctionBank,
                        ts: Sequence[float]) -> list[tuple[float, float]]:
    """Pairings <u(t) - u0, phi> against the bank's spatial profiles.

    Returns (t, max over bank of |pairing| / |phi|_1) for each requested
    time; decay as t -> 0 certifies attainment of the initial datum.
    """
    grid, lad = u.grid, u.ladder
    coords = grid.coords()
    hn = grid.cell_volume
    out = []
    for t in ts:
        m = lad.rung_for(t)
        k = int(np.argmin(np.abs(lad.samples[m] - t)))
        slice_u = u.values[m, k]
        worst = 0.0
        for fn in bank.functions:
            phi = fn.space_profile(coords)
            l1 = float(np.sum(np.abs(phi)) * hn)
            if l1 == 0:
                continue
            pairing = float(np.sum((slice_u - u0) * phi) * hn)
            worst = max(worst, abs(pairing) / l1)
        out.append((float(lad.samples[m][k]), worst))
    return out


# ---------------------------------------------------------------------------
# reverse Holder checks


@dataclass
class RHReport:
    """Per-box sides of a reverse Holder inequality and the worst ratio."""

    rows: list[dict]
    constant: float
    theta: float | None = None

    def __post_init__(self):
        for row in self.rows:
            if min(row["lhs"], row["rhs"]) < 0:
                raise InvalidParams("averages must be nonnegative")


def _check_containment(grid: GridSpec, ladder: TimeLadder,
                       box: ParabolicBox) -> None:
    if box.t_hi > ladder.horizon * (1 + 1e-12) or box.t_lo < 0:
        raise InvalidBox(
            f"box time interval ({box.t_lo}, {box.t_hi}] escapes the slab")


def rh_check(u: SpaceTimeField, rho: float, boxes: Sequence[ParabolicBox],
             lam: float = 2.0) -> RHReport:
    """Plain reverse Holder inequality on halves of Whitney boxes.

    For each box W the inner ball B' is the half-radius concentric
    parabolic ball, so 2B' fills W exactly and stays inside the lam-dilate;
    both sides weight the solution by s^{1/rho}.  The high exponent is the
    upper Sobolev conjugate of 2; the right side combines a plain average
    with the (1+rho)-powered low-exponent average.
    """
    n = u.grid.dimension
    two_up = float(rat(sobolev_upper(2, n)))
    two_lo = float(rat(sobolev_lower(2, n)))
    q_low = two_lo * (1 + rho)
    wt = 1.0 / rho
    rows = []
    for i, box in enumerate(boxes):
        big = dilate_box(u.grid, box, lam)
        _check_containment(u.grid, u.ladder, big)
        inner = dilate_box(u.grid, box, 0.5)
        outer = box  # = 2 * inner as parabolic balls
        lhs = box_average(u, inner, two_up, time_weight_power=wt)
        rhs1 = box_average(u, outer, 1.0, time_weight_power=wt)
        rhs2 = box_average(u, outer, q_low, time_weight_power=wt) ** (1 + rho)
        rhs = rhs1 + rhs2
        ratio = 0.0 if lhs == 0 else (np.inf if rhs == 0 else lhs / rhs)
        rows.append({"box_id": i, "t": box.height, "lhs": lhs, "rhs": rhs,
                     "rhs1": rhs1, "rhs2": rhs2, "ratio": ratio,
                     "theta": "", "q": q_low})
    return RHReport(rows=rows, constant=max((r["ratio"] for r in rows),
                                            default=0.0))


def rh_improved_check(u: SpaceTimeField, rh, rho: float,
                      boxes: Sequence[ParabolicBox]) -> RHReport:
    """Self-improved reverse Holder inequality with exponent theta.

    ``rh`` is the validated exponent bundle; for each Whitney box W the
    left side is the high-exponent average on W and the right side is
    avg_q(lam W)^theta + avg_q(lam W) with q = s# and theta from the
    bundle (both formulas agree by construction).
    """
    theta = float(rh.theta)
    q = float(rat(rh.s_sharp))
    p_hi = float(rat(rh.p_sharp))
    lam = float(rh.lam)
    wt = 1.0 / rho
    rows = []
    for i, box in enumerate(boxes):
        big = dilate_box(u.grid, box, lam)
        _check_containment(u.grid, u.ladder, big)
        lhs = box_average(u, box, p_hi, time_weight_power=wt)
        base = box_average(u, big, q, time_weight_power=wt)
        rhs = base**theta + base
        ratio = 0.0 if lhs == 0 else (np.inf if rhs == 0 else lhs / rhs)
        rows.append({"box_id": i, "t": box.height, "lhs": lhs, "rhs": rhs,
                     "rhs1": base**theta, "rhs2": base, "ratio": ratio,
                     "theta": theta, "q": q})
    return RHReport(rows=rows, constant=max((r["ratio"] for r in rows),
                                            default=0.0), theta=theta)
