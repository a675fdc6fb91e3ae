"""Free evolution, Picard fixed point, bootstrapping and lifespan.

The mild formulation iterates Theta(v) = E(u0) + Duhamel(phi(v)) on the
ladder; convergence is measured in the weighted ladder L^r norm with the
scaling-critical weight n/(2r) - 1/rho.  Blowup is detected by marching an
adaptive embedded exponential pair until either the sup norm crosses a cap
or the step size collapses, which yields a lower estimate of the maximal
existence time together with a refinement-stability margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .duhamel import duhamel_source, _phi_functions
from .elliptic import DiscreteOperator, semigroup_apply
from .errors import InvalidParams, NonConvergence, RangeExceeded, ShapeError
from .geometry import GridSpec, SpaceTimeField, TimeLadder
from .spaces import ZParams, weighted_lp_norm, z_norm

__all__ = [
    "NonlinearitySpec",
    "MildSolution",
    "LifespanEstimate",
    "free_evolution",
    "apply_nonlinearity",
    "picard_solve",
    "estimate_lifespan",
    "bootstrap_table",
    "uniqueness_probe",
    "contraction_weight",
]


@dataclass(frozen=True)
class NonlinearitySpec:
    """Growth data and evaluator for the reaction term.

    'power' is phi(u) = mu |u|^rho u; 'allen-cahn' is phi(u) = -u^3 + u
    with a declared validity range |u| <= cutoff.  The growth constant of
    the cubic evaluator degenerates as u -> 0 (the linear part dominates),
    so its certificate is calibrated on magnitudes in [1e-8 * cutoff,
    cutoff]; see ``validate``.
    """

    kind: str = "power"
    rho: float = 3.0
    mu: float = 1.0
    cutoff: float = np.inf
    growth_const: float = field(default=0.0)
    lipschitz_const: float = field(default=0.0)

    def __post_init__(self):
        if self.kind not in ("power", "allen-cahn"):
            raise InvalidParams(f"unknown nonlinearity kind {self.kind!r}")
        if not self.rho > 0:
            raise InvalidParams(f"growth exponent must be positive, got {self.rho}")
        if self.kind == "allen-cahn":
            if not (self.rho == 2.0 and np.isfinite(self.cutoff)
                    and self.cutoff > 0):
                raise InvalidParams(
                    "allen-cahn requires rho = 2 and a finite cutoff")
        if self.growth_const == 0.0:
            object.__setattr__(self, "growth_const", self._default_growth())
        if self.lipschitz_const == 0.0:
            object.__setattr__(self, "lipschitz_const", self._default_lipschitz())

    def _default_growth(self) -> float:
        if self.kind == "power":
            return abs(self.mu) if self.mu != 0 else 1.0
        # sup over |u| in [floor, cutoff] of |u - u^3| / |u|^3
        floor = 1e-8 * self.cutoff
        return (1.0 + floor**2) / floor**2

    def _default_lipschitz(self) -> float:
        if self.kind == "power":
            return abs(self.mu) * (1.0 + self.rho) if self.mu != 0 else 1.0
        floor = 1e-8 * self.cutoff
        return 0.5 * (1.0 + 3.0 * self.cutoff**2) / floor**2

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "power":
            return self.mu * np.abs(u) ** self.rho * u
        if np.max(np.abs(u)) > self.cutoff:
            raise RangeExceeded(
                f"|u| = {np.max(np.abs(u))} beyond cutoff {self.cutoff}")
        return -(u**3) + u

    def validate(self, pairs: int = 10_000, seed: int = 0) -> int:
        """Violations of the growth and Lipschitz bounds on random pairs.

        Samples magnitudes log-uniformly in [1e-8 * scale, scale] where
        scale is the cutoff (or 1 for the power law); returns the count of
        violated inequalities (0 certifies the declared constants).
        """
        rng = np.random.default_rng(seed)
        scale = self.cutoff if np.isfinite(self.cutoff) else 1.0
        mag = scale * np.exp(rng.uniform(np.log(1e-8), 0.0, size=(pairs, 2)))
        uv = mag * rng.choice([-1.0, 1.0], size=(pairs, 2))
        u, v = uv[:, 0], uv[:, 1]
        fu, fv = self(u), self(v)
        tol = 1 + 1e-12
        growth_bad = np.abs(fu) > self.growth_const * np.abs(u) ** (1 + self.rho) * tol
        lip_bad = (np.abs(fu - fv) > self.lipschitz_const
                   * (np.abs(u) ** self.rho + np.abs(v) ** self.rho)
                   * np.abs(u - v) * tol)
        return int(np.count_nonzero(growth_bad) + np.count_nonzero(lip_bad))


@dataclass
class MildSolution:
    """Fixed point of the mild map plus iteration diagnostics."""

    field: SpaceTimeField
    iterations: int
    distances: list[float]
    contraction_factors: list[float]
    residual: float
    converged: bool
    ball_radius: float
    horizon: float
    ball_exceeded: bool = False

    @property
    def contraction_max(self) -> float:
        return max(self.contraction_factors, default=0.0)


@dataclass
class LifespanEstimate:
    """Blowup time estimate with censoring and stability diagnostics.

    ``monitor_traces`` holds instantaneous spatial L^r norms recorded
    along the accepted steps for each requested monitor exponent; the
    monitors observe the trajectory without influencing it, so the
    estimated lifespan is independent of the monitored class.
    """

    tau: float
    censored: bool
    sup_trace: list[tuple[float, float]]
    refinement_ratio: float = 1.0
    monitor_traces: dict = field(default_factory=dict)


def free_evolution(op: DiscreteOperator, u0: np.ndarray,
                   ladder: TimeLadder) -> SpaceTimeField:
    """t -> e^{-tL} u0 sampled on every ladder time."""
    grid = op.grid
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != grid.shape:
        raise ShapeError(f"datum shape {u0.shape} != grid {grid.shape}")
    w, v = op.eigensystem
    coeff = op.to_spectral(u0)
    times = ladder.samples.reshape(-1)
    spec = np.exp(-np.outer(times, w)) * coeff
    vals = (spec @ v.T).reshape(ladder.samples.shape + grid.shape)
    return SpaceTimeField(grid, ladder, vals)


def apply_nonlinearity(spec: NonlinearitySpec,
                       u: SpaceTimeField) -> SpaceTimeField:
    """Pointwise phi(u); range violations surface as RangeExceeded."""
    if u.vector:
        raise ShapeError("nonlinearity acts on scalar fields")
    return SpaceTimeField(u.grid, u.ladder, spec(u.values))


def contraction_weight(n: int, r: float, rho: float) -> float:
    """Scaling-critical ladder weight n/(2r) - 1/rho."""
    rinv = 0.0 if np.isinf(r) else 1.0 / r
    return n / 2 * rinv - 1.0 / rho


def picard_solve(op: DiscreteOperator, u0: np.ndarray,
                 spec: NonlinearitySpec, ladder: TimeLadder,
                 r: float = 4.0, ball_radius: float = np.inf,
                 max_iter: int = 60, tol: float = 1e-10,
                 init: str = "free") -> MildSolution:
    """Iterate Theta(v) = E(u0) + Duhamel(phi(v)) to a fixed point.

    Successive iterates are compared in the ladder L^r norm with the
    scaling-critical weight; the final distance doubles as the fixed-point
    residual.  ``init`` picks v0 = E(u0) ('free') or v0 = 0 ('zero').
    Divergence raises NonConvergence with the distance history attached.
    """
    grid = op.grid
    beta = contraction_weight(grid.dimension, r, spec.rho)
    free = free_evolution(op, u0, ladder)
    v = free.copy() if init == "free" else SpaceTimeField.zeros(grid, ladder)
    if init not in ("free", "zero"):
        raise InvalidParams(f"unknown init strategy {init!r}")
    distances: list[float] = []
    factors: list[float] = []
    ball_exceeded = False
    for it in range(1, max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            phi_vals = spec(v.values)
            if not np.all(np.isfinite(phi_vals)):
                break
            forced = duhamel_source(
                op, SpaceTimeField(grid, ladder, phi_vals))
            nxt_vals = free.values + forced.values
            if not np.all(np.isfinite(nxt_vals)):
                break
            nxt = SpaceTimeField(grid, ladder, nxt_vals)
            diff = SpaceTimeField(grid, ladder, nxt.values - v.values)
            d = weighted_lp_norm(diff, r, beta)
        if distances and distances[-1] > 0:
            factors.append(d / distances[-1])
        distances.append(d)
        with np.errstate(over="ignore", invalid="ignore"):
            size = weighted_lp_norm(nxt, r, beta)
        if size > ball_radius:
            ball_exceeded = True
        v = nxt
        if d <= tol:
            return MildSolution(field=v, iterations=it, distances=distances,
                                contraction_factors=factors, residual=d,
                                converged=True, ball_radius=ball_radius,
                                horizon=ladder.horizon,
                                ball_exceeded=ball_exceeded)
        if not np.isfinite(d):
            break
    raise NonConvergence(
        f"no fixed point after {len(distances)} iterations",
        diagnostics={"distances": distances, "factors": factors})


def fixed_point_residual(op: DiscreteOperator, u0: np.ndarray,
                         spec: NonlinearitySpec, sol: MildSolution,
                         r: float = 4.0) -> float:
    """Ladder-norm defect of u = E(u0) + Duhamel(phi(u)) for a solution."""
    ladder = sol.field.ladder
    grid = op.grid
    beta = contraction_weight(grid.dimension, r, spec.rho)
    free = free_evolution(op, u0, ladder)
    forced = duhamel_source(op, apply_nonlinearity(spec, sol.field))
    diff = SpaceTimeField(grid, ladder,
                          free.values + forced.values - sol.field.values)
    return weighted_lp_norm(diff, r, beta)


def bootstrap_table(sol: MildSolution, rho: float,
                    rs: Sequence[float], qs: Sequence[float],
                    horizon: float | None = None) -> dict:
    """Z-norm grid z(u; r, q, n/(2r) - 1/rho) over the exponent grid."""
    grid_dim = sol.field.grid.dimension
    horizon = sol.horizon if horizon is None else horizon
    table = {}
    for r in rs:
        beta = contraction_weight(grid_dim, r, rho)
        for q in qs:
            table[(r, q)] = z_norm(sol.field, ZParams(r, q, beta, horizon))
    return table


# ---------------------------------------------------------------------------
# adaptive lifespan estimation


def _etd_pair(op: DiscreteOperator, spec_u: np.ndarray, dt: float,
              phi_of: Callable[[np.ndarray], np.ndarray],
              w: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One embedded exponential Euler / exponential trapezoid step.

    Works in the eigenbasis; ``phi_of`` maps spectral coefficients to the
    spectral image of the nonlinearity.
    """
    z = -w * dt
    ez = np.exp(z)
    phi1, phi2 = _phi_functions(z)
    n0 = phi_of(spec_u)
    low = ez * spec_u + dt * phi1 * n0
    n1 = phi_of(low)
    high = low + dt * phi2 * (n1 - n0)
    return low, high


def estimate_lifespan(op: DiscreteOperator, u0: np.ndarray,
                      spec: NonlinearitySpec, horizon: float,
                      cap: float = 1e6, rtol: float = 1e-5,
                      check_refinement: bool = True,
                      monitors: Sequence[float] = ()) -> LifespanEstimate:
    """March adaptively until the sup norm crosses the cap or steps die.

    The returned tau is a lower estimate of the maximal existence time;
    ``refinement_ratio`` reports tau(rtol/10)/tau(rtol) when the
    refinement pass is enabled.  ``monitors`` lists spatial L^r exponents
    whose norms are recorded along the way (read-only observers).
    """
    if cap <= 0:
        raise InvalidParams("cap must be positive")
    tau, trace, mon = _march(op, u0, spec, horizon, cap, rtol, monitors)
    censored = tau >= horizon
    ratio = 1.0
    if check_refinement and not censored:
        tau_fine, _, _ = _march(op, u0, spec, horizon, cap, rtol / 10, ())
        ratio = tau_fine / tau if tau > 0 else 1.0
    return LifespanEstimate(tau=min(tau, horizon), censored=censored,
                            sup_trace=trace, refinement_ratio=ratio,
                            monitor_traces=mon)


def _march(op: DiscreteOperator, u0: np.ndarray, spec: NonlinearitySpec,
           horizon: float, cap: float, rtol: float,
           monitors: Sequence[float] = ()):
    w, v = op.eigensystem
    grid = op.grid

    def phi_of(c: np.ndarray) -> np.ndarray:
        phys = op.from_spectral(c)
        with np.errstate(over="raise", invalid="raise"):
            try:
                val = spec(np.clip(phys, -10 * cap, 10 * cap))
            except (FloatingPointError, RangeExceeded):
                raise _Blown()
        return op.to_spectral(val).reshape(-1)

    hn = grid.cell_volume

    def observe(t: float, phys: np.ndarray) -> None:
        for r in monitors:
            if np.isinf(r):
                val = float(np.max(np.abs(phys)))
            else:
                val = float((np.sum(np.abs(phys) ** r) * hn) ** (1.0 / r))
            mon.setdefault(r, []).append((t, val))

    mon: dict = {}
    t = 0.0
    u = op.to_spectral(np.asarray(u0, dtype=float)).reshape(-1)
    sup = float(np.max(np.abs(u0)))
    trace: list[tuple[float, float]] = [(0.0, sup)]
    observe(0.0, np.asarray(u0, dtype=float))
    if sup > cap:
        return 0.0, trace, mon
    dt = horizon / 32
    dt_min_factor = 1e-12
    while t < horizon:
        dt = min(dt, horizon - t)
        try:
            low, high = _etd_pair(op, u, dt, phi_of, w, v)
        except _Blown:
            dt *= 0.5
            if dt < dt_min_factor * max(t, horizon / 1e6):
                return t, trace, mon
            continue
        err = float(np.linalg.norm(high - low))
        scale = rtol * max(float(np.linalg.norm(high)), 1.0)
        if err > scale:
            dt *= 0.5
            if dt < dt_min_factor * max(t, horizon / 1e6):
                return t, trace, mon
            continue
        t += dt
        u = high
        phys = op.from_spectral(u)
        sup = float(np.max(np.abs(phys)))
        trace.append((t, sup))
        observe(t, phys)
        if sup > cap:
            return t, trace, mon
        if err < 0.05 * scale:
            dt *= 2.0
    return horizon, trace, mon


class _Blown(Exception):
    pass


# ---------------------------------------------------------------------------
# uniqueness probing


def uniqueness_probe(op: DiscreteOperator, u0: np.ndarray,
                     spec: NonlinearitySpec, ladder: TimeLadder,
                     r: float = 4.0, tol: float = 1e-10,
                     coarse_op: DiscreteOperator | None = None,
                     coarse_u0: np.ndarray | None = None) -> dict:
    """Deviation between fixed points from different initializations.

    Runs the Picard iteration from v0 = E(u0) and from v0 = 0 and reports
    the max over rungs of the relative L2 distance.  When a coarse
    operator (half the points, same domain) is supplied, the fine solution
    restricted to even indices is compared against the coarse one too.
    """
    sol_free = picard_solve(op, u0, spec, ladder, r=r, tol=tol, init="free")
    sol_zero = picard_solve(op, u0, spec, ladder, r=r, tol=tol, init="zero")
    init_dev = _max_rung_l2(sol_free.field, sol_zero.field)
    out = {"init_deviation": init_dev, "iterations": (sol_free.iterations,
                                                      sol_zero.iterations)}
    if coarse_op is not None:
        if coarse_u0 is None:
            coarse_u0 = _restrict(op.grid, u0)
        lad_c = ladder
        sol_c = picard_solve(coarse_op, coarse_u0, spec, lad_c, r=r, tol=tol)
        restricted = _restrict_field(sol_free.field, coarse_op.grid)
        out["grid_deviation"] = _max_rung_l2(restricted, sol_c.field)
    return out


def _max_rung_l2(a: SpaceTimeField, b: SpaceTimeField) -> float:
    diff = a.values - b.values
    axes = tuple(range(2, diff.ndim))
    num = np.sqrt(np.sum(diff**2, axis=axes))
    den = np.sqrt(np.maximum(np.sum(a.values**2, axis=axes),
                             np.sum(b.values**2, axis=axes)))
    mask = den > 1e-300
    if not mask.any():
        return 0.0
    return float(np.max(num[mask] / den[mask]))


def _restrict(grid: GridSpec, u: np.ndarray) -> np.ndarray:
    step = 2
    if grid.dimension == 1:
        return u[::step]
    return u[::step, ::step]


def _restrict_field(f: SpaceTimeField, coarse: GridSpec) -> SpaceTimeField:
    vals = f.values[..., ::2] if f.grid.dimension == 1 else f.values[..., ::2, ::2]
    return SpaceTimeField(coarse, f.ladder, vals)
