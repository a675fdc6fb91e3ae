"""Closed-form exponent algebra for the parabolic scale.

Everything here is logic, not floating point: rational inputs stay exact
``Fraction``s and infinity is the distinguished ``math.inf``.  Floats are
converted through their shortest decimal representation, so cli inputs
like ``1.2`` mean 6/5.

Covers parabolic Sobolev conjugates and their admissible intervals, the
critical-number line in the (1/p, alpha) plane, reaction-diffusion
parameter windows, the Duhamel admissibility tables, and reverse-Holder
exponent systems with their double theta formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Union

from .errors import InvalidParams

__all__ = [
    "Exp",
    "INF",
    "rat",
    "inv",
    "sobolev_upper",
    "sobolev_lower",
    "sobolev_indices",
    "ExponentInterval",
    "rd_interval",
    "p_critical",
    "scaling_params",
    "admissible_region",
    "duhamel_table_check",
    "rd_wellposed_check",
    "rh_exponents",
    "RHParams",
    "ExponentReport",
    "exponent_report",
]

INF = math.inf
Exp = Union[Fraction, float]  # Fraction or INF


def rat(x) -> Exp:
    """Coerce a number to an exact exponent (Fraction or INF)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        if math.isinf(x):
            return INF
        return Fraction(str(x))
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return INF if x in ("inf", "infinity") else Fraction(x)
    raise InvalidParams(f"cannot interpret exponent {x!r}")


def inv(q: Exp) -> Fraction:
    """1/q with 1/inf = 0."""
    if q == INF:
        return Fraction(0)
    if q == 0:
        raise InvalidParams("cannot invert exponent 0")
    return Fraction(1) / q


def from_inv(r: Fraction) -> Exp:
    return INF if r == 0 else Fraction(1) / r


def sobolev_upper(q: Exp, n: int) -> Exp:
    """Upper parabolic Sobolev index: 1/q* = 1/q - 1/(n+2), inf beyond."""
    q = rat(q)
    r = inv(q) - Fraction(1, n + 2)
    return INF if r <= 0 else Fraction(1) / r


def sobolev_lower(q: Exp, n: int) -> Exp:
    """Lower parabolic Sobolev index: 1/q_* = 1/q + 1/(n+2)."""
    q = rat(q)
    return Fraction(1) / (inv(q) + Fraction(1, n + 2))


@dataclass(frozen=True)
class ExponentInterval:
    """[lo, hi] or [lo, hi) on the extended exponent line."""

    lo: Exp
    hi: Exp
    hi_closed: bool = True

    def __contains__(self, x) -> bool:
        x = rat(x)
        if x < self.lo:
            return False
        if x == INF:
            return self.hi == INF and self.hi_closed
        if self.hi == INF:
            return True
        return x <= self.hi if self.hi_closed else x < self.hi

    def __str__(self) -> str:
        right = "]" if self.hi_closed else ")"
        return f"[{self.lo}, {self.hi}{right}"


def upper_interval(q: Exp, n: int) -> ExponentInterval:
    """Range of r reachable with half a smoothing order from q."""
    q = rat(q)
    thresh = Fraction(n + 2)
    if q < thresh:
        return ExponentInterval(q, sobolev_upper(q, n), hi_closed=True)
    if q == thresh:
        return ExponentInterval(q, INF, hi_closed=False)
    return ExponentInterval(q, INF, hi_closed=True)


def double_interval(q: Exp, n: int) -> ExponentInterval:
    """Range of r reachable with a full smoothing order from q."""
    q = rat(q)
    thresh = Fraction(1) + Fraction(n, 2)
    if q < thresh:
        qss_inv = inv(q) - Fraction(2, n + 2)
        return ExponentInterval(q, Fraction(1) / qss_inv, hi_closed=True)
    if q == thresh:
        return ExponentInterval(q, INF, hi_closed=False)
    return ExponentInterval(q, INF, hi_closed=True)


def sobolev_indices(q: Exp, n: int) -> dict:
    """Conjugates and admissible intervals for one q."""
    q = rat(q)
    return {
        "q_upper": sobolev_upper(q, n),
        "q_lower": sobolev_lower(q, n),
        "interval_upper": upper_interval(q, n),
        "interval_double": double_interval(q, n),
    }


def rd_interval(n: int, rho) -> tuple[Fraction, Fraction, bool]:
    """Parameter window ( (n+2) rho/2, n (1+rho) rho/2 ) and nonemptiness."""
    rho = rat(rho)
    if not rho > 0:
        raise InvalidParams(f"growth exponent must be positive, got {rho}")
    lo = Fraction(n + 2) * rho / 2
    hi = Fraction(n) * (1 + rho) * rho / 2
    return lo, hi, lo < hi


def p_critical(alpha, Q) -> Exp:
    """Critical number via 1/p = 1 + alpha - alpha/Q, for alpha > -1."""
    alpha, Q = rat(alpha), rat(Q)
    if not alpha > -1:
        raise InvalidParams(f"need alpha > -1, got {alpha}")
    if not (1 <= Q < 2):
        raise InvalidParams(f"need Q in [1, 2), got {Q}")
    r = 1 + alpha - alpha / Q
    return from_inv(r)


def scaling_params(n: int, p, rho) -> dict:
    """Scaling exponent sigma = 2/rho and critical alpha = n/p - 2/rho."""
    p, rho = rat(p), rat(rho)
    if not (p > 1 and rho > 0):
        raise InvalidParams("need p > 1 and rho > 0")
    sigma = Fraction(2) / rho
    alpha = Fraction(n) * inv(p) - sigma
    return {"sigma": sigma, "alpha": alpha,
            "admissible": Fraction(-1) < alpha < 0}


def critical_alpha_inverse(n: int, rho, alpha) -> Fraction:
    """1/p on the critical line for a given alpha."""
    rho, alpha = rat(rho), rat(alpha)
    return (alpha + Fraction(2) / rho) / n


# ---------------------------------------------------------------------------
# admissible region in the (1/p, alpha) plane


@dataclass(frozen=True)
class Region:
    """Data-space region with its critical segment, exact vertices."""

    n: int
    rho: Fraction
    Q: Fraction
    vertices: tuple[tuple[Fraction, Fraction], ...]
    critical_segment: tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]] | None
    rd_plus_inverse: Fraction

    def contains(self, x, alpha) -> bool:
        x, alpha = rat(x), rat(alpha)
        if not (self.rd_plus_inverse < x < 1):
            return False
        if not (Fraction(-1) < alpha < 0):
            return False
        return x <= 1 + alpha * (1 - inv(self.Q))

    def mask(self, resolution: int):
        """Rasterized membership grid over (0,1) x (-1,0), row-major."""
        xs = [Fraction(2 * i + 1, 2 * resolution) for i in range(resolution)]
        als = [Fraction(-(2 * i + 1), 2 * resolution) for i in range(resolution)]
        return xs, als, [[self.contains(x, a) for x in xs] for a in als]


def admissible_region(n: int, rho, Q, resolution: int = 64) -> Region:
    """Exact polygon for the data region plus the clipped critical line.

    The region is { 1/RD+ < 1/p < 1 } x { -1 < alpha < 0 } below the
    critical-number slant 1/p = 1 + alpha (1 - 1/Q); the segment is the
    piece of alpha = n/p - 2/rho inside the closure.
    """
    rho, Q = rat(rho), rat(Q)
    _, rd_plus, nonempty = rd_interval(n, rho)
    if not nonempty:
        raise InvalidParams(f"empty parameter window for n={n}, rho={rho}")
    left = inv(rd_plus)
    slope = 1 - inv(Q)  # x = 1 + slope * alpha on the slant edge

    def slant_x(alpha: Fraction) -> Fraction:
        return 1 + slope * alpha

    verts: list[tuple[Fraction, Fraction]] = [(Fraction(1), Fraction(0))]
    x_bottom = slant_x(Fraction(-1))
    if x_bottom >= left:
        verts.append((x_bottom, Fraction(-1)))
        verts.append((left, Fraction(-1)))
    else:
        alpha_cut = (left - 1) / slope
        verts.append((left, alpha_cut))
    verts.append((left, Fraction(0)))

    seg = _clip_critical(n, rho, left, slope)
    return Region(n=n, rho=rho, Q=Q, vertices=tuple(verts),
                  critical_segment=seg, rd_plus_inverse=left)


def _clip_critical(n: int, rho: Fraction, left: Fraction, slope: Fraction):
    """Intersect alpha = n x - 2/rho with the closed region, in x."""
    two_over_rho = Fraction(2) / rho

    def alpha_of(x: Fraction) -> Fraction:
        return n * x - two_over_rho

    lo, hi = left, Fraction(1)
    # -1 <= alpha <= 0
    lo = max(lo, (two_over_rho - 1) / n)
    hi = min(hi, two_over_rho / n)
    # x <= 1 + slope * alpha(x)  <=>  x (1 - slope n) <= 1 - slope * 2/rho
    coeff = 1 - slope * n
    rhs = 1 - slope * two_over_rho
    if coeff > 0:
        hi = min(hi, rhs / coeff)
    elif coeff < 0:
        lo = max(lo, rhs / coeff)
    elif rhs < 0:
        return None
    if lo > hi:
        return None
    return ((lo, alpha_of(lo)), (hi, alpha_of(hi)))


# ---------------------------------------------------------------------------
# Duhamel admissibility tables


_OPS = ("source", "grad_source", "div_source", "grad_div_source")

_KAPPA = {
    "source": Fraction(1),
    "grad_source": Fraction(1, 2),
    "div_source": Fraction(1, 2),
    "grad_div_source": Fraction(0),
}


@dataclass(frozen=True)
class Verdict:
    admissible: bool
    kappa: Fraction
    reasons: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.admissible


def duhamel_table_check(op: str, regularity: str, kappa, q, r, n: int,
                        q_upper=INF, q_lower=None,
                        q_tilde=None) -> Verdict:
    """Admissibility of (kappa, q, r) (and optional bootstrap q_tilde).

    ``op`` is one of 'source' (time integral of the semigroup),
    'grad_source', 'div_source' (divergence-form source) and
    'grad_div_source'.  ``q_upper`` and ``q_lower`` are the configured
    integrability thresholds of the coefficients (q(A) and its dual
    counterpart).  Every failed clause is named in the verdict.
    """
    if op not in _OPS:
        raise InvalidParams(f"unknown operator {op!r}")
    if regularity not in ("rough", "regular"):
        raise InvalidParams(f"regularity must be rough|regular, got {regularity!r}")
    q, r, kappa = rat(q), rat(r), rat(kappa)
    q_upper = rat(q_upper)
    q_lower = rat(q_lower) if q_lower is not None else Fraction(10, 7)
    reasons: list[str] = []
    if kappa != _KAPPA[op]:
        reasons.append(f"kappa must be {_KAPPA[op]} for {op}, got {kappa}")
    if not (q > 1 and r >= q):
        reasons.append(f"need 1 < q <= r, got q={q}, r={r}")
    else:
        if op == "source":
            if r not in double_interval(q, n):
                reasons.append(f"r={r} outside {double_interval(q, n)}")
        elif op == "grad_source":
            if r not in upper_interval(q, n):
                reasons.append(f"r={r} outside {upper_interval(q, n)}")
            if regularity == "rough" and not r < q_upper:
                reasons.append(f"need r < q(A)={q_upper}")
            if regularity == "regular" and r == INF:
                reasons.append("need r < inf for regular coefficients")
        elif op == "div_source":
            if r not in upper_interval(q, n):
                reasons.append(f"r={r} outside {upper_interval(q, n)}")
            if regularity == "rough" and not q > q_lower:
                reasons.append(f"need q > q(A*)'={q_lower}")
            if regularity == "regular" and r == INF:
                reasons.append("need r < inf for regular coefficients")
        else:  # grad_div_source
            if regularity == "rough" and not (q == 2 and r == 2):
                reasons.append("rough case needs q = r = 2")
            if regularity == "regular" and not (q == r and 1 < q < INF):
                reasons.append("regular case needs q = r in (1, inf)")
    if q_tilde is not None:
        qt = rat(q_tilde)
        if not (1 < qt <= q):
            reasons.append(f"need 1 < q_tilde <= q, got {qt}")
        if op == "grad_source":
            if regularity == "rough" and not r < q_upper:
                reasons.append(f"bootstrap needs r < q(A)={q_upper}")
            if regularity == "regular" and r == INF:
                reasons.append("bootstrap needs r < inf")
        elif op == "div_source" and regularity == "rough" and not qt > q_lower:
            reasons.append(f"bootstrap needs q_tilde > q(A*)'={q_lower}")
        elif op == "grad_div_source":
            if regularity == "rough" and not (qt == 2 and r == 2):
                reasons.append("bootstrap needs q_tilde = r = 2")
            if regularity == "regular" and not (qt == r and r < INF):
                reasons.append("bootstrap needs q_tilde = r in (1, inf)")
    return Verdict(admissible=not reasons, kappa=_KAPPA[op],
                   reasons=tuple(reasons))


# ---------------------------------------------------------------------------
# reaction-diffusion well-posedness clauses


def rd_wellposed_check(n: int, rho, p, alpha, r, q, Q=None) -> dict:
    """Evaluate every clause of the well-posedness parameter lemma.

    Returns the derived weight beta = n(1+rho)/(2r) - 1/rho - 1/2 together
    with named clause booleans; callers downgrade runs to exploratory when
    some clause fails rather than aborting.
    """
    rho, p, alpha, r, q = map(rat, (rho, p, alpha, r, q))
    Q = rat(Q) if Q is not None else Fraction(10, 7)
    rd_lo, rd_hi, nonempty = rd_interval(n, rho)
    beta = Fraction(n) * (1 + rho) / (2 * r) - inv(rho) - Fraction(1, 2) \
        if r != INF else -inv(rho) - Fraction(1, 2)
    clauses = {
        "fujita_supercritical": rho > Fraction(2, n),
        "window_nonempty": nonempty,
        "p_in_window": 1 < p < rd_hi,
        "alpha_in_range": Fraction(-1) < alpha < 0,
        "critical_line": Fraction(n) * inv(p) - alpha == Fraction(2) / rho,
        "p_above_critical_number": inv(p) <= inv(p_critical(alpha, Q))
        if Fraction(-1) < alpha else False,
        "r_in_window": rd_lo < r < rd_hi,
        "r_at_least_p": r >= p,
        "q_above_window": q > rd_lo,
        "beta_above_minus_half": beta > Fraction(-1, 2),
        "p_above_shifted_critical": inv(p) <= inv(p_critical(2 * beta + 1, Q))
        if 2 * beta + 1 > -1 else False,
        "p_above_r_over_growth": p > r / (1 + rho),
    }
    return {"beta": beta, "rd_minus": rd_lo, "rd_plus": rd_hi,
            "clauses": clauses, "admissible": all(clauses.values())}


# ---------------------------------------------------------------------------
# reverse-Holder exponent systems


@dataclass(frozen=True)
class RHParams:
    """Exponent bundle for the super-linear reverse Holder machinery."""

    p_sharp: Exp
    q_sharp: Exp
    r_sharp: Exp
    s_sharp: Exp
    alpha_sharp: Exp
    beta1: Fraction
    beta2: Fraction
    theta: Exp
    lam: float = 1.5

    def __post_init__(self):
        if not (self.s_sharp < self.r_sharp < self.p_sharp
                and self.s_sharp < self.q_sharp < self.p_sharp):
            raise InvalidParams("need s# < r#, q# < p#")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidParams("beta1, beta2 must lie in (0, 1)")
        if abs(self.beta2 * self.alpha_sharp - self.beta1) > Fraction(1, 10**12):
            raise InvalidParams("beta2 * alpha# must equal beta1")
        if not self.theta >= 1:
            raise InvalidParams("theta must be >= 1")
        if not 1 < self.lam < 3:
            raise InvalidParams("dilation must lie in (1, 3)")


def rh_exponents(n: int, rho, q, lam: float = 1.5) -> RHParams:
    """Exponent system for the reaction-diffusion reverse Holder step.

    Assignments: p# = 2*, q# = 2_*(1+rho), r# = 2_* q / (q - 2_* rho),
    s# = q, alpha# = 1 + rho.  Both theta formulas (the direct one in
    (n, rho, q) and alpha#(1-beta2)/(1-beta1)) are computed and must agree
    exactly; the relation beta2 alpha# = beta1 is enforced.
    """
    rho, q = rat(rho), rat(q)
    if not (Fraction(2, n) < rho < Fraction(4, n)):
        raise InvalidParams(f"need 2/n < rho < 4/n, got rho={rho} at n={n}")
    rd_lo, _, _ = rd_interval(n, rho)
    two_up = sobolev_upper(2, n)
    two_lo = sobolev_lower(2, n)
    if not (rd_lo < q < two_lo * (1 + rho)):
        raise InvalidParams(
            f"need q in ({rd_lo}, {two_lo * (1 + rho)}), got {q}")
    p_sharp = two_up
    q_sharp = two_lo * (1 + rho)
    r_sharp = two_lo * q / (q - two_lo * rho)
    s_sharp = q
    alpha_sharp = 1 + rho
    beta1 = p_sharp * (r_sharp - s_sharp) / (r_sharp * (p_sharp - s_sharp))
    beta2 = p_sharp * (q_sharp - s_sharp) / (q_sharp * (p_sharp - s_sharp))
    theta_direct = q * (Fraction(4, n) - rho) / (Fraction(4, n) * q - two_up * rho)
    theta_holder = alpha_sharp * (1 - beta2) / (1 - beta1)
    if theta_direct != theta_holder:  # exact rationals; never expected
        raise InvalidParams(
            f"theta formulas disagree: {theta_direct} vs {theta_holder}")
    return RHParams(p_sharp=p_sharp, q_sharp=q_sharp, r_sharp=r_sharp,
                    s_sharp=s_sharp, alpha_sharp=alpha_sharp,
                    beta1=beta1, beta2=beta2, theta=theta_direct, lam=lam)


# ---------------------------------------------------------------------------
# consolidated report


@dataclass(frozen=True)
class ExponentReport:
    n: int
    rho: Fraction
    sigma: Fraction
    rd_minus: Fraction
    rd_plus: Fraction
    window_nonempty: bool
    q_upper_conj: Exp
    q_lower_conj: Exp
    interval_upper: ExponentInterval
    interval_double: ExponentInterval
    p_crit: Exp
    critical_alpha: Fraction
    alpha_admissible: bool


def exponent_report(n: int, rho, q, p, Q=Fraction(10, 7)) -> ExponentReport:
    rho, q, p, Q = rat(rho), rat(q), rat(p), rat(Q)
    rd_lo, rd_hi, nonempty = rd_interval(n, rho)
    sob = sobolev_indices(q, n)
    sc = scaling_params(n, p, rho)
    alpha = sc["alpha"]
    p_c = p_critical(alpha, Q) if Fraction(-1) < alpha else INF
    return ExponentReport(
        n=n, rho=rho, sigma=sc["sigma"], rd_minus=rd_lo, rd_plus=rd_hi,
        window_nonempty=nonempty, q_upper_conj=sob["q_upper"],
        q_lower_conj=sob["q_lower"], interval_upper=sob["interval_upper"],
        interval_double=sob["interval_double"], p_crit=p_c,
        critical_alpha=alpha, alpha_admissible=bool(sc["admissible"]))
