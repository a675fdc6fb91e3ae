import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roughheat import data as datagen
from roughheat.errors import IndexOutOfRange, InvalidParams
from roughheat.geometry import GridSpec, SpaceTimeField, TimeLadder
from roughheat.solver import free_evolution
from roughheat.spaces import (BesovParams, LPLadder, ZParams, besov_norm,
                              change_of_angle_probe, dilate_data,
                              embedding_probe, lp_project,
                              trace_conjugate_beta, vanishing_profile,
                              weighted_lp_norm, whitney_averages, z_norm)


@pytest.fixture(scope="module")
def grid():
    return GridSpec(1, 128, 8.0)


@pytest.fixture(scope="module")
def ladder():
    return TimeLadder(1.0, 10, 2)


def random_field(grid, ladder, seed):
    rng = np.random.default_rng(seed)
    return SpaceTimeField(grid, ladder,
                          rng.normal(size=ladder.samples.shape + grid.shape))


# ---------------------------------------------------------------------------
# weighted L^p ladder norms


def test_weighted_lp_zero(grid, ladder):
    u = SpaceTimeField.zeros(grid, ladder)
    assert weighted_lp_norm(u, 2.0) == 0.0


def test_weighted_lp_power_law_closed_form(grid):
    # u = t^gamma, beta = 0, one sample per rung: the ladder sum is the
    # geometric series L^{n/p} (sum_m t_m^{gamma p} ln 2)^{1/p}
    lad = TimeLadder(1.0, 12, 1)
    gamma, p = 0.4, 3.0
    u = SpaceTimeField.from_function(grid, lad,
                                     lambda t, x: t**gamma * np.ones_like(x))
    expected = (grid.volume
                * np.sum(lad.heights ** (gamma * p)) * np.log(2.0)) ** (1 / p)
    assert weighted_lp_norm(u, p) == pytest.approx(expected, rel=1e-12)


def test_weighted_lp_weight_shift_exact(grid, ladder):
    u = random_field(grid, ladder, 3)
    beta = -0.4
    s = ladder.samples.reshape(ladder.samples.shape + (1,))
    shifted = SpaceTimeField(grid, ladder, s ** (-beta) * u.values)
    assert weighted_lp_norm(u, 2.5, beta) == pytest.approx(
        weighted_lp_norm(shifted, 2.5, 0.0), rel=1e-12)


# ---------------------------------------------------------------------------
# Z-norms


def test_fubini_coincidence(grid, ladder):
    for seed in range(10):
        u = random_field(grid, ladder, seed)
        for p, beta in ((2.0, 0.0), (3.0, -0.3), (2.5, 0.7)):
            zn = z_norm(u, ZParams(p, p, beta))
            wn = weighted_lp_norm(u, p, beta)
            assert zn == pytest.approx(wn, rel=1e-10)


def test_scale_invariant_profile_is_one(grid):
    lad = TimeLadder(1.0, 10, 4)
    beta = 0.35
    u = SpaceTimeField.from_function(grid, lad,
                                     lambda t, x: t**beta * np.ones_like(x))
    assert z_norm(u, ZParams(np.inf, np.inf, beta)) == pytest.approx(1.0)


def test_nesting_in_q(grid, ladder):
    for seed in range(10):
        u = random_field(grid, ladder, seed)
        for p in (2.0, 4.0, np.inf):
            z2 = z_norm(u, ZParams(p, 2.0))
            z4 = z_norm(u, ZParams(p, 4.0))
            zi = z_norm(u, ZParams(p, np.inf))
            assert z2 <= z4 * (1 + 1e-12) <= zi * (1 + 1e-12)


@settings(max_examples=20, deadline=None)
@given(c=st.floats(-1e3, 1e3), seed=st.integers(0, 20))
def test_homogeneity(c, seed):
    grid = GridSpec(1, 32, 8.0)
    ladder = TimeLadder(1.0, 5, 2)
    u = random_field(grid, ladder, seed)
    cu = SpaceTimeField(grid, ladder, c * u.values)
    for params in (ZParams(3.0, 2.0, 0.2), ZParams(np.inf, 4.0, -0.1)):
        assert z_norm(cu, params) == pytest.approx(abs(c) * z_norm(u, params),
                                                   rel=1e-12, abs=1e-12)
    assert weighted_lp_norm(cu, 2.0) == pytest.approx(
        abs(c) * weighted_lp_norm(u, 2.0), rel=1e-12, abs=1e-12)


def test_local_integrability_ladder(grid, ladder):
    """Truncated-cylinder L^q average against the shell-decomposition bound.

    The chain through the change-of-angle shells bounds the cylinder
    average by sum_l 2^{-l/q} times the Z^{inf,q} norm, up to a Whitney
    geometry constant; measured constants sit near 1 and the test pins a
    conservative cap.
    """
    for q in (2.0, 4.0):
        for seed in range(5):
            u = random_field(grid, ladder, seed)
            zn = z_norm(u, ZParams(np.inf, q))
            m = 2
            t = ladder.heights[m]
            from roughheat.geometry import ParabolicBox, box_average
            cyl = ParabolicBox((2.0,), 0.0, t, np.sqrt(t))
            lhs = box_average(u, cyl, q)
            rhs = sum(2.0 ** (-l / q) for l in range(ladder.depth - m + 1))
            assert lhs <= 4.0 * rhs * zn


# ---------------------------------------------------------------------------
# Littlewood-Paley and Besov


def test_lp_partition_of_unity(grid):
    lp = LPLadder.for_grid(grid)
    xi = grid.wavenumbers()
    total = sum(lp.chi(j) for j in lp.indices)
    assert np.max(np.abs(total[xi > 0] - 1.0)) < 1e-10


def test_lp_project_constant_annihilated(grid):
    lp = LPLadder.for_grid(grid)
    const = np.full(grid.shape, 4.2)
    for j in (lp.j_min, 0, lp.j_max):
        assert np.max(np.abs(lp_project(const, j, lp))) < 1e-12


def test_lp_reconstruction(grid):
    lp = LPLadder.for_grid(grid)
    u0 = datagen.band_limited_datum(grid, seed=3) + 2.0
    rec = sum(lp_project(u0, j, lp) for j in lp.indices)
    assert np.max(np.abs(rec - (u0 - u0.mean()))) < 1e-10


def test_lp_single_mode_scalar():
    grid = GridSpec(1, 128, 2 * np.pi)  # mode 1 has |xi| = 1
    lp = LPLadder.for_grid(grid)
    u0 = np.cos(grid.axis())
    for j in (-1, 0, 1):
        block = lp_project(u0, j, lp)
        scalar = lp.chi(j).reshape(-1)[1]
        assert np.max(np.abs(block - scalar * u0)) < 1e-12


def test_lp_index_out_of_range(grid):
    lp = LPLadder.for_grid(grid)
    with pytest.raises(IndexOutOfRange):
        lp_project(np.zeros(grid.shape), lp.j_max + 1, lp)


def test_besov_zero(grid):
    lp = LPLadder.for_grid(grid)
    assert besov_norm(np.zeros(grid.shape), BesovParams(-0.5, 4.0), lp) == 0.0


def test_besov_dilation_equivariance():
    grid = GridSpec(1, 256, 2 * np.pi)
    lp = LPLadder.for_grid(grid)
    alpha, p = -0.5, 4.0
    for seed in range(5):
        u0 = datagen.band_limited_datum(grid, seed=seed)
        u0 -= u0.mean()
        v, grid2 = dilate_data(u0, grid)
        n2 = besov_norm(v, BesovParams(alpha, p), LPLadder.for_grid(grid2))
        n1 = besov_norm(u0, BesovParams(alpha, p), lp)
        factor = 2.0 ** (alpha - grid.dimension / p)
        assert n2 == pytest.approx(factor * n1, rel=1e-8)


def test_besov_scaling_critical_invariance():
    # alpha = n/p - 2/rho makes the norm invariant under
    # u0 -> lambda^{2/rho} u0(lambda .) for dyadic lambda
    grid = GridSpec(1, 256, 2 * np.pi)
    rho = 8.0 / 3.0
    p = 4.0
    alpha = grid.dimension / p - 2.0 / rho
    u0 = datagen.band_limited_datum(grid, seed=11)
    u0 -= u0.mean()
    base = besov_norm(u0, BesovParams(alpha, p), LPLadder.for_grid(grid))
    w, g = u0, grid
    for _ in range(2):
        w, g = dilate_data(w, g)
        w = 2.0 ** (2.0 / rho) * w
        val = besov_norm(w, BesovParams(alpha, p), LPLadder.for_grid(g))
        assert val == pytest.approx(base, rel=1e-10)


def test_besov_infinity_exponent(grid):
    lp = LPLadder.for_grid(grid)
    u0 = datagen.band_limited_datum(grid, seed=2)
    val = besov_norm(u0, BesovParams(-0.5, np.inf), lp)
    assert val > 0 and np.isfinite(val)


def test_besov_params_validation():
    with pytest.raises(InvalidParams):
        BesovParams(0.1, 4.0)
    with pytest.raises(InvalidParams):
        ZParams(1.0, 2.0)


# ---------------------------------------------------------------------------
# vanishing profiles


def test_vanishing_profile_zero(grid, ladder):
    u = SpaceTimeField.zeros(grid, ladder)
    prof = vanishing_profile(u, 2.0, -0.3, [0.25, 1.0])
    assert all(v == 0.0 for _, v in prof)


def test_vanishing_profile_free_evolution(grid, op_checkerboard):
    lad = TimeLadder(1.0, 12, 2)
    u0 = datagen.band_limited_datum(grid, seed=5)
    ev = free_evolution(op_checkerboard, u0, lad)
    beta = -0.3
    taus = [lad.horizon * 2.0**-m for m in (12, 8, 4, 0)]
    prof = vanishing_profile(ev, 2.0, beta, taus)
    vals = [v for _, v in prof]
    # monotone nondecreasing in tau and dominated by tau^{-beta} sup|u0|
    assert all(a <= b * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    sup0 = np.max(np.abs(u0))
    for tau, v in prof:
        assert v <= tau ** (-beta) * sup0 * (1 + 1e-10)
    # decays towards the initial time
    assert vals[0] < 0.7 * vals[-1]


def test_vanishing_profile_scale_invariant_counterexample(grid):
    lad = TimeLadder(1.0, 10, 4)
    beta = 0.25
    u = SpaceTimeField.from_function(grid, lad,
                                     lambda t, x: t**beta * np.ones_like(x))
    prof = vanishing_profile(u, np.inf, beta,
                             [lad.horizon * 2.0**-m for m in (8, 4, 0)])
    for _, v in prof:
        assert v == pytest.approx(1.0, rel=1e-12)


# ---------------------------------------------------------------------------
# embedding and change of angle


def test_trace_conjugate_beta_formula():
    assert trace_conjugate_beta(1, 2.0, 0.5, 4.0) == pytest.approx(0.375)


def test_embedding_probe_finite_and_stable():
    ratios = {}
    for n_pts in (64, 128):
        grid = GridSpec(1, n_pts, 8.0)
        lad = TimeLadder(1.0, 8, 2)
        mk = lambda s: datagen.random_field(grid, lad, seed=s)
        for q in (2.0, np.inf):
            ratios[(n_pts, q)] = embedding_probe(mk, 2.0, 0.5, 4.0, q,
                                                 ensemble=8)
    for q in (2.0, np.inf):
        a, b = ratios[(64, q)], ratios[(128, q)]
        assert np.isfinite(a) and a > 0
        assert 0.8 <= a / b <= 1.25  # stable within +-20%


def test_embedding_probe_requires_ordered_exponents(grid, ladder):
    mk = lambda s: random_field(grid, ladder, s)
    with pytest.raises(InvalidParams):
        embedding_probe(mk, 4.0, 0.5, 2.0, 2.0)


def test_embedding_single_bump_closed_form(grid):
    """A field supported in one Whitney box reduces both norms to a single
    box average, making the ratio computable from the ladder weights."""
    lad = TimeLadder(1.0, 8, 1)
    m = 3
    t = lad.heights[m]
    u = SpaceTimeField.zeros(grid, lad)
    center = 16  # grid point 2.0
    u.values[m, 0, center] = 1.0
    p0, p1, q = 2.0, 4.0, 2.0
    beta0 = 0.5
    beta1 = trace_conjugate_beta(1, p0, beta0, p1)
    hi = z_norm(u, ZParams(p1, q, beta1))
    lo = z_norm(u, ZParams(p0, q, beta0))
    # oracle: for a point mass at height t_m the Whitney average at center
    # x is t^{-beta} (h^n 1_{|x-c|<r} / (#ball h^n))^{1/q}; the outer sum
    # runs over the #ball centers that see the spike
    from roughheat.spaces import _ball_footprint
    count = int(np.count_nonzero(_ball_footprint(grid, np.sqrt(t))))
    avq = (1.0 / count) ** (1.0 / q)

    def oracle(p, beta):
        return (np.log(2.0) * count * grid.cell_volume) ** (1 / p) \
            * t ** (-beta) * avq

    assert lo == pytest.approx(oracle(p0, beta0), rel=1e-10)
    assert hi == pytest.approx(oracle(p1, beta1), rel=1e-10)


def test_change_of_angle_identity_and_slope(grid):
    lad = TimeLadder(1.0, 10, 2)
    u = datagen.random_field(grid, lad, seed=1)
    res = change_of_angle_probe(u, 2.0, 2.0, 0.0, [1.0, 2.0, 4.0, 8.0])
    assert res["ratios"][0] == pytest.approx(1.0)
    assert res["slope"] <= res["predicted"] + 0.1
    res42 = change_of_angle_probe(u, 4.0, 2.0, 0.0, [1.0, 2.0, 4.0, 8.0])
    assert res42["slope"] <= res42["predicted"] + 0.1


def test_change_of_angle_single_box_renormalization(grid):
    """Enlarging the ball past a one-box support only renormalizes the
    average by the sample-count ratio, which is the measured value."""
    lad = TimeLadder(1.0, 8, 1)
    m, q = 3, 2.0
    t = lad.heights[m]
    u = SpaceTimeField.zeros(grid, lad)
    u.values[m, 0, 16] = 1.0
    from roughheat.spaces import _ball_footprint
    av1 = whitney_averages(u, m, q)[16]
    av2 = whitney_averages(u, m, q, lam=2.0)[16]
    c1 = np.count_nonzero(_ball_footprint(grid, np.sqrt(t)))
    c2 = np.count_nonzero(_ball_footprint(grid, 2.0 * np.sqrt(t)))
    assert av2 / av1 == pytest.approx((c1 / c2) ** (1 / q), rel=1e-12)


def test_change_of_angle_requires_lam_geq_one(grid, ladder):
    u = random_field(grid, ladder, 0)
    with pytest.raises(InvalidParams):
        change_of_angle_probe(u, 2.0, 2.0, 0.0, [0.5, 1.0])
