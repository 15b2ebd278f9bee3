import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from dirac_elliptic import (ProblemSpec, RadialField, RadialGrid, estimate_c2, fundamental_solution, green_apply,
                            newton_constant, supersolution_t)
from dirac_elliptic.errors import (DecayError, DomainError, EstimateDivergedError, NoBarrierError,
                                   SingularDataError)
from dirac_elliptic.kernel import barrier_condition, barrier_profile, threshold_kp
from dirac_elliptic.verify import LogBumpTest, _laplacian_scaled

C2_STAR = 1.0 / (8.0 * math.sqrt(2.0))


def flux_through_unit_sphere(c, N, area):
    # -d/dr (c r^(2-N)) at r = 1 by central differences, times the sphere area
    h = 1e-5
    d = (c * (1 + h) ** (2 - N) - c * (1 - h) ** (2 - N)) / (2 * h)
    return -d * area


@pytest.mark.parametrize("N,area,expected", [(3, 4 * math.pi, 1 / (4 * math.pi)),
                                             (4, 2 * math.pi ** 2, 1 / (4 * math.pi ** 2))])
def test_newton_constant_flux(N, area, expected):
    c = newton_constant(N)
    assert c == pytest.approx(expected, rel=1e-14)
    assert flux_through_unit_sphere(c, N, area) == pytest.approx(1.0, rel=1e-9)


def test_newton_constant_homogeneity():
    assert newton_constant(3) * 2.0 ** (2 - 3) == pytest.approx(newton_constant(3) / 2)


def test_newton_constant_domain():
    with pytest.raises(DomainError):
        newton_constant(2)


def test_green_of_zero(grid, spec):
    u = green_apply(RadialField(grid, np.zeros(grid.M)), spec)
    assert np.all(u.values == 0)


def test_green_indicator_closed_form():
    # r = 1 falls strictly between nodes on this grid; the kink is resolved to O(h^2)
    grid = RadialGrid(M=8192)
    r = grid.nodes
    u = green_apply(RadialField(grid, (r <= 1.0).astype(float)), ProblemSpec()).raw()
    exact = np.where(r <= 1, 0.5 - r * r / 6, 1 / (3 * r))
    away = np.abs(np.log(r)) > 0.05
    assert np.max(np.abs(u[away] / exact[away] - 1)) <= 1e-5


def test_green_gaussian_closed_form(grid, spec):
    r = grid.nodes
    u = green_apply(RadialField(grid, np.exp(-r * r)), spec).raw()
    exact = math.sqrt(math.pi) * erf(r) / (4 * r)
    sel = (r >= 2 * grid.r_min) & (r <= grid.R_max / 2)
    assert np.max(np.abs(u[sel] / exact[sel] - 1)) <= 1e-6


def test_green_gaussian_matches_refined_grid(spec):
    coarse = RadialGrid()
    fine = coarse.refined(4)
    uc = green_apply(RadialField(coarse, np.exp(-coarse.nodes ** 2)), spec).raw()
    uf = green_apply(RadialField(fine, np.exp(-fine.nodes ** 2)), spec).raw()[::4]
    assert np.max(np.abs(uc / uf - 1)) <= 1e-6


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3.0), st.floats(-8, 8))
def test_green_linearity(a, b, width, center):
    grid = RadialGrid(1e-4, 1e4, 512)
    spec = ProblemSpec()
    t = grid.t
    f = np.exp(-((t - center) / width) ** 2)
    g = 1.0 / (1.0 + grid.nodes ** 5)
    # the end closures are linear once their exponents are fixed
    G = lambda x: green_apply(RadialField(grid, x), spec, head_exponent=0.0, tail_exponent=5.0).values
    lhs = G(a * f + b * g)
    rhs = a * G(f) + b * G(g)
    scale = np.max(np.abs(G(np.abs(a) * f + np.abs(b) * g)))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(scale, 1e-300)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=8, max_size=8), st.floats(3.5, 8))
def test_green_positivity(levels, q):
    grid = RadialGrid(1e-4, 1e4, 512)
    # nonnegative piecewise-constant profile with a power-law tail
    idx = np.minimum((np.arange(grid.M) * 8) // grid.M, 7)
    f = np.asarray(levels)[idx] * (1 + grid.nodes) ** -q
    assert np.all(green_apply(RadialField(grid, f), ProblemSpec()).values >= 0)


def test_green_residual_identity_second_order(spec):
    errs = []
    bump = LogBumpTest(1.0, 2.0)
    for M in (2049, 4097):
        grid = RadialGrid(1e-4, 1e4, M)
        f = bump.value(grid.nodes)
        u = green_apply(RadialField(grid, f), spec)
        lap = _laplacian_scaled(u)
        sel = (grid.nodes > 0.2) & (grid.nodes < 5)
        errs.append(np.max(np.abs(-lap[sel] - f[sel])))
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_green_singular_data_error(spec, grid):
    with pytest.raises(SingularDataError):
        green_apply(RadialField(grid, grid.nodes ** -3.5 / (1 + grid.nodes ** 2)), spec)


def test_green_decay_error(spec, grid):
    with pytest.raises(DecayError):
        green_apply(RadialField(grid, grid.nodes ** -1.5), spec)


def test_fundamental_solution(spec, grid):
    assert np.all(fundamental_solution(spec.with_(k=0), grid).values == 0)
    u = fundamental_solution(spec.with_(k=1), grid)
    assert np.all(u.values == u.values[0])
    i = int(np.argmin(np.abs(grid.nodes - 1)))
    assert u.raw()[i] * grid.nodes[i] == pytest.approx(1 / (4 * math.pi), rel=1e-14)


def test_c2_closed_form(barrier):
    # int_0^inf ds/(1+s^4) = pi/(2 sqrt 2); the ratio increases to c_N times that integral
    assert barrier.c2 == pytest.approx(C2_STAR, rel=1e-6)
    assert barrier.kp == pytest.approx(2 * math.sqrt(2), rel=1e-6)
    assert barrier.tp == 4.0


def test_c2_linear_in_c1(spec, grid):
    a = estimate_c2(spec, grid).c2
    b = estimate_c2(spec.with_(c1=2.0), grid).c2
    assert abs(b / (2 * a) - 1) <= 1e-8


def test_c2_grid_refinement(spec, grid, barrier):
    fine = estimate_c2(spec, grid.refined(2)).c2
    assert abs(fine / barrier.c2 - 1) <= 5e-3


def test_c2_grows_near_window_edge(grid):
    # with a_inf = 4 the lower edge is negative, so a_inf = 2.5 puts it at p = 0.5
    s = ProblemSpec(a_inf=2.5)
    edge = estimate_c2(s.with_(p=0.5 + 1e-3), grid).c2
    mid = estimate_c2(s.with_(p=1.75), grid).c2
    assert math.isfinite(edge) and edge >= 10 * mid


def test_c2_outside_window_diverges(grid):
    with pytest.raises(EstimateDivergedError):
        estimate_c2(ProblemSpec(a_inf=2.5, p=0.49), grid)
    with pytest.raises(EstimateDivergedError):
        estimate_c2(ProblemSpec(a0=1.0, p=2.1), grid)


def test_barrier_inequality(spec, grid, barrier):
    prof = barrier_profile(spec, grid, envelope=True).scaled()
    bound = barrier.c2 * newton_constant(3)
    assert np.all(prof <= bound * (1 + 1e-12))
    i = int(np.argmin(np.abs(grid.nodes - barrier.maximizer_radius)))
    assert prof[i] == pytest.approx(bound, rel=1e-12)


def test_supersolution_t_values():
    assert supersolution_t(ProblemSpec(p=2, k=0.1), 1.0) == 4.0
    assert threshold_kp(1.0, 2.0) == pytest.approx(0.25)
    assert supersolution_t(ProblemSpec(p=0.5, k=1.0), 1.0) == pytest.approx(2.0)
    assert supersolution_t(ProblemSpec(p=1.0, k=1.0), 0.5) == pytest.approx(2.0)


@pytest.mark.parametrize("p,c2", [(2.0, 0.3), (1.5, 0.08838834764831842), (3.0, 1.7), (1.1, 0.2)])
def test_tp_satisfies_condition_at_kp(p, c2):
    kp = threshold_kp(c2, p)
    t = supersolution_t(ProblemSpec(p=p, k=kp), c2)
    assert barrier_condition(t, c2, kp, p) >= -1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.01, 5.0), st.floats(0.01, 100.0))
def test_tp_condition_sublinear(p, c2, k):
    t = supersolution_t(ProblemSpec(p=p, k=k), c2)
    assert barrier_condition(t, c2, k, p) >= -1e-10 * t


def test_supersolution_errors():
    with pytest.raises(NoBarrierError):
        supersolution_t(ProblemSpec(p=1.0), 1.0)
    with pytest.raises(NoBarrierError):
        supersolution_t(ProblemSpec(p=2.0, k=1.0), 1.0)
