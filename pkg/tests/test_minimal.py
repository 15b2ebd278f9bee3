import numpy as np
import pytest

from dirac_elliptic import (ProblemSpec, RadialGrid, bisect_kstar, check_monotone_in_V, estimate_c2,
                            fundamental_solution, iterate_minimal, validate_exponents)
from dirac_elliptic.errors import ExponentWindowError, NoBarrierError, OrderingError, ValidationError
from dirac_elliptic.kernel import barrier_profile, newton_constant
from dirac_elliptic.minimal import minimal_solution


def test_window_minimal_mode():
    s = validate_exponents(ProblemSpec(), "minimal")
    assert s.window == ("minimal", -1.0, 3.0)


def test_window_mountain_mode():
    s = validate_exponents(ProblemSpec(), "mountain-pass-radial")
    assert s.window[0] == "mountain-pass-radial"
    assert s.window[1] < 2 < s.window[2]


@pytest.mark.parametrize("kw,mode,cond", [
    ({"a0": 2.5}, "mountain-pass-radial", "a0<2"),
    ({"p": 0.5}, "mountain-pass-radial", "p>1"),
    ({"a0": 1.0, "a_inf": 1.4}, "mountain-pass-radial", "a_inf>max(0,1+a0/2)"),
    ({"p": 3.5, "a0": 1.0}, "mountain-pass-radial", "p+1 in (2*(a_inf), 2*(a0))"),
    ({"p": 3.5}, "minimal", "p-window"),
])
def test_window_violations_are_named(kw, mode, cond):
    with pytest.raises(ExponentWindowError) as err:
        validate_exponents(ProblemSpec(**kw), mode)
    assert err.value.condition == cond


def test_unknown_mode():
    with pytest.raises(ValidationError):
        validate_exponents(ProblemSpec(), "other")


def test_zero_potential_single_step(grid):
    s = ProblemSpec(potential="zero", k=1.3)
    rep = iterate_minimal(s, grid)
    assert rep.converged and rep.steps == 1
    assert np.array_equal(rep.solution.values, fundamental_solution(s, grid).values)


def test_converges_under_barrier(spec, grid, barrier):
    for frac in (0.25, 0.5, 1.0):
        rep = iterate_minimal(spec.with_(k=frac * barrier.kp), grid, barrier=barrier)
        assert rep.converged and rep.barrier_ok and rep.monotone_ok
        assert rep.deltas[-1] <= 1e-10 * max(1.0, np.max(rep.solution.values))
        assert all(d >= 0 for d in rep.deltas)


def test_far_above_threshold_diverges(spec, grid, barrier):
    rep = iterate_minimal(spec.with_(k=100 * barrier.kp), grid, barrier=barrier)
    assert rep.verdict == "diverged" and rep.solution is None


def test_max_iter_verdict(spec, grid, barrier):
    rep = iterate_minimal(spec.with_(k=barrier.kp), grid, max_iter=2, barrier=barrier)
    assert rep.verdict == "max-iter" and rep.solution is None and rep.steps == 2


def test_tolerance_must_be_positive(spec, grid):
    with pytest.raises(ValidationError):
        iterate_minimal(spec, grid, tol=0)


def test_solution_dominates_seed_and_respects_bounds(half_spec, grid, barrier, u_half):
    seed = fundamental_solution(half_spec, grid).values
    w = u_half.values
    assert np.all(w >= seed)
    k, p = half_spec.k, half_spec.p
    upper = barrier.tp * k ** p * barrier_profile(half_spec, grid).values + seed
    assert np.all(w <= upper * (1 + 1e-10))
    assert np.all(w <= (barrier.c2 * barrier.tp * k ** p + k) * newton_constant(3) * (1 + 1e-10))


def test_monotone_in_k_and_scaling_supersolution(spec, grid, barrier):
    k1, k2 = 0.3 * barrier.kp, 0.8 * barrier.kp
    u1 = minimal_solution(spec.with_(k=k1), grid, barrier=barrier).values
    u2 = minimal_solution(spec.with_(k=k2), grid, barrier=barrier).values
    assert np.all(u1 <= u2)
    l0 = (k1 / k2) ** (1 / spec.p)
    assert np.all(u1 <= l0 * u2 * (1 + 1e-10))


def test_p_one_branch(grid):
    s = ProblemSpec(p=1.0, c1=1.0)
    c2 = estimate_c2(s, grid).c2
    assert c2 < 1
    assert iterate_minimal(s.with_(k=5.0), grid).converged
    big = s.with_(c1=2.0 / c2)
    with pytest.raises(NoBarrierError):
        iterate_minimal(big, grid)


def test_sublinear_converges_for_large_k(grid):
    rep = iterate_minimal(ProblemSpec(p=0.5, k=1e5), grid)
    assert rep.converged and rep.barrier_ok


def test_kstar_bracket_above_kp(spec, grid, barrier):
    est = bisect_kstar(spec, grid, barrier=barrier)
    assert not est.open_above
    assert est.k_lo < est.k_hi
    assert est.k_lo_ge_kp
    assert est.to_dict()["grid"] == grid.ident


def test_kstar_open_above_for_sublinear(grid, barrier):
    est = bisect_kstar(ProblemSpec(p=0.5), grid, k_seed=barrier.kp)
    assert est.open_above and est.k_hi is None
    assert est.k_lo >= 1e6 * barrier.kp
    assert est.kp is None and est.k_lo_ge_kp is None


def test_kstar_bisection_contract(spec, grid, barrier):
    wide = bisect_kstar(spec, grid, rel_tol=1e-2, barrier=barrier)
    narrow = bisect_kstar(spec, grid, rel_tol=1e-3, barrier=barrier)
    assert wide.width / narrow.width >= 5


def test_kstar_seed_above_kstar_halves_down(spec, grid, barrier):
    est = bisect_kstar(spec, grid, k_seed=50 * barrier.kp, rel_tol=1e-2, barrier=barrier)
    assert est.k_lo >= barrier.kp and est.k_hi <= 2 * est.k_lo


def test_monotone_in_V_examples(half_spec, grid):
    same = check_monotone_in_V(half_spec, half_spec, grid)
    assert same.max_violation == 0 and same.ok
    half = check_monotone_in_V(half_spec, half_spec.with_(V_scale=0.5), grid)
    assert half.ok and np.all(half.u2.values <= half.u1.values)
    zero = check_monotone_in_V(half_spec, half_spec.with_(potential="zero"), grid)
    assert zero.ok
    assert np.array_equal(zero.u2.values, fundamental_solution(half_spec, grid).values)


def test_monotone_in_V_ordering_error(half_spec, grid):
    with pytest.raises(OrderingError):
        check_monotone_in_V(half_spec.with_(V_scale=0.5), half_spec, grid)


def test_minimal_solution_raises_when_not_converged(spec, grid, barrier):
    with pytest.raises(ValidationError):
        minimal_solution(spec.with_(k=100 * barrier.kp), grid, barrier=barrier)
