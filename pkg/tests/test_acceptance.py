"""Acceptance criteria, one test each; every test prints a PASS/FAIL line with its measurements.

Run ``pytest tests/test_acceptance.py -v`` (lines are printed even under capture)
or ``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from dirac_elliptic import (ProblemSpec, RadialField, RadialGrid, assemble_forms, bisect_kstar, estimate_c2,
                            green_apply, iterate_minimal, lambda1)
from dirac_elliptic.kernel import barrier_profile, newton_constant
from dirac_elliptic.stability import stability_sweep
from dirac_elliptic.mountainpass import EnergyContext, F_eval, energy, energy_gradient, f_eval, mountain_pass
from dirac_elliptic.verify import check_singularity_and_decay, verify_solution


@pytest.fixture
def report(capsys):
    def emit(n, ok, details, elapsed):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f} s) {details}")
        assert ok, details
    return emit


@pytest.fixture(scope="module")
def base():
    grid = RadialGrid()
    spec = ProblemSpec()
    return grid, spec, estimate_c2(spec, grid)


def test_c01_fundamental_solution(report):
    t0 = time.perf_counter()
    grid = RadialGrid()
    rep = iterate_minimal(ProblemSpec(N=3, k=1.0, potential="zero"), grid)
    c = 1.0 / (4.0 * math.pi)
    err = float(np.max(np.abs(rep.solution.raw() * grid.nodes - c)) / c)
    dt = time.perf_counter() - t0
    report(1, rep.converged and err <= 1e-8 and dt < 1.0, f"max rel err {err:.2e} (limit 1e-8), runtime limit 1 s", dt)


def test_c02_green_indicator(report):
    t0 = time.perf_counter()
    grid = RadialGrid(M=8192)
    r = grid.nodes
    u = green_apply(RadialField(grid, (r <= 1.0).astype(float)), ProblemSpec()).raw()
    exact = np.where(r <= 1, 0.5 - r * r / 6, 1 / (3 * r))
    away = np.abs(np.log(r)) > 0.05
    err = float(np.max(np.abs(u[away] / exact[away] - 1)))
    dt = time.perf_counter() - t0
    report(2, err <= 1e-5 and dt < 1.0,
           f"max rel err {err:.2e} for |ln r| > 0.05 on M = 8192 (limit 1e-5), runtime limit 1 s", dt)


def test_c03_barrier_ratio(report):
    t0 = time.perf_counter()
    spec = ProblemSpec(N=3, a0=0.0, a_inf=4.0, c1=1.0, p=2.0)
    grid = RadialGrid()
    ratio = barrier_profile(spec, grid, envelope=True).scaled() / newton_constant(3)
    bounded = bool(np.all(np.isfinite(ratio)) and ratio[0] < ratio.max() and ratio[-1] < ratio.max())
    b1 = estimate_c2(spec, grid)
    b2 = estimate_c2(spec, grid.refined(2))
    drift = abs(b2.c2 / b1.c2 - 1)
    lin = abs(estimate_c2(spec.with_(c1=3.0), grid).c2 / (3 * b1.c2) - 1)
    dt = time.perf_counter() - t0
    ok = bounded and drift <= 5e-3 and lin <= 1e-8 and dt < 10
    report(3, ok, f"sup ratio {ratio.max():.6g} interior max {bounded}, doubling drift {drift:.2e} (limit 5e-3), "
                  f"c1 linearity {lin:.1e} (limit 1e-8)", dt)


def test_c04_monotone_iteration(report, base):
    grid, spec, b = base
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240)
    ks = b.kp * (1.0 - rng.uniform(0.0, 1.0, 10))
    worst_dec, steps, ok = 0.0, [], True
    for k in ks:
        rep = iterate_minimal(spec.with_(k=float(k)), grid, max_iter=500, tol=1e-10, barrier=b)
        ok &= rep.converged and rep.monotone_ok and rep.barrier_ok is True
        worst_dec = max(worst_dec, rep.max_decrease)
        steps.append(rep.steps)
    dt = time.perf_counter() - t0
    report(4, bool(ok) and dt < 120,
           f"10 k in (0, kp]: all converged, monotone and below w_tp = {bool(ok)}, "
           f"worst relative decrease {worst_dec:.1e}, steps {min(steps)}..{max(steps)}", dt)


def test_c05_singular_coefficient(report, base):
    grid, spec, b = base
    t0 = time.perf_counter()
    worst, ok = 0.0, True
    for f in (0.25, 0.5, 1.0):
        s = spec.with_(k=f * b.kp)
        u = iterate_minimal(s, grid, barrier=b).solution
        coeff, target, dsup, tail, mono, checks = check_singularity_and_decay(u, s)
        worst = max(worst, abs(coeff - target) / target)
        ok &= checks["singular_coeff"] and checks["decay_finite"]
    dt = time.perf_counter() - t0
    report(5, bool(ok), f"k/kp in (0.25, 0.5, 1): worst |lim u r - c_N k|/(c_N k) {worst:.2e} (limit 2e-2), "
                        f"decay_sup finite", dt)


def test_c06_stability(report, base):
    grid, spec, b = base
    t0 = time.perf_counter()
    ks = [0.1 * i * b.kp for i in range(1, 11)]
    sw = stability_sweep(spec, grid, ks, barrier=b)
    lam = [r.lambda1 for r in sw.rows]
    fine = grid.refined(2)
    bf = estimate_c2(spec, fine)
    drift = 0.0
    for k, l in zip(ks, lam):
        u = iterate_minimal(spec.with_(k=k), fine, barrier=bf).solution
        lf = lambda1(assemble_forms(u, spec.with_(k=k), fine)).lambda1
        drift = max(drift, abs(lf / l - 1))
    dt = time.perf_counter() - t0
    ok = min(lam) > 1 and sw.lambda_nonincreasing and drift <= 1e-2 and dt < 120
    report(6, ok, f"lambda1 from {lam[0]:.4g} down to {lam[-1]:.4g} (> 1), nonincreasing {sw.lambda_nonincreasing}, "
                  f"mesh-doubling drift {drift:.1e} (limit 1e-2)", dt)


@pytest.fixture(scope="module")
def mp_run(base):
    grid, spec, b = base
    t0 = time.perf_counter()
    s = spec.with_(k=b.kp / 2)
    u = iterate_minimal(s, grid, barrier=b).solution
    ctx = EnergyContext.build(u, s, grid)
    rep = mountain_pass(ctx, seed=0)
    return ctx, rep, time.perf_counter() - t0


def test_c07_mountain_pass(report, mp_run):
    ctx, rep, dt = mp_run
    t0 = time.perf_counter()
    grid = ctx.grid
    V = ctx.spec.V(grid.nodes)
    above = bool(np.all((rep.second_solution.raw() - ctx.u_min.raw())[V > 0] > 0))
    rng = np.random.default_rng(7)
    x = ctx.vec(rep.v_k)
    worst = 0.0
    for _ in range(10):
        phi = sum(rng.uniform(0.1, 2.0) * np.exp(-((grid.t - rng.uniform(-8, 8)) / rng.uniform(0.5, 3.0)) ** 2)
                  for _ in range(2))
        lhs = ctx.forms.A_form(x, phi)
        rhs = float(np.dot(ctx.source(x), ctx.vec(phi)))
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    dt += time.perf_counter() - t0
    ok = (rep.beta_floor > 0 and rep.level_c >= rep.beta_floor and rep.grad_norm <= 1e-6
          and bool(np.all(rep.v_k.raw() >= 0)) and above and worst <= 1e-5 and dt < 600)
    report(7, ok, f"beta {rep.beta_floor:.5g}, c {rep.level_c:.5g}, grad {rep.grad_norm:.1e} (limit 1e-6), "
                  f"v_k >= 0, second > u_min on supp V {above}, weak criticality {worst:.1e} (limit 1e-5)", dt)


def test_c08_second_solution(report, mp_run):
    ctx, rep, _ = mp_run
    t0 = time.perf_counter()
    out = {}
    for name, u in (("u_min", ctx.u_min), ("second", rep.second_solution)):
        v = verify_solution(u, ctx.spec, ctx.grid, (1e-3, 1e3), residual_tol=1e-4, weak_tol=1e-6)
        out[name] = (v.residual_sup, max(v.weak_residuals), v.checks["residual_pde"] and v.checks["weak_residual"])
    dt = time.perf_counter() - t0
    ok = all(o[2] for o in out.values())
    report(8, ok, "; ".join(f"{n}: residual {o[0]:.1e} (limit 1e-4), weak {o[1]:.1e} "
                            f"(limit {1e-6 * ctx.spec.k:.1e})" for n, o in out.items()), dt)


def test_c09_threshold(report, base):
    grid, spec, b = base
    t0 = time.perf_counter()
    ks = bisect_kstar(spec, grid, barrier=b)
    half = bisect_kstar(ProblemSpec(p=0.5), grid, k_seed=b.kp)
    dt = time.perf_counter() - t0
    ok = (ks.k_hi is not None and math.isfinite(ks.k_hi) and ks.k_lo_ge_kp
          and half.open_above and half.k_lo >= 1e6 * b.kp and dt < 300)
    report(9, ok, f"p = 2: [{ks.k_lo:.6g}, {ks.k_hi:.6g}] with kp {b.kp:.6g}; "
                  f"p = 1/2: open above through {half.k_lo:.3g} = {half.k_lo / b.kp:.3g} kp", dt)


def test_c10_gradients(report, mp_run):
    ctx, _, _ = mp_run
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    t = ctx.grid.t[:-1]
    h = 1e-5
    worst = 0.0
    for _ in range(20):
        v = sum(rng.uniform(0, 3) * np.exp(-((t - rng.uniform(-6, 6)) / rng.uniform(0.5, 3)) ** 2) for _ in range(3))
        phi = rng.standard_normal() * np.exp(-((t - rng.uniform(-6, 6)) / rng.uniform(0.5, 3)) ** 2)
        g, _ = energy_gradient(v, ctx)
        fd = (energy(v + h * phi, ctx) - energy(v - h * phi, ctx)) / (2 * h)
        exact = ctx.forms.A_form(g, phi)
        worst = max(worst, abs(fd - exact) / abs(exact))
    orders = []
    for s, x, p in ((1.0, 0.5, 2.0), (3.0, 0.2, 1.5), (0.5, 2.0, 3.0)):
        e = [abs((F_eval(s, x + d, p) - F_eval(s, x - d, p)) / (2 * d) - f_eval(s, x, p)) for d in (1e-3, 5e-4)]
        orders.append(math.log2(e[0] / e[1]))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-4 and all(1.75 <= o <= 2.25 for o in orders)
    report(10, ok, f"gradient vs central differences worst rel err {worst:.1e} on 20 pairs (limit 1e-4); "
                   f"f vs dF/dt observed orders {', '.join(f'{o:.2f}' for o in orders)}", dt)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
