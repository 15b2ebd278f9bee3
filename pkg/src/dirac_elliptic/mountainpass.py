"""Shifted energy, its gradient, and a path-deformation search for a mountain-pass critical point."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import newton_krylov
from scipy.special import binom

from .errors import EndpointNotFoundError, EnergyOverflowError, GradientError, ValidationError
from .grid import RadialField, RadialGrid
from .kernel import end_exponents, green_apply
from .minimal import validate_exponents
from .problem import ProblemSpec, sphere_area
from .stability import QuadraticForms, assemble_forms, lambda1

log = logging.getLogger(__name__)

_SERIES_CUT = 0.1
_SERIES_TERMS = 24


def _series(x: np.ndarray, p: float) -> np.ndarray:
    """sum_(j>=2) C(p+1, j) x^j for |x| < 0.1."""
    out = np.zeros_like(x)
    xj = x * x
    for j in range(2, _SERIES_TERMS):
        out += binom(p + 1.0, j) * xj
        xj = xj * x
    return out


def F_eval(s, t, p: float):
    """(1/(p+1)) [(s+t+)^(p+1) - s^(p+1) - (p+1) s^p t+], evaluated without cancellation."""
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    tp = np.maximum(t_arr, 0.0)
    out = np.zeros(s_arr.shape)
    pos = tp > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = np.where(s_arr > 0, tp / s_arr, np.inf)
        small = pos & (x < _SERIES_CUT)
        big = pos & ~small
        sb, tb, xb = s_arr[big], tp[big], x[big]
        direct = np.where(
            sb > 0,
            sb ** (p + 1) * (np.expm1((p + 1) * np.log1p(xb)) - (p + 1) * xb),
            tb ** (p + 1))
        out[big] = direct / (p + 1)
        ss = s_arr[small]
        out[small] = ss ** (p + 1) * _series(x[small], p) / (p + 1)
    return out if out.ndim else float(out)


def f_eval(s, t, p: float):
    """Derivative of F in t: (s+t+)^p - s^p."""
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    tp = np.maximum(t_arr, 0.0)
    out = np.zeros(s_arr.shape)
    pos = tp > 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        sp, tq = s_arr[pos], tp[pos]
        out[pos] = np.where(sp > 0, sp ** p * np.expm1(p * np.log1p(tq / sp)), tq ** p)
    return out if out.ndim else float(out)


def f_t_eval(s, t, p: float):
    """Derivative of f in t: p (s+t+)^(p-1) for t > 0, else 0."""
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    return np.where(t_arr > 0, p * np.power(s_arr + np.maximum(t_arr, 0.0), p - 1.0), 0.0)


@dataclass(eq=False)
class EnergyContext:
    """Data of E(v) = A(v)/2 - sigma int V F(u_min, v+) r^(N-1) dr on the free nodes."""

    u_min: RadialField
    spec: ProblemSpec
    grid: RadialGrid
    forms: QuadraticForms
    mass: np.ndarray = field(init=False, repr=False)
    s: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.mass = sphere_area(self.grid.N) * self.grid.weights[:-1] * self.spec.V(self.grid.nodes[:-1])
        self.s = self.u_min.raw()[:-1]

    @classmethod
    def build(cls, u_min: RadialField, spec: ProblemSpec, grid: RadialGrid, validate: bool = True):
        if validate:
            validate_exponents(spec, "mountain-pass-radial")
        if np.any(u_min.raw() < 0):
            raise ValidationError("u_min>=0", "the minimal solution must be nonnegative")
        return cls(u_min, spec, grid, assemble_forms(u_min, spec, grid))

    @property
    def p(self) -> float:
        return self.spec.p

    def vec(self, v) -> np.ndarray:
        return self.forms.restrict(v)

    def field(self, x: np.ndarray) -> RadialField:
        return self.forms.extend(x)

    def source(self, x: np.ndarray) -> np.ndarray:
        """Load vector sigma w_i V_i f(u_i, v_i)."""
        return self.mass * f_eval(self.s, x, self.p)

    def A_norm(self, v) -> float:
        return math.sqrt(max(self.forms.A_form(v), 0.0))


def energy(v, ctx: EnergyContext) -> float:
    x = ctx.vec(v)
    nl = float(np.dot(ctx.mass, F_eval(ctx.s, x, ctx.p)))
    e = 0.5 * ctx.forms.A_form(x) - nl
    if not math.isfinite(e):
        raise EnergyOverflowError("energy is not finite at this state")
    return e


def energy_gradient(v, ctx: EnergyContext):
    """A-Riesz representative g of E'(v) and its norm sqrt(A(g, g))."""
    x = ctx.vec(v)
    b = ctx.source(x)
    if not np.all(np.isfinite(b)):
        raise GradientError("nonlinear load is not finite")
    try:
        g = x - ctx.forms.A_solve(b)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise GradientError(str(exc)) from exc
    if not np.all(np.isfinite(g)):
        raise GradientError("gradient solve returned non-finite values")
    return g, ctx.A_norm(g)


def find_endpoint(ctx: EnergyContext, v_dir, T_cap: float = 2.0 ** 80):
    """First T = 1, 2, 4, ... with E(T v_dir) <= 0."""
    d = ctx.vec(v_dir)
    if np.any(d < 0) or not np.any(d > 0):
        raise ValidationError("v_dir", "the direction must be nonnegative and nonzero")
    if not np.any(ctx.mass * d > 0):
        raise EndpointNotFoundError("direction has no mass where V > 0")
    T = 1.0
    while T <= T_cap:
        if energy(T * d, ctx) <= 0:
            return T, ctx.field(T * d)
        T *= 2.0
    raise EndpointNotFoundError(f"E(T v) stays positive up to T={T_cap:g}")


def default_direction(ctx: EnergyContext) -> RadialField:
    """A-normalized first stability eigenfunction, or a bump at the V0 maximizer."""
    rep = lambda1(ctx.forms)
    if rep.eigenfunction is not None:
        return rep.eigenfunction
    t = ctx.grid.t
    x = np.exp(-(t - t[np.argmax(ctx.spec.V0(ctx.grid.nodes))]) ** 2)[:-1]
    return ctx.field(x / ctx.A_norm(x))


@dataclass
class Path:
    states: List[np.ndarray]
    energies: List[float]

    @property
    def peak(self) -> int:
        return 1 + int(np.argmax(self.energies[1:-1]))

    @property
    def max_energy(self) -> float:
        return float(max(self.energies))

    def to_csv(self) -> str:
        m = len(self.states) - 1
        return "index,s,energy\n" + "".join(f"{j},{j / m!r},{e!r}\n" for j, e in enumerate(self.energies))


@dataclass
class RingEstimate:
    beta: float
    t0: float
    c_quad: float
    c_pow: float
    samples: int


def ring_floor(ctx: EnergyContext, rng: np.random.Generator, n_dirs: int = 16, descent_steps: int = 40) -> RingEstimate:
    """Estimate min E on the A-sphere of radius t0.

    Directions are the first eigenfunction and random nonnegative fields; the
    envelope min_d E(t d) is fitted by c_q t^2 - c_w t^(p+1), t0 is its
    maximizer, and the sampled minimum at t0 is refined by projected descent.
    """
    p = ctx.p
    eig = ctx.vec(default_direction(ctx))
    t = ctx.grid.t[:-1]
    dirs = [eig]
    for _ in range(n_dirs - 1):
        c, w = rng.uniform(t[0] / 2, t[-1] / 2), rng.uniform(0.3, 3.0)
        x = np.exp(-((t - c) / w) ** 2) * rng.uniform(0.5, 1.0) + rng.uniform(0, 0.3) * eig
        dirs.append(x / ctx.A_norm(x))
    # scale of the nonlinear growth: radius where E along eig first vanishes
    T_e, _ = find_endpoint(ctx, eig)
    ts = T_e * np.geomspace(1e-3, 0.5, 25)
    env = np.array([min(energy(tau * d, ctx) for d in dirs) for tau in ts])
    X = np.column_stack([ts ** 2, -ts ** (p + 1)])
    (cq, cw), *_ = np.linalg.lstsq(X, env, rcond=None)
    if cq > 0 and cw > 0:
        t0 = (2.0 * cq / ((p + 1.0) * cw)) ** (1.0 / (p - 1.0))
    else:
        t0 = float(ts[int(np.argmax(env))])
    t0 = float(min(t0, 0.5 * T_e))
    best = min(dirs, key=lambda d: energy(t0 * d, ctx))
    x = t0 * best
    e = energy(x, ctx)
    for _ in range(descent_steps):
        g, _ = energy_gradient(x, ctx)
        # tangential part of g on the sphere A(x) = t0^2
        g = g - ctx.forms.A_form(x, g) / t0 ** 2 * x
        step = 1.0
        while step > 1e-8:
            y = x - step * g
            y *= t0 / ctx.A_norm(y)
            ey = energy(y, ctx)
            if ey < e:
                x, e = y, ey
                break
            step *= 0.5
        else:
            break
    return RingEstimate(beta=e, t0=t0, c_quad=float(cq), c_pow=float(cw), samples=len(dirs))


@dataclass
class MountainPassReport:
    level_c: float
    beta_floor: float
    t0: float
    v_k: RadialField
    grad_norm: float
    second_solution: RadialField
    converged: bool
    path: Path
    endpoint_T: float
    rounds: int
    max_energy_history: List[float]
    clamp_size: float
    energy_v_k: float
    v_refined: RadialField
    refine_shift: Optional[float] = None
    refine_residual: Optional[float] = None
    coercivity_ratio: float = math.nan

    def to_dict(self) -> dict:
        return {
            "level_c": self.level_c, "beta_floor": self.beta_floor, "t0": self.t0,
            "grad_norm": self.grad_norm, "converged": self.converged, "endpoint_T": self.endpoint_T,
            "rounds": self.rounds, "clamp_size": self.clamp_size, "energy_v_k": self.energy_v_k,
            "refine_shift": self.refine_shift, "refine_residual": self.refine_residual,
            "coercivity_ratio": self.coercivity_ratio, "path_size": len(self.path.states),
            "max_energy_history": self.max_energy_history,
        }


def _newton(ctx: EnergyContext, x: np.ndarray, tol: float, max_steps: int = 40):
    """Newton's method on A v = b(v) with the tridiagonal Jacobian; returns (x, grad_norm, ok)."""
    band = ctx.forms.A_band
    g, gn = energy_gradient(x, ctx)
    for _ in range(max_steps):
        if gn <= tol:
            return x, gn, True
        J = np.zeros((3, x.size))
        J[0, 1:] = band[0, 1:]
        J[1] = band[1] - ctx.mass * f_t_eval(ctx.s, x, ctx.p)
        J[2, :-1] = band[0, 1:]
        res = ctx.forms.A_apply(x) - ctx.source(x)
        try:
            dx = solve_banded((1, 1), J, res)
        except (np.linalg.LinAlgError, ValueError):
            return x, gn, False
        y = x - dx
        gy, gny = energy_gradient(y, ctx)
        if not gny < gn:
            return x, gn, False
        x, gn = y, gny
    return x, gn, gn <= tol


def refine_solution(ctx: EnergyContext, v: RadialField, tol: float = 1e-13):
    """Solve v = G[V f(u_min, v)] with the Green operator, starting from the finite-element v.

    End exponents of the source are frozen at their values for the starting v.
    Returns (refined field, sup-norm shift relative to sup v, final residual).
    """
    spec, grid = ctx.spec, ctx.grid
    V = spec.V(grid.nodes)
    u = ctx.u_min.raw()
    q_head, q_tail = end_exponents(V * f_eval(u, v.raw(), ctx.p), grid)

    def resid(x):
        src = RadialField(grid, V * f_eval(u, x, ctx.p), "raw")
        return x - green_apply(src, spec, head_exponent=q_head, tail_exponent=q_tail).raw()

    x0 = v.raw().copy()
    scale = float(np.max(np.abs(x0)))
    x = newton_krylov(resid, x0, f_tol=tol * scale, method="lgmres", maxiter=50)
    res = float(np.max(np.abs(resid(x)))) / scale
    shift = float(np.max(np.abs(x - x0))) / scale
    return RadialField(grid, np.maximum(x, 0.0), "raw"), shift, res


def _reparametrize(ctx: EnergyContext, states: List[np.ndarray]) -> List[np.ndarray]:
    """Redistribute the states at equal A-arclength along the polyline."""
    X = np.array(states)
    seg = np.array([ctx.A_norm(b - a) for a, b in zip(X[:-1], X[1:])])
    s = np.concatenate(([0.0], np.cumsum(seg)))
    if s[-1] == 0:
        return states
    target = np.linspace(0.0, s[-1], len(states))
    idx = np.clip(np.searchsorted(s, target, side="right") - 1, 0, len(states) - 2)
    lam = np.where(seg[idx] > 0, (target - s[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0), 0.0)
    out = (1.0 - lam)[:, None] * X[idx] + lam[:, None] * X[idx + 1]
    out[0], out[-1] = X[0], X[-1]
    return list(out)


def _descend(ctx: EnergyContext, x: np.ndarray, ex: float, g: np.ndarray, gn: float):
    """One Armijo step (factor 1/2) along -g; returns the new state and its energy."""
    step = 1.0
    while step > 1e-12:
        y = x - step * g
        try:
            ey = energy(y, ctx)
        except EnergyOverflowError:
            ey = math.inf
        if ey <= ex - 1e-4 * step * gn * gn:
            return y, ey
        step *= 0.5
    return x, ex


def mountain_pass(ctx: EnergyContext, path_size: int = 41, max_deform: int = 2000, grad_tol: float = 1e-6,
                  v_dir=None, seed: int = 0, newton_switch: float = 1e-2, refine: bool = True) -> MountainPassReport:
    """Deform the segment 0 -> e towards a minimax path and polish its peak.

    Each round moves every interior state of positive energy one Armijo step
    (factor 1/2) along its negative A-gradient and then redistributes the
    states at equal A-arclength, which keeps the discrete path connected across
    the ring.  When the gradient at the highest state, less its component along
    the path, falls below ``newton_switch`` relative to the state norm, the
    state is polished by Newton's method on the discrete Euler-Lagrange system.

    ``v_k`` is the critical point of the discrete energy.  With ``refine`` it
    is carried over to the Green formulation (:func:`refine_solution`), and
    ``second_solution`` is u_min plus that refined field.
    """
    if path_size < 3:
        raise ValidationError("path_size", "a path needs at least 3 states")
    rng = np.random.default_rng(seed)
    if v_dir is None:
        v_dir = default_direction(ctx)
    T, e = find_endpoint(ctx, v_dir)
    e = ctx.vec(e)
    m = path_size - 1
    path = Path([(j / m) * e for j in range(m + 1)], [])
    path.energies = [energy(s, ctx) for s in path.states]
    history = [path.max_energy]
    gn = math.inf
    converged = False
    rounds = 0
    max_A = 0.0
    for rounds in range(1, max_deform + 1):
        j = path.peak
        x = path.states[j]
        g, gn = energy_gradient(x, ctx)
        tau = path.states[j + 1] - path.states[j - 1]
        tau = tau / ctx.A_norm(tau)
        g_perp = g - ctx.forms.A_form(g, tau) * tau
        ax = ctx.A_norm(x)
        if ctx.A_norm(g_perp) <= newton_switch * ax:
            y, gn_y, ok = _newton(ctx, x, grad_tol * 1e-3)
            ey = energy(y, ctx)
            if ok and ey > 0 and ctx.A_norm(y - x) <= 0.5 * ax:
                path.states[j], path.energies[j] = y, ey
                gn, converged = gn_y, True
                break
            newton_switch *= 0.3
        for i in range(1, m):
            xi = path.states[i]
            if path.energies[i] <= 0:
                # below the ring: descending here only stretches the path towards -infinity
                continue
            gi, gni = (g, gn) if i == j else energy_gradient(xi, ctx)
            path.states[i], path.energies[i] = _descend(ctx, xi, path.energies[i], gi, gni)
            max_A = max(max_A, ctx.forms.A_form(path.states[i]))
        path.states = _reparametrize(ctx, path.states)
        path.energies = [energy(s, ctx) for s in path.states]
        history.append(path.max_energy)

    j = path.peak
    x = path.states[j]
    clamp = float(max(0.0, -np.min(x)))
    v_fem = ctx.field(np.maximum(x, 0.0))
    level = path.max_energy
    shift = res = None
    v_ref = v_fem
    if refine and converged:
        v_ref, shift, res = refine_solution(ctx, v_fem)
    second = RadialField(ctx.grid, ctx.u_min.raw() + v_ref.raw(), "raw")
    beta = ring_floor(ctx, rng)
    return MountainPassReport(
        level_c=level, beta_floor=beta.beta, t0=beta.t0, v_k=v_fem, grad_norm=gn, second_solution=second,
        converged=converged, path=path, endpoint_T=T, rounds=rounds, max_energy_history=history,
        clamp_size=clamp, energy_v_k=energy(v_fem, ctx), v_refined=v_ref, refine_shift=shift,
        refine_residual=res, coercivity_ratio=max_A / (1.0 + abs(level)))


@dataclass
class EmbeddingReport:
    ratios_V0: List[float]
    ratios_linear: List[float]
    max_V0: float
    max_linear: float
    concentration_slope: Optional[float]
    bounded: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def bump(grid: RadialGrid, center: float, width: float) -> RadialField:
    """C-infinity bump of radius ``width`` around ``center`` (center 0 gives a ball)."""
    r = grid.nodes
    s = ((r - center) / width) ** 2
    with np.errstate(divide="ignore", over="ignore"):
        v = np.where(s < 1, np.exp(1.0 - 1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return RadialField(grid, v, "raw")


def embedding_ratios(ctx: EnergyContext, xi) -> tuple:
    x = ctx.vec(xi)
    a = ctx.A_norm(x)
    if a == 0:
        return 0.0, 0.0
    sig = sphere_area(ctx.grid.N)
    w = ctx.grid.weights[:-1]
    r = ctx.grid.nodes[:-1]
    q = ctx.p + 1.0
    lq = (sig * np.dot(w * ctx.spec.V0(r), np.abs(x) ** q)) ** (1.0 / q)
    lin = math.sqrt(np.dot(ctx.forms.B_diag, x * x))
    return float(lq / a), float(lin / a)


def embedding_check(ctx: EnergyContext, sample_fields: Sequence, concentrating: bool = False) -> EmbeddingReport:
    """Ratios of the weighted L^(p+1)(V0) and L^2(V0 u^(p-1)) norms to the A-norm.

    With ``concentrating`` the samples are read as a family shrinking towards
    the origin; the log-log slope of the worst ratio against the family index
    is reported and a clearly growing trend counts as unbounded.
    """
    pairs = [embedding_ratios(ctx, f) for f in sample_fields]
    r1 = [a for a, _ in pairs]
    r2 = [b for _, b in pairs]
    slope = None
    bounded = all(map(math.isfinite, r1 + r2))
    if concentrating and len(pairs) >= 3:
        worst = np.maximum(np.array(r1), np.array(r2))
        if np.all(worst > 0):
            slope = float(np.polyfit(np.arange(len(worst)), np.log(worst), 1)[0])
            bounded = bounded and slope <= 0.05
    return EmbeddingReport(r1, r2, max(r1, default=0.0), max(r2, default=0.0), slope, bounded)
