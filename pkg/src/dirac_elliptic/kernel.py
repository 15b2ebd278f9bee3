"""Fundamental solution, the radial Green operator and the barrier constants."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import (DecayError, DomainError, EstimateDivergedError, NoBarrierError,
                     SingularDataError, ValidationError)
from .grid import RadialField, RadialGrid, cumulative_from_left, cumulative_from_right, decade_slices, loglog_slope
from .problem import ProblemSpec, potential_V0, sphere_area

__all__ = [
    "potential_V0", "newton_constant", "green_apply", "fundamental_solution",
    "BarrierConstants", "estimate_c2", "supersolution_t", "barrier_condition", "end_exponents",
]

# relative size of |f(R_max)| R_max^N below which a slowly decaying tail is dropped
TAIL_NEGLIGIBLE = 1e-14


def newton_constant(N: int) -> float:
    """c_N with -Laplace(c_N |x|^(2-N)) = delta_0 in R^N, i.e. 1/((N-2) |S^(N-1)|)."""
    if int(N) != N or N < 3:
        raise DomainError(f"newton_constant needs an integer N >= 3, got {N}")
    return 1.0 / ((N - 2) * sphere_area(int(N)))


def _check_grid(grid: RadialGrid, spec: ProblemSpec):
    if grid.N != spec.N:
        raise ValidationError("grid", f"grid dimension {grid.N} differs from problem dimension {spec.N}")


def end_exponents(f: np.ndarray, grid: RadialGrid):
    """Power-law decay exponents q with f ~ r^(-q), fitted over the first and last decade.

    Returns ``(q_head, q_tail)``; an entry is None when the end value is zero or
    the fit is impossible (sign change in the decade).
    """
    r = grid.nodes
    head, tail = decade_slices(grid)
    q_head = q_tail = None
    if f[0] != 0:
        s = loglog_slope(r[head], f[head])
        if s is None:
            s = loglog_slope(r[:2], f[:2])
        q_head = -s if s is not None else 0.0
    if f[-1] != 0:
        s = loglog_slope(r[tail], f[tail])
        if s is None:
            s = loglog_slope(r[-2:], f[-2:])
        q_tail = -s if s is not None else 0.0
    return q_head, q_tail


def green_apply(f: RadialField, spec: ProblemSpec, head_exponent: Optional[float] = None,
                tail_exponent: Optional[float] = None) -> RadialField:
    """Decaying radial solution u of -Laplace u = f.

    u(r) = [r^(2-N) int_0^r f s^(N-1) ds + int_r^inf f s ds] / (N-2), with
    power-law closures f(s) = f(end) (s/end)^(-q) below r_min and beyond R_max.
    The exponents q are fitted over the end decades unless given.  The result
    is returned in the scaled representation.
    """
    grid = f.grid
    _check_grid(grid, spec)
    N, h = grid.N, grid.h
    r = grid.nodes
    fr = np.asarray(f.raw(), dtype=float)
    q_head, q_tail = end_exponents(fr, grid)
    if head_exponent is not None and fr[0] != 0:
        q_head = head_exponent
    if tail_exponent is not None and fr[-1] != 0:
        q_tail = tail_exponent

    head = 0.0
    if q_head is not None:
        if q_head >= N:
            raise SingularDataError(
                f"f ~ r^-{q_head:.4g} near 0 is not integrable against r^{N - 1}")
        head = fr[0] * r[0] ** N / (N - q_head)

    tail = 0.0
    if q_tail is not None:
        if q_tail > 2:
            tail = fr[-1] * r[-1] ** 2 / (q_tail - 2)
        else:
            mass = abs(np.dot(grid.weights, fr))
            if abs(fr[-1]) * r[-1] ** N > TAIL_NEGLIGIBLE * max(mass, np.finfo(float).tiny):
                raise DecayError(f"f ~ r^-{q_tail:.4g} at infinity; int_r^inf f s ds diverges")

    inner = head + cumulative_from_left(fr * r ** N, h)
    outer = tail + cumulative_from_right(fr * r ** 2, h)
    w = (inner + r ** (N - 2) * outer) / (N - 2)
    return RadialField(grid, w, "scaled")


def fundamental_solution(spec: ProblemSpec, grid: RadialGrid) -> RadialField:
    """k c_N r^(2-N) on the grid (seed of the monotone iteration)."""
    _check_grid(grid, spec)
    return RadialField(grid, np.full(grid.M, spec.k * newton_constant(spec.N)), "scaled")


@dataclass(frozen=True)
class BarrierConstants:
    c2: float
    kp: Optional[float]
    tp: Optional[float]
    maximizer_radius: float

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_kp(c2: float, p: float) -> Optional[float]:
    """k_p = (c2 p)^(-1/(p-1)) (p-1)/p for p > 1; None otherwise."""
    if p <= 1:
        return None
    return (c2 * p) ** (-1.0 / (p - 1.0)) * (p - 1.0) / p


def barrier_condition(t: float, c2: float, k: float, p: float) -> float:
    """Slack t - (c2 t k^(p-1) + 1)^p of the supersolution condition (>= 0 when it holds)."""
    return t - (c2 * t * k ** (p - 1.0) + 1.0) ** p


def supersolution_t(spec: ProblemSpec, c2: float) -> float:
    """Scale t_p of the supersolution t k^p G[V G^p[delta]] + k G[delta]."""
    p, k = spec.p, spec.k
    if p > 1:
        kp = threshold_kp(c2, p)
        if k > kp * (1 + 1e-12):
            raise NoBarrierError(f"k={k:.6g} exceeds k_p={kp:.6g}; no supersolution of this form")
        return (p / (p - 1.0)) ** p
    if p == 1:
        if c2 >= 1:
            raise NoBarrierError(f"p=1 needs c2 < 1, measured c2={c2:.6g}")
        return 1.0 / (1.0 - c2)
    if k <= 0:
        raise NoBarrierError("p<1 barrier needs k > 0")
    return (c2 * k ** (p - 1.0) + 1.0) ** (p / (1.0 - p))


def _barrier_source(spec: ProblemSpec, grid: RadialGrid, envelope: bool) -> RadialField:
    """V G^p[delta] (raw), with V replaced by V0 when ``envelope`` is set."""
    cN = newton_constant(spec.N)
    r = grid.nodes
    V = potential_V0(r, spec) if envelope else spec.V(r)
    # G[delta]^p = c_N^p r^(-(N-2)p), in log form for large N p
    f = V * np.exp(spec.p * (math.log(cN) - (spec.N - 2) * np.log(r)))
    return RadialField(grid, f, "raw")


def barrier_profile(spec: ProblemSpec, grid: RadialGrid, envelope: bool = False) -> RadialField:
    """G[V G^p[delta]] in scaled form."""
    return green_apply(_barrier_source(spec, grid, envelope), spec)


def estimate_c2(spec: ProblemSpec, grid: RadialGrid) -> BarrierConstants:
    """Measure c2 = sup_r G[V0 G^p[delta]](r) / G[delta](r) on the grid.

    Also fills k_p (p > 1) and t_p when a barrier exists for ``spec.k``.
    """
    _check_grid(grid, spec)
    N = spec.N
    src = _barrier_source(spec, grid, envelope=True)
    q_head, q_tail = end_exponents(src.raw(), grid)
    if q_head is not None and q_head >= N:
        raise EstimateDivergedError(
            f"V0 G^p[delta] ~ r^-{q_head:.4g} near 0: the ratio is unbounded as r_min shrinks")
    if q_tail is not None and q_tail <= N:
        raise EstimateDivergedError(
            f"V0 G^p[delta] ~ r^-{q_tail:.4g} at infinity: the ratio grows without bound")
    try:
        prof = green_apply(src, spec)
    except (SingularDataError, DecayError) as exc:
        raise EstimateDivergedError(str(exc)) from exc
    ratio = prof.scaled() / newton_constant(N)
    i = int(np.argmax(ratio))
    c2 = float(ratio[i])
    kp = threshold_kp(c2, spec.p)
    if spec.p > 1:
        tp = (spec.p / (spec.p - 1.0)) ** spec.p
    else:
        try:
            tp = supersolution_t(spec, c2)
        except NoBarrierError:
            tp = None
    return BarrierConstants(c2=c2, kp=kp, tp=tp, maximizer_radius=float(grid.nodes[i]))
