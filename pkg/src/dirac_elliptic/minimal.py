"""Monotone iteration for the minimal solution and the empirical extremal parameter."""

from __future__ import annotations

import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .errors import ExponentWindowError, NoBarrierError, OrderingError, ValidationError
from .grid import RadialField, RadialGrid
from .kernel import (BarrierConstants, barrier_profile, estimate_c2, fundamental_solution, green_apply,
                     newton_constant, supersolution_t)
from .problem import ProblemSpec, critical_exponent

log = logging.getLogger(__name__)

MODES = ("minimal", "mountain-pass-radial")
DEFAULT_TOL = 1e-10
BLOWUP_CAP = 1e12
# roundoff allowance in the nodewise comparisons v_{n-1} <= v_n <= w_tp
COMPARE_SLACK = 1e-10


def validate_exponents(spec: ProblemSpec, mode: str = "minimal") -> ProblemSpec:
    """Check the exponent window for ``mode`` and return the spec annotated with it.

    ``minimal`` checks (N - a_inf)/(N - 2) < p < (N - a0)/(N - 2).  The radial
    mountain-pass mode additionally requires p > 1, a0 < 2,
    a_inf > max(0, 1 + a0/2) and 2*(a_inf) < p + 1 < 2*(a0).
    """
    if mode not in MODES:
        raise ValidationError("mode", f"unknown mode {mode!r}")
    N, p, a0, ai = spec.N, spec.p, spec.a0, spec.a_inf
    lo, hi = (N - ai) / (N - 2.0), (N - a0) / (N - 2.0)
    if mode == "mountain-pass-radial":
        if not p > 1:
            raise ExponentWindowError("p>1", f"mountain pass needs p > 1, got {p}")
        if not a0 < 2:
            raise ExponentWindowError("a0<2", f"mountain pass needs a0 < 2, got {a0}")
        need = max(0.0, 1.0 + a0 / 2.0)
        if not ai > need:
            raise ExponentWindowError("a_inf>max(0,1+a0/2)", f"a_inf={ai} must exceed {need:.6g}")
        s_inf, s_0 = critical_exponent(ai, N), critical_exponent(a0, N)
        if not s_inf < p + 1 < s_0:
            raise ExponentWindowError(
                "p+1 in (2*(a_inf), 2*(a0))", f"p+1={p + 1} must lie in ({s_inf:.6g}, {s_0:.6g})")
        lo, hi = max(lo, s_inf - 1, 1.0), min(hi, s_0 - 1)
    if not lo < p < hi:
        raise ExponentWindowError("p-window", f"p={p} must lie in ({lo:.6g}, {hi:.6g})")
    return replace(spec, window=(mode, lo, hi))


@dataclass
class IterationReport:
    k: float
    steps: int
    deltas: List[float]
    verdict: str
    solution: Optional[RadialField]
    barrier_ok: Optional[bool]
    monotone_ok: bool = True
    max_decrease: float = 0.0
    barrier: Optional[BarrierConstants] = None
    last: Optional[RadialField] = field(default=None, repr=False)

    @property
    def converged(self) -> bool:
        return self.verdict == "converged"

    def to_dict(self) -> dict:
        return {
            "k": self.k, "steps": self.steps, "verdict": self.verdict, "deltas": list(self.deltas),
            "barrier_ok": self.barrier_ok, "monotone_ok": self.monotone_ok,
            "max_decrease": self.max_decrease,
            "barrier": self.barrier.to_dict() if self.barrier else None,
        }


def _power(w: np.ndarray, r_pow: np.ndarray, p: float) -> np.ndarray:
    """u^p for u = w r^(2-N), with r_pow = r^(N-2); overflow shows up as inf."""
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        return np.exp(p * (np.log(np.maximum(w, 0.0)) - np.log(r_pow)))


def iterate_minimal(spec: ProblemSpec, grid: RadialGrid, max_iter: int = 500, tol: float = DEFAULT_TOL,
                    barrier: Optional[BarrierConstants] = None, blowup_cap: float = BLOWUP_CAP,
                    validate: bool = True) -> IterationReport:
    """Run v_0 = k G[delta], v_n = G[V v_(n-1)^p] + k G[delta].

    Convergence is declared when sup|w_n - w_(n-1)| <= tol * max(1, sup w_n) for
    the scaled iterates w = v r^(N-2).  Divergence is declared when an iterate
    leaves the supersolution w_tp (when one exists for this k) or when the
    scaled sup-norm passes ``blowup_cap``.
    """
    if not tol > 0:
        raise ValidationError("tol>0", "tolerance must be positive")
    if validate and not spec.is_zero:
        validate_exponents(spec, "minimal")
    v0 = fundamental_solution(spec, grid)
    if spec.is_zero:
        return IterationReport(spec.k, 1, [0.0], "converged", v0, None, barrier=barrier)

    if barrier is None:
        barrier = estimate_c2(spec, grid)
    upper = None
    try:
        tp = supersolution_t(spec, barrier.c2)
    except NoBarrierError:
        if spec.p == 1:
            raise
        tp = None
    if tp is not None:
        prof = barrier_profile(spec, grid)
        upper = tp * spec.k ** spec.p * prof.scaled() + v0.scaled()

    r = grid.nodes
    r_pow = r ** (spec.N - 2)
    V = spec.V(r)
    seed = v0.scaled()
    w = seed.copy()
    deltas: List[float] = []
    max_decrease = 0.0
    barrier_ok = True if upper is not None else None
    verdict = "max-iter"
    steps = 0
    for n in range(1, max_iter + 1):
        steps = n
        src = V * _power(w, r_pow, spec.p)
        if not np.all(np.isfinite(src)):
            verdict = "diverged"
            break
        w_new = green_apply(RadialField(grid, src, "raw"), spec).scaled() + seed
        if not np.all(np.isfinite(w_new)):
            verdict = "diverged"
            break
        scale = max(1.0, float(np.max(np.abs(w_new))))
        dec = float(np.max((w - w_new) / np.maximum(np.abs(w_new), 1e-300)))
        max_decrease = max(max_decrease, dec)
        delta = float(np.max(np.abs(w_new - w)))
        deltas.append(delta)
        w = w_new
        if upper is not None and np.any(w > upper * (1 + COMPARE_SLACK)):
            barrier_ok = False
            verdict = "diverged"
            break
        if np.max(w) > blowup_cap:
            verdict = "diverged"
            break
        if delta <= tol * scale:
            verdict = "converged"
            break
    monotone_ok = max_decrease <= COMPARE_SLACK
    last = RadialField(grid, w, "scaled") if np.all(np.isfinite(w)) else None
    return IterationReport(
        k=spec.k, steps=steps, deltas=deltas, verdict=verdict,
        solution=last if verdict == "converged" else None,
        barrier_ok=barrier_ok, monotone_ok=monotone_ok, max_decrease=max_decrease,
        barrier=barrier, last=last)


@dataclass
class KStarEstimate:
    k_lo: float
    k_hi: Optional[float]
    open_above: bool
    kp: Optional[float]
    probes: List[dict]
    grid_id: str
    iterations_per_probe: int
    maxiter_probes: List[float]

    @property
    def k_lo_ge_kp(self) -> Optional[bool]:
        return None if self.kp is None else bool(self.k_lo >= self.kp * (1 - 1e-12))

    @property
    def width(self) -> float:
        return math.inf if self.k_hi is None else self.k_hi - self.k_lo

    def to_dict(self) -> dict:
        return {
            "k_lo": self.k_lo, "k_hi": self.k_hi, "open_above": self.open_above, "kp": self.kp,
            "k_lo_ge_kp": self.k_lo_ge_kp, "gap_kp_to_klo": None if self.kp is None else self.k_lo - self.kp,
            "grid": self.grid_id, "iterations_per_probe": self.iterations_per_probe,
            "maxiter_probes": self.maxiter_probes, "probes": self.probes,
            "note": "k_hi is an empirical divergence proxy, not a certified bound",
        }


def bisect_kstar(spec: ProblemSpec, grid: RadialGrid, k_seed: Optional[float] = None, rel_tol: float = 1e-3,
                 max_iter: int = 500, tol: float = DEFAULT_TOL, cap_factor: float = 1e6,
                 barrier: Optional[BarrierConstants] = None) -> KStarEstimate:
    """Bracket the largest k with a convergent iteration.

    Doubles k from ``k_seed`` (default k_p for p > 1, else 1) until a probe
    diverges or k passes ``cap_factor * k_seed``; then bisects the bracket to
    relative width ``rel_tol``.  Probes ending at ``max_iter`` count as divergent
    and are listed in ``maxiter_probes``.
    """
    validate_exponents(spec, "minimal")
    if barrier is None:
        barrier = estimate_c2(spec, grid)
    kp = barrier.kp
    if k_seed is None:
        k_seed = kp if kp is not None else 1.0
    probes: List[dict] = []
    flagged: List[float] = []

    def probe(k: float) -> bool:
        rep = iterate_minimal(spec.with_(k=k), grid, max_iter=max_iter, tol=tol, barrier=barrier, validate=False)
        probes.append({"k": k, "verdict": rep.verdict, "steps": rep.steps})
        if rep.verdict == "max-iter":
            flagged.append(k)
        log.debug("probe k=%.6g -> %s in %d steps", k, rep.verdict, rep.steps)
        return rep.converged

    cap = cap_factor * k_seed
    k = k_seed
    k_lo = None
    while True:
        if probe(k):
            k_lo = k
            if k >= cap:
                return KStarEstimate(k_lo, None, True, kp, probes, grid.ident, max_iter, flagged)
            k = min(2.0 * k, cap)
        else:
            break
    k_hi = k
    if k_lo is None:
        # the seed itself failed: halve downwards
        while True:
            k_lo = k_hi / 2.0
            if probe(k_lo):
                break
            k_hi = k_lo
    while (k_hi - k_lo) > rel_tol * k_lo:
        mid = 0.5 * (k_lo + k_hi)
        if probe(mid):
            k_lo = mid
        else:
            k_hi = mid
    return KStarEstimate(k_lo, k_hi, False, kp, probes, grid.ident, max_iter, flagged)


@dataclass
class MonotonicityReport:
    max_violation: float
    ok: bool
    u1: RadialField
    u2: RadialField

    def to_dict(self) -> dict:
        return {"max_violation": self.max_violation, "ok": self.ok}


def check_monotone_in_V(spec1: ProblemSpec, spec2: ProblemSpec, grid: RadialGrid, slack: float = 1e-8,
                        **kwargs) -> MonotonicityReport:
    """Compare minimal solutions for weights V2 <= V1: expect u_(k,V2) <= u_(k,V1)."""
    r = grid.nodes
    if np.any(spec2.V(r) > spec1.V(r) * (1 + 1e-14)):
        raise OrderingError("the second weight exceeds the first at some node")
    reps = [iterate_minimal(s, grid, **kwargs) for s in (spec1, spec2)]
    for s, rep in zip((spec1, spec2), reps):
        if not rep.converged:
            raise ValidationError("converged", f"iteration for V_scale={s.V_scale} ended {rep.verdict}")
    w1, w2 = reps[0].solution.scaled(), reps[1].solution.scaled()
    viol = float(np.max((w2 - w1) / w1))
    return MonotonicityReport(max(viol, 0.0), viol <= slack, reps[0].solution, reps[1].solution)


def minimal_solution(spec: ProblemSpec, grid: RadialGrid, **kwargs) -> RadialField:
    """Converged minimal solution or a ValidationError naming the verdict."""
    rep = iterate_minimal(spec, grid, **kwargs)
    if not rep.converged:
        raise ValidationError("converged", f"minimal iteration at k={spec.k:.6g} ended {rep.verdict}")
    return rep.solution


def run_probes(specs, grid: RadialGrid, executor: Optional[Executor] = None, **kwargs) -> List[IterationReport]:
    """Independent iterations for several specs, optionally through an executor."""
    if executor is None:
        return [iterate_minimal(s, grid, **kwargs) for s in specs]
    futs = [executor.submit(iterate_minimal, s, grid, **kwargs) for s in specs]
    return [f.result() for f in futs]


__all__ = [
    "validate_exponents", "IterationReport", "iterate_minimal", "KStarEstimate", "bisect_kstar",
    "MonotonicityReport", "check_monotone_in_V", "minimal_solution", "newton_constant",
]
