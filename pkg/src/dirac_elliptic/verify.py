"""Classical and weak residuals, the singular coefficient at the origin and the decay law."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import TestFunctionError
from .grid import RadialField, RadialGrid
from .kernel import newton_constant
from .problem import ProblemSpec, sphere_area


class CoarseGridWarning(UserWarning):
    """Extrapolation to the origin saw non-monotone data."""


def _laplacian_scaled(u: RadialField) -> np.ndarray:
    """Delta u = r^(-N) (w_tt - (N-2) w_t) with central differences in t; ends set to nan."""
    grid = u.grid
    w = u.scaled()
    h = grid.h
    out = np.full(grid.M, np.nan)
    w_tt = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / (h * h)
    w_t = (w[2:] - w[:-2]) / (2.0 * h)
    out[1:-1] = (w_tt - (grid.N - 2) * w_t) / grid.nodes[1:-1] ** grid.N
    return out


def residual_pde(u: RadialField, spec: ProblemSpec, grid: RadialGrid, annulus=(1e-3, 1e3),
                 V: Optional[np.ndarray] = None, relative: bool = True) -> float:
    """sup over annulus nodes of |-Delta u - V u^p|.

    With ``relative`` (default) each node is divided by the local scale
    u(r)/r^2, the size of the individual terms of -Delta u.  ``V`` overrides
    the weight by nodal values (used for manufactured solutions).
    """
    idx = grid.index_range(*annulus)
    idx = idx[(idx > 0) & (idx < grid.M - 1)]
    ur = u.raw()
    Vn = spec.V(grid.nodes) if V is None else np.asarray(V, dtype=float)
    res = -_laplacian_scaled(u) - Vn * np.power(np.maximum(ur, 0.0), spec.p)
    res = np.abs(res[idx])
    if relative:
        scale = np.abs(ur[idx]) / grid.nodes[idx] ** 2
        res = np.divide(res, scale, out=np.where(res == 0, 0.0, np.inf), where=scale > 0)
    return float(np.max(res))


@dataclass(frozen=True)
class BumpTest:
    """xi(r) = exp(1 - 1/(1 - s)), s = ((r - center)/width)^2, zero for s >= 1.

    ``center = 0`` gives a ball of radius ``width`` around the origin; an
    annular bump needs ``center > width`` so that xi(0) = 0.
    """

    center: float
    width: float
    __test__ = False

    def __post_init__(self):
        if not self.width > 0 or self.center < 0:
            raise TestFunctionError("bump needs width > 0 and center >= 0")
        if 0 < self.center < self.width:
            raise TestFunctionError("an off-centre bump must not reach the origin")

    @property
    def support(self):
        return max(self.center - self.width, 0.0), self.center + self.width

    def _phi(self, r):
        s = ((np.asarray(r, dtype=float) - self.center) / self.width) ** 2
        inside = s < 1
        q = np.where(inside, 1.0 / (1.0 - np.where(inside, s, 0.0)), 0.0)
        phi = np.where(inside, np.exp(1.0 - q), 0.0)
        return s, q, phi

    def value(self, r):
        return self._phi(r)[2]

    @property
    def at_origin(self) -> float:
        return float(self.value(0.0)) if self.center == 0 else 0.0

    def laplacian(self, r, N: int):
        r = np.asarray(r, dtype=float)
        s, q, phi = self._phi(r)
        d1 = -phi * q * q
        d2 = phi * (q ** 4 - 2.0 * q ** 3)
        w2 = self.width ** 2
        if self.center == 0:
            return 4.0 * s * d2 / w2 + 2.0 * N * d1 / w2
        x = r - self.center
        xi1 = 2.0 * x / w2 * d1
        xi2 = 4.0 * x * x / (w2 * w2) * d2 + 2.0 / w2 * d1
        return xi2 + (N - 1) * xi1 / r


@dataclass(frozen=True)
class LogBumpTest:
    """Annular bump in the log radius: xi = exp(1 - 1/(1 - s)), s = (log(r/center)/tau)^2.

    Its flanks have a fixed width in log r, so the log grid resolves them at
    every scale; xi(0) = 0.
    """

    center: float
    tau: float
    __test__ = False

    def __post_init__(self):
        if not (self.center > 0 and self.tau > 0):
            raise TestFunctionError("log bump needs center > 0 and tau > 0")

    @property
    def support(self):
        return self.center * math.exp(-self.tau), self.center * math.exp(self.tau)

    at_origin = 0.0

    def _phi(self, r):
        y = np.log(np.asarray(r, dtype=float) / self.center)
        s = (y / self.tau) ** 2
        inside = s < 1
        q = np.where(inside, 1.0 / (1.0 - np.where(inside, s, 0.0)), 0.0)
        return y, q, np.where(inside, np.exp(1.0 - q), 0.0)

    def value(self, r):
        return self._phi(r)[2]

    def laplacian(self, r, N: int):
        r = np.asarray(r, dtype=float)
        y, q, phi = self._phi(r)
        d1 = -phi * q * q
        d2 = phi * (q ** 4 - 2.0 * q ** 3)
        t2 = self.tau ** 2
        xi_t = 2.0 * y / t2 * d1
        xi_tt = 4.0 * y * y / (t2 * t2) * d2 + 2.0 / t2 * d1
        return (xi_tt + (N - 2) * xi_t) / (r * r)


STANDARD_BUMPS = (BumpTest(0.0, 0.5), BumpTest(0.0, 1.0), BumpTest(0.0, 4.0),
                  LogBumpTest(1.0, 1.0), LogBumpTest(3.0, 1.5))


def weak_residual(u: RadialField, spec: ProblemSpec, grid: RadialGrid,
                  xi_family: Sequence = STANDARD_BUMPS) -> List[float]:
    """|int u (-Delta xi) - int V u^p xi - k xi(0)| for each test function.

    Integrals are sigma_(N-1) int (.) r^(N-1) dr by the grid quadrature, plus
    the analytic contribution of the leading singular term below r_min.
    """
    N = grid.N
    sig = sphere_area(N)
    r = grid.nodes
    ur = u.raw()
    V = spec.V(r)
    w0 = u.scaled()[0]
    out = []
    for xi in xi_family:
        if xi.support[1] >= grid.R_max:
            raise TestFunctionError(f"test function supported up to {xi.support[1]} reaches R_max")
        lap = xi.laplacian(r, N)
        lin = sig * grid.integrate(ur * -lap)
        # u ~ w0 r^(2-N) below r_min: int_0^rmin w0 r (-Delta xi(0)) dr
        lap0 = float(xi.laplacian(np.array([r[0]]), N)[0])
        lin += sig * w0 * (-lap0) * r[0] ** 2 / 2.0
        nl = sig * grid.integrate(V * np.power(np.maximum(ur, 0.0), spec.p) * xi.value(r))
        out.append(float(abs(lin - nl - spec.k * xi.at_origin)))
    return out


def singular_coefficient(u: RadialField):
    """Quadratic extrapolation of w = u r^(N-2) to r = 0 from the three smallest nodes."""
    r = u.grid.nodes[:3]
    w = u.scaled()[:3]
    d = np.diff(w)
    monotone = bool(np.all(d >= 0) or np.all(d <= 0))
    if not monotone:
        warnings.warn("scaled field is not monotone at the first nodes; refine near the origin",
                      CoarseGridWarning, stacklevel=2)
    # Lagrange interpolation through (r_i, w_i) evaluated at 0
    l0 = r[1] * r[2] / ((r[0] - r[1]) * (r[0] - r[2]))
    l1 = r[0] * r[2] / ((r[1] - r[0]) * (r[1] - r[2]))
    l2 = r[0] * r[1] / ((r[2] - r[0]) * (r[2] - r[1]))
    return float(l0 * w[0] + l1 * w[1] + l2 * w[2]), monotone


@dataclass
class VerificationReport:
    residual_sup: float
    weak_residuals: List[float]
    singular_coeff: float
    singular_target: float
    decay_sup: float
    tail_ratio: float
    extrapolation_monotone: bool
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "residual_sup": self.residual_sup, "weak_residuals": self.weak_residuals,
            "singular_coeff": self.singular_coeff, "singular_target": self.singular_target,
            "decay_sup": self.decay_sup, "tail_ratio": self.tail_ratio,
            "extrapolation_monotone": self.extrapolation_monotone, "checks": self.checks,
            "passed": self.passed,
        }


def check_singularity_and_decay(u: RadialField, spec: ProblemSpec, rel_tol: float = 0.02):
    """Singular coefficient against c_N k, and boundedness and flattening of u r^(N-2).

    Returns ``(singular_coeff, target, decay_sup, tail_ratio, monotone, checks)``
    where tail_ratio is the relative change of w over the last decade.
    """
    target = newton_constant(spec.N) * spec.k
    coeff, monotone = singular_coefficient(u)
    w = u.scaled()
    decay_sup = float(np.max(w))
    tail = w[u.grid.nodes >= u.grid.R_max / 10.0]
    tail_ratio = float((np.max(tail) - np.min(tail)) / max(abs(tail[-1]), np.finfo(float).tiny))
    checks = {
        "singular_coeff": bool(abs(coeff - target) <= rel_tol * target) if target > 0 else abs(coeff) == 0,
        "decay_finite": bool(math.isfinite(decay_sup)),
        "tail_flat": bool(tail_ratio <= 1e-2),
    }
    return coeff, target, decay_sup, tail_ratio, monotone, checks


def verify_solution(u: RadialField, spec: ProblemSpec, grid: RadialGrid, annulus=(1e-3, 1e3),
                    residual_tol: float = 1e-4, weak_tol: float = 1e-6,
                    xi_family: Sequence = STANDARD_BUMPS) -> VerificationReport:
    """All checks on one solution field; ``weak_tol`` is relative to k."""
    res = residual_pde(u, spec, grid, annulus)
    weak = weak_residual(u, spec, grid, xi_family)
    coeff, target, dsup, tail_ratio, mono, checks = check_singularity_and_decay(u, spec)
    checks = {"residual_pde": bool(res <= residual_tol),
              "weak_residual": bool(max(weak) <= weak_tol * max(spec.k, np.finfo(float).tiny)), **checks}
    return VerificationReport(res, weak, coeff, target, dsup, tail_ratio, mono, checks)


def manufactured_weight(grid: RadialGrid, p: float) -> tuple:
    """u = exp(-r^2) and the nodal V with -Delta u = V u^p."""
    r = grid.nodes
    u = np.exp(-r * r)
    # V = (2N - 4 r^2) exp((p-1) r^2); cut to 0 where V u^p is below double range anyway
    expo = (p - 1.0) * r * r
    V = np.where(expo < 600.0, (2.0 * grid.N - 4.0 * r * r) * np.exp(np.minimum(expo, 600.0)), 0.0)
    return RadialField(grid, u, "raw"), V
