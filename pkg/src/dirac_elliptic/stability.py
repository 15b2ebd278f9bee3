"""Linearized quadratic forms at a solution, the first eigenvalue and stability margins."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded
from scipy.sparse import diags
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import AssemblyError, DomainError, ValidationError
from .grid import RadialField, RadialGrid
from .kernel import fundamental_solution
from .problem import ProblemSpec, sphere_area

EIG_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuadraticForms:
    """Stiffness A and lumped weighted mass B on the free nodes 0..M-2.

    ``A_band`` is the symmetric tridiagonal A in upper banded storage
    (row 0: superdiagonal, row 1: diagonal); ``B_diag`` holds the diagonal of
    B, i.e. sigma_(N-1) w_i V_i u_i^(p-1).  The node at R_max carries the
    Dirichlet condition and is excluded.
    """

    grid: RadialGrid
    p: float
    A_band: np.ndarray
    B_diag: np.ndarray
    boundary: str = "dirichlet at R_max, natural at r_min"

    @property
    def n(self) -> int:
        return self.B_diag.size

    @property
    def A(self):
        """A as a scipy sparse matrix."""
        return diags([self.A_band[0, 1:], self.A_band[1], self.A_band[0, 1:]], [-1, 0, 1], format="csr")

    @property
    def B(self):
        return diags(self.B_diag, 0, format="csr")

    def restrict(self, xi) -> np.ndarray:
        """Free-node values of a field (or plain array over all nodes)."""
        v = xi.raw() if isinstance(xi, RadialField) else np.asarray(xi, dtype=float)
        if v.size == self.grid.M:
            return v[:-1]
        if v.size != self.n:
            raise ValidationError("field", f"expected {self.grid.M} or {self.n} samples, got {v.size}")
        return v

    def extend(self, x: np.ndarray) -> RadialField:
        return RadialField(self.grid, np.append(x, 0.0), "raw")

    def A_apply(self, x: np.ndarray) -> np.ndarray:
        up = self.A_band[0, 1:]
        y = self.A_band[1] * x
        y[:-1] += up * x[1:]
        y[1:] += up * x[:-1]
        return y

    def A_form(self, xi, eta=None) -> float:
        x = self.restrict(xi)
        y = x if eta is None else self.restrict(eta)
        return float(np.dot(y, self.A_apply(x)))

    def B_form(self, xi, eta=None) -> float:
        x = self.restrict(xi)
        y = x if eta is None else self.restrict(eta)
        return float(np.dot(y, self.B_diag * x))

    @property
    def cholesky(self) -> np.ndarray:
        c = getattr(self, "_chol", None)
        if c is None:
            c = cholesky_banded(self.A_band, lower=False)
            object.__setattr__(self, "_chol", c)
        return c

    def A_solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.cholesky, False), b)

    def scaled_B(self, s: float) -> "QuadraticForms":
        return QuadraticForms(self.grid, self.p, self.A_band, s * self.B_diag, self.boundary)


def stiffness_band(grid: RadialGrid) -> np.ndarray:
    """Exact P1 stiffness of sigma int xi_t^2 e^((N-2) t) dt on the log grid, last node removed."""
    N, h = grid.N, grid.h
    t = grid.t
    a = N - 2.0
    # per-element conductance sigma int_e e^(a t) dt / h^2
    kappa = sphere_area(N) * np.exp(a * t[:-1]) * np.expm1(a * h) / (a * h * h)
    diag = np.zeros(grid.M)
    diag[:-1] += kappa
    diag[1:] += kappa
    band = np.zeros((2, grid.M - 1))
    band[1] = diag[:-1]
    band[0, 1:] = -kappa[:-1]
    return band


def assemble_forms(u: RadialField, spec: ProblemSpec, grid: RadialGrid) -> QuadraticForms:
    """Discretize int |grad xi|^2 and int V u^(p-1) xi^2 with P1 elements in log r."""
    if u.grid != grid:
        raise ValidationError("grid", "field and grid differ")
    ur = u.raw()
    if np.any(ur < 0):
        raise ValidationError("u>=0", "the linearization point must be nonnegative")
    V = spec.V(grid.nodes)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        pot = np.where(V > 0, V * np.power(ur, spec.p - 1.0), 0.0)
    B = sphere_area(grid.N) * grid.weights * pot
    if not np.all(np.isfinite(B)):
        raise AssemblyError("V u^(p-1) is not finite on the grid; the exponent window is likely violated")
    if B[0] > 1e-6 * max(float(np.sum(B)), np.finfo(float).tiny):
        raise AssemblyError("V u^(p-1) r^N does not vanish at r_min; the weight is not integrable near 0")
    return QuadraticForms(grid, spec.p, stiffness_band(grid), B[:-1].copy())


@dataclass
class StabilityReport:
    lambda1: float
    eigenfunction: Optional[RadialField]
    stable: bool
    semi_stable: bool
    margin: float
    rayleigh: float = math.inf
    residual: float = 0.0

    def to_dict(self) -> dict:
        return {"lambda1": _num(self.lambda1), "stable": self.stable, "semi_stable": self.semi_stable,
                "margin": self.margin, "rayleigh_quotient": _num(self.rayleigh), "eig_residual": self.residual}


def _num(x: float):
    return x if math.isfinite(x) else "inf"


def lambda1(forms: QuadraticForms, tol: float = EIG_TOL) -> StabilityReport:
    """Smallest lambda with A xi = lambda p B xi.

    Computes the top eigenpair of the symmetric operator S A^(-1) S, S = (pB)^(1/2),
    with ARPACK and polishes it by inverse iteration until the relative residual
    of A xi - lambda p B xi (measured in the A^(-1) norm) is below ``tol``.
    """
    pB = forms.p * forms.B_diag
    if not np.any(pB > 0):
        return StabilityReport(math.inf, None, True, True, 1.0)
    S = np.sqrt(pB)
    n = forms.n
    op = LinearOperator((n, n), matvec=lambda y: S * forms.A_solve(S * np.ravel(y)), dtype=float)
    mu, vec = eigsh(op, k=1, which="LA", tol=1e-13, ncv=min(n, 40), v0=np.sqrt(S + 1e-300))
    mu = float(mu[0])
    x = forms.A_solve(S * vec[:, 0])
    residual = math.inf
    for _ in range(50):
        Ax = forms.A_apply(x)
        lam = float(np.dot(x, Ax) / np.dot(x, pB * x))
        r = Ax - lam * pB * x
        residual = math.sqrt(max(np.dot(r, forms.A_solve(r)), 0.0) / np.dot(x, Ax))
        if residual <= tol:
            break
        x = forms.A_solve(pB * x)
        x /= math.sqrt(np.dot(x, forms.A_apply(x)))
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    x /= math.sqrt(forms.A_form(x))
    lam = forms.A_form(x) / (forms.p * forms.B_form(x))
    neg = float(-np.min(x) / np.max(x))
    if neg > 1e-8:
        raise AssemblyError(f"first eigenfunction changes sign (relative undershoot {neg:.3g})")
    x = np.maximum(x, 0.0)
    return StabilityReport(lambda1=lam, eigenfunction=forms.extend(x), stable=lam > 1, semi_stable=lam >= 1,
                           margin=1.0 - 1.0 / lam, rayleigh=lam, residual=residual)


@dataclass
class HardyReport:
    sup_ratio: float
    C: float
    hardy_product: float
    applies: bool
    field_mode: str
    worst_test_ratio: Optional[float]
    tests_ok: Optional[bool]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def hardy_test_fields(grid: RadialGrid) -> List[np.ndarray]:
    """Nonnegative test fields: bumps in log r at several centres and widths, and a plateau."""
    t = grid.t
    out = []
    for c in (-4.0, -1.0, 0.0, 1.0, 3.0):
        for w in (0.5, 2.0):
            out.append(np.exp(-((t - c) / w) ** 2))
    out.append(1.0 / (1.0 + grid.nodes))
    return [np.where(np.arange(grid.M) == grid.M - 1, 0.0, x) for x in out]


def hardy_bound_check(u: RadialField, spec: ProblemSpec, grid: RadialGrid, field_mode: str = "solution",
                      forms: Optional[QuadraticForms] = None) -> HardyReport:
    """Measure sup_r r^2 V u^(p-1) and, when Hardy's inequality applies, test p B <= A.

    With ``field_mode="bound"`` u is replaced by k G[delta], the field whose
    scaling in k is exact.  C is the sup ratio divided by k^(p-1).
    """
    if field_mode not in ("solution", "bound"):
        raise ValidationError("field_mode", f"unknown field mode {field_mode!r}")
    if field_mode == "bound":
        u = fundamental_solution(spec, grid)
    r = grid.nodes
    V = spec.V(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(V > 0, r * r * V * np.power(u.raw(), spec.p - 1.0), 0.0)
    sup_ratio = float(np.max(ratio))
    kk = spec.k ** (spec.p - 1.0) if spec.k > 0 else math.nan
    C = sup_ratio / kk if kk and math.isfinite(kk) else math.nan
    product = sup_ratio * spec.p * (2.0 / (grid.N - 2.0)) ** 2
    applies = product <= 1.0
    worst = ok = None
    if applies:
        if forms is None:
            forms = assemble_forms(u, spec, grid)
        vals = [spec.p * forms.B_form(x) / forms.A_form(x) for x in hardy_test_fields(grid)]
        worst = float(max(vals))
        ok = worst <= 1.0
    return HardyReport(sup_ratio, C, product, applies, field_mode, worst, ok)


@dataclass
class MarginReport:
    k: float
    kstar_hi: float
    m: float
    c3: float
    empirical: bool = True
    note: str = "k* replaced by the upper end of the bisection bracket"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def stability_margin(k: float, kstar_hi: float, p: float, report: StabilityReport) -> MarginReport:
    """m = 1 - 1/lambda1 and the implied constant c3 = m / (k*^((p-1)/p) - k^((p-1)/p))."""
    if not k < kstar_hi:
        raise DomainError(f"k={k} must lie below kstar_hi={kstar_hi}")
    m = 1.0 - 1.0 / report.lambda1
    e = (p - 1.0) / p
    return MarginReport(k, kstar_hi, m, m / (kstar_hi ** e - k ** e))


@dataclass
class SweepRow:
    k: float
    verdict: str
    lambda1: float = math.nan
    margin: float = math.nan
    c3: float = math.nan


@dataclass
class StabilitySweep:
    rows: List[SweepRow]
    kstar_hi: Optional[float]
    c3_inf: float = field(init=False)
    lambda_nonincreasing: bool = field(init=False)

    def __post_init__(self):
        c3 = [r.c3 for r in self.rows if math.isfinite(r.c3)]
        self.c3_inf = min(c3) if c3 else math.nan
        lam = [r.lambda1 for r in self.rows if r.verdict == "converged"]
        self.lambda_nonincreasing = all(b <= a * (1 + 1e-9) for a, b in zip(lam, lam[1:]))

    def to_csv(self) -> str:
        lines = ["k,verdict,lambda1,margin,c3"]
        for r in self.rows:
            nums = [repr(float(x)) for x in (r.lambda1, r.margin, r.c3)]
            lines.append(",".join([repr(float(r.k)), r.verdict, *nums]))
        return "\n".join(lines) + "\n"


def stability_sweep(spec: ProblemSpec, grid: RadialGrid, ks: Sequence[float], kstar_hi: Optional[float] = None,
                    **iter_kwargs) -> StabilitySweep:
    """lambda1, m(k) and c3(k) along increasing k."""
    from .minimal import iterate_minimal

    rows = []
    for k in sorted(ks):
        rep = iterate_minimal(spec.with_(k=k), grid, **iter_kwargs)
        if not rep.converged:
            rows.append(SweepRow(k, rep.verdict))
            continue
        st = lambda1(assemble_forms(rep.solution, spec.with_(k=k), grid))
        c3 = math.nan
        if kstar_hi is not None and k < kstar_hi and math.isfinite(st.lambda1):
            c3 = stability_margin(k, kstar_hi, spec.p, st).c3
        rows.append(SweepRow(k, "converged", st.lambda1, st.margin, c3))
    return StabilitySweep(rows, kstar_hi)
