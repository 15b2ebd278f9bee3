"""Problem data: dimension, exponent, source strength and the radial weight V."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from .errors import DomainError, ValidationError


def potential_V0(r, spec: "ProblemSpec"):
    """Upper envelope c1 / (r^a0 (1 + r^(a_inf - a0))) of the weight.

    Accepts scalars or arrays; ``r`` must be strictly positive.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0) or not np.all(np.isfinite(r_arr)):
        raise DomainError("potential_V0 requires r > 0")
    # r^a0 (1 + r^(a_inf-a0)) = r^a0 + r^a_inf, evaluated in log form to avoid overflow
    lr = np.log(r_arr)
    big = np.maximum(spec.a0 * lr, spec.a_inf * lr)
    small = np.minimum(spec.a0 * lr, spec.a_inf * lr)
    val = spec.c1 * np.exp(-big) / (1.0 + np.exp(small - big))
    if np.ndim(val) == 0:
        return float(val)
    return val


@dataclass(frozen=True)
class TabulatedPotential:
    """Radial weight given by samples ``values`` at radii ``r``.

    Evaluation interpolates the ratio V/V0 linearly in log r and holds the end
    ratios constant outside the table, so the tail inherits the power laws of V0.
    """

    r: tuple
    values: tuple

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValidationError("potential", "tabulated potential needs matching 1-D r and V arrays")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ValidationError("potential", "tabulated radii must be positive and increasing")
        if not np.all(np.isfinite(v)):
            raise ValidationError("potential", "tabulated values must be finite")
        object.__setattr__(self, "r", tuple(r.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))

    def ratio(self, spec: "ProblemSpec") -> np.ndarray:
        r = np.asarray(self.r)
        return np.asarray(self.values) / potential_V0(r, spec)

    def __call__(self, r, spec: "ProblemSpec"):
        r_arr = np.asarray(r, dtype=float)
        q = np.interp(np.log(r_arr), np.log(np.asarray(self.r)), self.ratio(spec))
        return q * potential_V0(r_arr, spec)


@dataclass(frozen=True)
class ProblemSpec:
    """The tuple (N, p, k, a0, a_inf, c1) and the weight V.

    ``potential`` is ``"V0"`` for the closed-form envelope, ``"zero"`` for
    V = 0, or a :class:`TabulatedPotential` dominated by V0.  ``V_scale``
    multiplies whichever weight is chosen; values above 1 are allowed only for
    experiments that deliberately leave the class V <= V0 (see
    :meth:`dominated`).
    """

    N: int = 3
    p: float = 2.0
    k: float = 1.0
    a0: float = 0.0
    a_inf: float = 4.0
    c1: float = 1.0
    potential: Any = "V0"
    V_scale: float = 1.0
    window: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValidationError("N>=3", f"dimension must be an integer >= 3, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not self.c1 > 0:
            raise ValidationError("c1>0", f"c1 must be positive, got {self.c1}")
        if not self.p > 0:
            raise ValidationError("p>0", f"p must be positive, got {self.p}")
        if not self.k >= 0:
            raise ValidationError("k>=0", f"k must be nonnegative, got {self.k}")
        if not self.a0 < self.N:
            raise ValidationError("a0<N", f"a0={self.a0} must be below N={self.N}")
        if not self.a_inf > self.a0:
            raise ValidationError("a_inf>a0", f"a_inf={self.a_inf} must exceed a0={self.a0}")
        if not self.V_scale >= 0:
            raise ValidationError("V_scale>=0", "V_scale must be nonnegative")
        if isinstance(self.potential, str):
            if self.potential not in ("V0", "zero"):
                raise ValidationError("potential", f"unknown potential {self.potential!r}")
        elif not isinstance(self.potential, TabulatedPotential):
            raise ValidationError("potential", "potential must be 'V0', 'zero' or TabulatedPotential")

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    @property
    def is_zero(self) -> bool:
        return self.V_scale == 0 or self.potential == "zero"

    def V0(self, r):
        return potential_V0(r, self)

    def V(self, r):
        """Evaluate the weight V at ``r``."""
        r_arr = np.asarray(r, dtype=float)
        if self.is_zero:
            return np.zeros_like(r_arr) if r_arr.ndim else 0.0
        if isinstance(self.potential, TabulatedPotential):
            out = self.potential(r_arr, self)
        else:
            out = potential_V0(r_arr, self)
        return self.V_scale * out

    def dominated(self, r) -> bool:
        """True when V <= V0 holds at every radius in ``r``."""
        r_arr = np.asarray(r, dtype=float)
        return bool(np.all(self.V(r_arr) <= self.V0(r_arr) * (1 + 1e-12)))

    def check_dominated(self, r) -> None:
        if not self.dominated(r):
            raise ValidationError("V<=V0", "the weight exceeds the envelope V0 at some sample node")

    def to_dict(self) -> dict:
        d = {"N": self.N, "p": self.p, "k": self.k, "a0": self.a0, "a_inf": self.a_inf,
             "c1": self.c1, "V_scale": self.V_scale}
        if isinstance(self.potential, TabulatedPotential):
            d["potential"] = {"r": list(self.potential.r), "V": list(self.potential.values)}
        else:
            d["potential"] = self.potential
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemSpec":
        allowed = {"N", "p", "k", "a0", "a_inf", "c1", "potential", "V_scale"}
        unknown = set(d) - allowed
        if unknown:
            raise ValidationError("config", f"unknown spec keys: {sorted(unknown)}")
        d = dict(d)
        pot = d.get("potential", "V0")
        if isinstance(pot, dict):
            if set(pot) != {"r", "V"}:
                raise ValidationError("config", "tabulated potential needs exactly keys 'r' and 'V'")
            d["potential"] = TabulatedPotential(tuple(pot["r"]), tuple(pot["V"]))
        return cls(**d)


def critical_exponent(t: float, N: int) -> float:
    """Weighted critical exponent 2*(t) = (2N - 2t)/(N - 2)."""
    return (2.0 * N - 2.0 * t) / (N - 2.0)


def sphere_area(N: int) -> float:
    """Area of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2.0) / math.gamma(N / 2.0)
