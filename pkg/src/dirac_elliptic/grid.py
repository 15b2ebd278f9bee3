"""Log-spaced radial grids, quadrature in t = log r, and sampled radial fields."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DomainError, ValidationError

# end corrections of the fourth-order Gregory rule
_GREGORY = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class RadialGrid:
    """Nodes r_i = r_min * exp(i h) on [r_min, R_max] in dimension N.

    ``weights`` integrate g(r) r^(N-1) dr over [r_min, R_max]: the Jacobian
    r^N of the substitution t = log r is folded into the fourth-order
    end-corrected trapezoid rule in t.
    """

    r_min: float = 1e-6
    R_max: float = 1e6
    M: int = 4096
    N: int = 3

    def __post_init__(self):
        if not (0 < self.r_min < self.R_max) or not np.isfinite(self.R_max):
            raise ValidationError("grid", f"need 0 < r_min < R_max, got {self.r_min}, {self.R_max}")
        if int(self.M) != self.M or self.M < 8:
            raise ValidationError("grid", f"need an integer M >= 8, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self) -> float:
        return float(np.log(self.R_max / self.r_min) / (self.M - 1))

    @cached_property
    def t(self) -> np.ndarray:
        return _frozen(np.log(self.r_min) + self.h * np.arange(self.M))

    @cached_property
    def nodes(self) -> np.ndarray:
        r = np.exp(np.log(self.r_min) + self.h * np.arange(self.M))
        r[0], r[-1] = self.r_min, self.R_max
        return _frozen(r)

    @cached_property
    def gregory(self) -> np.ndarray:
        c = np.ones(self.M)
        c[:3] = _GREGORY
        c[-3:] = _GREGORY[::-1]
        return _frozen(c * self.h)

    @cached_property
    def weights(self) -> np.ndarray:
        return _frozen(self.gregory * self.nodes ** self.N)

    @property
    def ident(self) -> str:
        return f"log[{self.r_min:g},{self.R_max:g}]x{self.M}/N{self.N}"

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same interval with the spacing in log r divided by ``factor``."""
        return RadialGrid(self.r_min, self.R_max, factor * (self.M - 1) + 1, self.N)

    def integrate(self, g) -> float:
        """Quadrature of g(r) r^(N-1) over [r_min, R_max]."""
        return float(np.dot(self.weights, g))

    def index_range(self, r_a: float, r_b: float) -> np.ndarray:
        if not (self.r_min <= r_a < r_b <= self.R_max * (1 + 1e-12)):
            raise DomainError(f"interval [{r_a}, {r_b}] is not inside the grid")
        r = self.nodes
        return np.nonzero((r >= r_a * (1 - 1e-12)) & (r <= r_b * (1 + 1e-12)))[0]

    def to_dict(self) -> dict:
        return {"r_min": self.r_min, "R_max": self.R_max, "M": self.M}


def interval_integrals(G: np.ndarray, h: float) -> np.ndarray:
    """Integrals of a smooth sampled integrand over each cell [t_i, t_i+1].

    Local cubic interpolation (fourth order): centred stencil in the interior,
    one-sided on the first and last cell.
    """
    G = np.asarray(G, dtype=float)
    out = np.empty(G.size - 1)
    out[1:-1] = (-G[:-3] + 13.0 * G[1:-2] + 13.0 * G[2:-1] - G[3:]) * (h / 24.0)
    out[0] = (9.0 * G[0] + 19.0 * G[1] - 5.0 * G[2] + G[3]) * (h / 24.0)
    out[-1] = (G[-4] - 5.0 * G[-3] + 19.0 * G[-2] + 9.0 * G[-1]) * (h / 24.0)
    return out


def cumulative_from_left(G: np.ndarray, h: float) -> np.ndarray:
    """C[i] = integral of G over [t_0, t_i]."""
    cells = interval_integrals(G, h)
    return np.concatenate(([0.0], np.cumsum(cells)))


def cumulative_from_right(G: np.ndarray, h: float) -> np.ndarray:
    """C[i] = integral of G over [t_i, t_end], summed from the right end."""
    cells = interval_integrals(G, h)
    return np.concatenate((np.cumsum(cells[::-1])[::-1], [0.0]))


def loglog_slope(r: np.ndarray, f: np.ndarray) -> float | None:
    """Least-squares slope of log|f| against log r, or None if f changes sign or vanishes."""
    if f.size < 2 or np.any(f == 0) or not (np.all(f > 0) or np.all(f < 0)):
        return None
    x = np.log(r)
    y = np.log(np.abs(f))
    if not np.all(np.isfinite(y)):
        return None
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def decade_slices(grid: RadialGrid):
    """Index slices covering the first and the last decade of the grid."""
    r = grid.nodes
    head = np.nonzero(r <= r[0] * 10.0)[0]
    tail = np.nonzero(r >= r[-1] / 10.0)[0]
    if head.size < 2:
        head = np.arange(2)
    if tail.size < 2:
        tail = np.arange(grid.M - 2, grid.M)
    return head, tail


REPRESENTATIONS = ("raw", "scaled")


@dataclass(frozen=True, eq=False)
class RadialField:
    """Samples of a radial function on a grid.

    In the ``scaled`` representation ``values`` hold w(r) = u(r) r^(N-2),
    which stays bounded for fields with the fundamental-solution singularity.
    """

    grid: RadialGrid
    values: np.ndarray
    representation: str = "raw"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.M,):
            raise ValidationError("field", f"expected {self.grid.M} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("field", "field values must be finite")
        if self.representation not in REPRESENTATIONS:
            raise ValidationError("field", f"unknown representation {self.representation!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def _factor(self) -> np.ndarray:
        return self.grid.nodes ** (self.grid.N - 2)

    def raw(self) -> np.ndarray:
        if self.representation == "raw":
            return self.values
        return self.values / self._factor

    def scaled(self) -> np.ndarray:
        if self.representation == "scaled":
            return self.values
        return self.values * self._factor

    def as_raw(self) -> "RadialField":
        return self if self.representation == "raw" else RadialField(self.grid, self.raw(), "raw")

    def as_scaled(self) -> "RadialField":
        return self if self.representation == "scaled" else RadialField(self.grid, self.scaled(), "scaled")

    def __add__(self, other: "RadialField") -> "RadialField":
        if other.grid != self.grid:
            raise ValidationError("field", "fields live on different grids")
        if self.representation == other.representation:
            return RadialField(self.grid, self.values + other.values, self.representation)
        return RadialField(self.grid, self.scaled() + other.scaled(), "scaled")

    def __mul__(self, c: float) -> "RadialField":
        return RadialField(self.grid, c * self.values, self.representation)

    __rmul__ = __mul__

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "value", "representation"])
        for r, v in zip(self.grid.nodes, self.values):
            w.writerow([repr(float(r)), repr(float(v)), self.representation])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, N: int) -> "RadialField":
        """Read a field written by :meth:`to_csv`; ``source`` is a path or CSV text."""
        text = Path(source).read_text() if not (isinstance(source, str) and "\n" in source) else source
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["r", "value", "representation"]:
            raise ValidationError("csv", "header must be 'r,value,representation'")
        body = [row for row in rows[1:] if row]
        r = np.array([float(row[0]) for row in body])
        vals = np.array([float(row[1]) for row in body])
        reps = {row[2].strip() for row in body}
        if len(reps) != 1:
            raise ValidationError("csv", "mixed representations in one file")
        if r.size < 8:
            raise ValidationError("csv", "too few rows for a grid")
        grid = RadialGrid(float(r[0]), float(r[-1]), r.size, N)
        if not np.allclose(grid.nodes, r, rtol=1e-9, atol=0):
            raise ValidationError("csv", "radii are not a log-spaced grid")
        return cls(grid, vals, reps.pop())
