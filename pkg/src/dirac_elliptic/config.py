"""JSON run configuration with defaults for every field and strict key checking."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Optional

from .errors import ValidationError
from .grid import RadialGrid
from .problem import ProblemSpec


def _build(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError("config", f"section '{where}' must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError("config", f"unknown keys in '{where}': {sorted(unknown)}")
    return cls(**data)


@dataclass
class GridConfig:
    r_min: float = 1e-6
    R_max: float = 1e6
    M: int = 4096

    def make(self, N: int) -> RadialGrid:
        return RadialGrid(self.r_min, self.R_max, self.M, N)


@dataclass
class KStarConfig:
    rel_tol: float = 1e-3
    k_seed: Optional[float] = None
    cap_factor: float = 1e6


@dataclass
class StabilityConfig:
    k_over_kp: List[float] = field(default_factory=lambda: [0.1 * i for i in range(1, 11)])
    hardy_field: str = "solution"


@dataclass
class MountainPassConfig:
    path_size: int = 41
    max_deform: int = 2000
    grad_tol: float = 1e-6
    refine: bool = True


@dataclass
class VerifyConfig:
    annulus: List[float] = field(default_factory=lambda: [1e-3, 1e3])
    residual_tol: float = 1e-4
    weak_tol: float = 1e-6


@dataclass
class SweepConfig:
    axis: str = "k"
    values: List[float] = field(default_factory=list)
    values_over_kp: bool = False
    mountain_pass: bool = False

    def __post_init__(self):
        if self.axis not in ("k", "p", "c1"):
            raise ValidationError("sweep.axis", f"axis must be k, p or c1, got {self.axis!r}")


@dataclass
class RunConfig:
    """Everything a run needs; ``spec.k`` is replaced by ``k_over_kp * k_p`` when that is set."""

    spec: ProblemSpec = field(default_factory=ProblemSpec)
    k_over_kp: Optional[float] = None
    grid: GridConfig = field(default_factory=GridConfig)
    tol: float = 1e-10
    max_iter: int = 500
    seed: int = 0
    solution_csv: Optional[str] = None
    output_dir: str = "out"
    workers: int = 1
    kstar: KStarConfig = field(default_factory=KStarConfig)
    stability: StabilityConfig = field(default_factory=StabilityConfig)
    mountain_pass: MountainPassConfig = field(default_factory=MountainPassConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValidationError("tol>0", "tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValidationError("max_iter", "max_iter must be a positive integer")
        if self.k_over_kp is not None and not self.k_over_kp > 0:
            raise ValidationError("k_over_kp", "k_over_kp must be positive")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValidationError("workers", "workers must be a positive integer")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ValidationError("config", "the configuration must be a JSON object")
        sections = {"grid": GridConfig, "kstar": KStarConfig, "stability": StabilityConfig,
                    "mountain_pass": MountainPassConfig, "verify": VerifyConfig, "sweep": SweepConfig}
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValidationError("config", f"unknown top-level keys: {sorted(unknown)}")
        kw = {}
        for key, value in data.items():
            if key == "spec":
                kw[key] = ProblemSpec.from_dict(value or {})
            elif key in sections:
                kw[key] = _build(sections[key], value, key)
            else:
                kw[key] = value
        try:
            return cls(**kw)
        except TypeError as exc:
            raise ValidationError("config", str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ValidationError("config", f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError("config", f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["spec"] = self.spec.to_dict()
        for key in ("grid", "kstar", "stability", "mountain_pass", "verify", "sweep"):
            d[key] = asdict(d[key])
        return d

    def make_grid(self) -> RadialGrid:
        return self.grid.make(self.spec.N)
