"""Command line entry point: ``dirac-elliptic <subcommand> --config run.json``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from .config import RunConfig
from .errors import DomainError, NumericalError, ValidationError
from .grid import RadialField
from .kernel import estimate_c2
from .minimal import bisect_kstar, iterate_minimal, validate_exponents
from .mountainpass import EnergyContext, mountain_pass
from .stability import assemble_forms, hardy_bound_check, lambda1, stability_margin, stability_sweep
from .verify import verify_solution

log = logging.getLogger("dirac_elliptic")

SUBCOMMANDS = ("solve-minimal", "estimate-kp", "kstar", "stability", "stability-sweep",
               "mountain-pass", "verify", "pipeline", "sweep")
OUT_ENV = "DIRAC_ELLIPTIC_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _clean(obj):
    """Make a report JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


class Run:
    """One configured run; caches the shared intermediate results of a pipeline."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.grid = cfg.make_grid()
        self.base = cfg.spec
        self._barrier = None
        self._minimal = None
        self._kstar = None
        self.summary = {}

    def write_json(self, name: str, data: dict):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")

    def write_text(self, name: str, text: str):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(text)

    @property
    def barrier(self):
        if self._barrier is None:
            self._barrier = estimate_c2(self.base, self.grid)
        return self._barrier

    @property
    def spec(self):
        if self.cfg.k_over_kp is None:
            return self.base
        if self.barrier.kp is None:
            raise ValidationError("k_over_kp", "k_over_kp needs p > 1 so that k_p exists")
        return self.base.with_(k=self.cfg.k_over_kp * self.barrier.kp)

    def minimal(self):
        if self._minimal is None:
            self._minimal = iterate_minimal(self.spec, self.grid, max_iter=self.cfg.max_iter,
                                            tol=self.cfg.tol, barrier=self.barrier)
        return self._minimal

    def solution_input(self) -> Optional[RadialField]:
        """Field from ``solution_csv`` if configured, else the minimal solution."""
        if self.cfg.solution_csv:
            f = RadialField.from_csv(self.cfg.solution_csv, self.spec.N)
            if f.grid != self.grid:
                raise ValidationError("solution_csv", "the CSV radii do not match the configured grid")
            return f
        rep = self.minimal()
        return rep.solution

    # subcommands -------------------------------------------------------

    def estimate_kp(self):
        b = self.barrier
        data = {**b.to_dict(), "grid": self.grid.ident}
        self.write_json("barrier.json", data)
        self.summary["barrier"] = data

    def solve_minimal(self):
        rep = self.minimal()
        data = rep.to_dict()
        self.write_json("iteration_report.json", data)
        if rep.solution is not None:
            self.write_text("minimal_solution.csv", rep.solution.to_csv())
        self.summary["minimal"] = {"verdict": rep.verdict, "steps": rep.steps, "k": rep.k}

    def kstar(self):
        if self._kstar is None:
            kc = self.cfg.kstar
            self._kstar = bisect_kstar(self.base, self.grid, k_seed=kc.k_seed, rel_tol=kc.rel_tol,
                                       max_iter=self.cfg.max_iter, tol=self.cfg.tol, cap_factor=kc.cap_factor,
                                       barrier=self.barrier)
        data = self._kstar.to_dict()
        self.write_json("kstar.json", data)
        self.summary["kstar"] = {k: data[k] for k in ("k_lo", "k_hi", "open_above", "kp", "k_lo_ge_kp")}

    def stability(self):
        u = self.solution_input()
        if u is None:
            self._flag("stability", "minimal iteration did not converge")
            return
        spec = self.spec
        forms = assemble_forms(u, spec, self.grid)
        rep = lambda1(forms)
        hardy = hardy_bound_check(u, spec, self.grid, self.cfg.stability.hardy_field, forms=forms)
        data = {**rep.to_dict(), "k": spec.k, "hardy": hardy.to_dict()}
        if self._kstar is not None and self._kstar.k_hi is not None and spec.k < self._kstar.k_hi \
                and math.isfinite(rep.lambda1):
            data["margin_report"] = stability_margin(spec.k, self._kstar.k_hi, spec.p, rep).to_dict()
        self.write_json("stability.json", data)
        if rep.eigenfunction is not None:
            self.write_text("eigenfunction.csv", rep.eigenfunction.to_csv())
        self.summary["stability"] = {"lambda1": rep.lambda1, "stable": rep.stable, "margin": rep.margin}

    def stability_sweep(self):
        kp = self.barrier.kp
        if kp is None:
            raise ValidationError("stability-sweep", "the sweep is expressed in units of k_p, which needs p > 1")
        if self._kstar is None:
            self.kstar()
        ks = [f * kp for f in self.cfg.stability.k_over_kp]
        sw = stability_sweep(self.base, self.grid, ks, self._kstar.k_hi, max_iter=self.cfg.max_iter,
                             tol=self.cfg.tol, barrier=self.barrier)
        self.write_text("stability_sweep.csv", sw.to_csv())
        data = {"kstar_hi": sw.kstar_hi, "c3_inf": sw.c3_inf, "lambda_nonincreasing": sw.lambda_nonincreasing,
                "empirical": True, "rows": [r.__dict__ for r in sw.rows]}
        self.write_json("stability_sweep.json", data)
        self.summary["stability_sweep"] = {k: data[k] for k in ("c3_inf", "lambda_nonincreasing")}

    def mountain_pass(self):
        spec = validate_exponents(self.spec, "mountain-pass-radial")
        u = self.solution_input()
        if u is None:
            self._flag("mountain_pass", "minimal iteration did not converge")
            return None
        mc = self.cfg.mountain_pass
        ctx = EnergyContext.build(u, spec, self.grid, validate=False)
        rep = mountain_pass(ctx, path_size=mc.path_size, max_deform=mc.max_deform, grad_tol=mc.grad_tol,
                            seed=self.cfg.seed, refine=mc.refine)
        self.write_json("mountain_pass.json", rep.to_dict())
        self.write_text("path_energy.csv", rep.path.to_csv())
        lines = ["r,u_min,v_k,v_refined,second_solution"]
        cols = (self.grid.nodes, u.raw(), rep.v_k.raw(), rep.v_refined.raw(), rep.second_solution.raw())
        for row in zip(*cols):
            lines.append(",".join(repr(float(x)) for x in row))
        self.write_text("solutions.csv", "\n".join(lines) + "\n")
        self.summary["mountain_pass"] = {"level_c": rep.level_c, "beta_floor": rep.beta_floor,
                                         "grad_norm": rep.grad_norm, "converged": rep.converged}
        return rep

    def verify(self, fields=None):
        vc = self.cfg.verify
        if fields is None:
            u = self.solution_input()
            if u is None:
                self._flag("verify", "no solution to verify")
                return
            fields = {"solution": u}
        out = {}
        for name, u in fields.items():
            rep = verify_solution(u, self.spec, self.grid, tuple(vc.annulus), vc.residual_tol, vc.weak_tol)
            out[name] = rep.to_dict()
        self.write_json("verification.json", out)
        self.summary["verify"] = {name: d["passed"] for name, d in out.items()}

    def pipeline(self):
        self.estimate_kp()
        self.solve_minimal()
        if self.base.p > 1:
            self.kstar()
        self.stability()
        fields = {}
        if self.minimal().solution is not None:
            fields["minimal"] = self.minimal().solution
        try:
            validate_exponents(self.spec, "mountain-pass-radial")
            mp_ok = True
        except ValidationError as exc:
            self._flag("mountain_pass", f"skipped: {exc}")
            mp_ok = False
        if mp_ok and fields:
            rep = self.mountain_pass()
            if rep is not None and rep.converged:
                fields["second"] = rep.second_solution
        if fields:
            self.verify(fields)
        self.write_json("pipeline.json", self.summary)

    def sweep(self):
        sc = self.cfg.sweep
        if not sc.values:
            raise ValidationError("sweep.values", "the sweep needs at least one value")
        jobs = [(self.cfg, sc.axis, v) for v in sc.values]
        if self.cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=self.cfg.workers) as ex:
                rows = list(ex.map(_sweep_row, *zip(*jobs)))
        else:
            rows = [_sweep_row(*j) for j in jobs]
        cols = ["axis", "value", "k", "c2", "kp", "verdict", "steps", "lambda1", "margin", "level_c", "error"]
        lines = [",".join(cols)]
        for row in rows:
            lines.append(",".join("" if row.get(c) is None else str(row.get(c)) for c in cols))
        self.write_text("sweep.csv", "\n".join(lines) + "\n")
        self.write_json("sweep.json", {"rows": rows})
        self.summary["sweep"] = {"rows": len(rows), "failed": sum(1 for r in rows if r.get("error"))}

    def _flag(self, key: str, message: str):
        log.warning("%s: %s", key, message)
        self.summary.setdefault("flags", {})[key] = message


def _sweep_row(cfg: RunConfig, axis: str, value: float) -> dict:
    """One independent sweep row; failures are recorded in the row."""
    row = {"axis": axis, "value": value}
    try:
        base = cfg.spec
        if axis == "p":
            base = base.with_(p=value)
        elif axis == "c1":
            base = base.with_(c1=value)
        validate_exponents(base, "minimal")
        grid = cfg.make_grid()
        b = estimate_c2(base, grid)
        row.update(c2=b.c2, kp=b.kp)
        k = base.k
        if axis == "k":
            k = value * b.kp if cfg.sweep.values_over_kp else value
        elif cfg.k_over_kp is not None and b.kp is not None:
            k = cfg.k_over_kp * b.kp
        spec = base.with_(k=k)
        row["k"] = k
        rep = iterate_minimal(spec, grid, max_iter=cfg.max_iter, tol=cfg.tol, barrier=b)
        row.update(verdict=rep.verdict, steps=rep.steps)
        if rep.converged:
            st = lambda1(assemble_forms(rep.solution, spec, grid))
            row.update(lambda1=st.lambda1, margin=st.margin)
            if cfg.sweep.mountain_pass:
                ctx = EnergyContext.build(rep.solution, spec, grid)
                mp = mountain_pass(ctx, path_size=cfg.mountain_pass.path_size,
                                   max_deform=cfg.mountain_pass.max_deform,
                                   grad_tol=cfg.mountain_pass.grad_tol, seed=cfg.seed, refine=False)
                row["level_c"] = mp.level_c
    except (ValidationError, NumericalError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return _clean(row)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirac-elliptic",
                                 description="Radial solver for -Laplace u = V u^p + k delta_0.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON run configuration (defaults apply when omitted)")
    ap.add_argument("--out", help=f"output directory (overrides the config and ${OUT_ENV})")
    ap.add_argument("--workers", type=int, help="worker processes for sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.workers is not None:
            cfg.workers = args.workers
            cfg.__post_init__()
        out = Path(args.out or os.environ.get(OUT_ENV) or cfg.output_dir)
        run = Run(cfg, out)
        getattr(run, args.subcommand.replace("-", "_"))()
    except (ValidationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for key, msg in run.summary.get("flags", {}).items():
        print(f"flagged: {key}: {msg}", file=sys.stderr)
    print(json.dumps(_clean(run.summary), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
