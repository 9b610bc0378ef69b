"""Command line driver for single solves, convergence studies and mesh diagnostics."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .analysis import SolveConfig, compute_errors, estimate_condition, observed_rates, solve
from .assembly import PenaltyConfig, export_matrix, interface_weights
from .discretize import discretize
from .errors import (
    AssumptionIViolated,
    CardinalityViolation,
    ConfigError,
    IndefiniteDetected,
    NoLargeNeighbor,
    NonConvergence,
    NotConverged,
    OverlapDetected,
    UipdgError,
)
from .merging import run_merge, validate_merge
from .mesh import build_grid, check_assumptions, classify_elements, max_admissible_t
from .problems import EXAMPLES, make_curve, manufactured

log = logging.getLogger("uipdg")

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_SOLVER = 0, 2, 3, 4
ASSUMPTION_ERRORS = (AssumptionIViolated, NoLargeNeighbor, CardinalityViolation, OverlapDetected)
SOLVER_ERRORS = (NotConverged, IndefiniteDetected, NonConvergence)

CONVERGENCE_COLUMNS = ["h", "N", "errH1", "rateH1", "errL2", "rateL2", "errFlux", "rateFlux", "cond"]
PARAM_COLUMNS = ["example", "p", "alpha1", "alpha2", "gamma", "beta", "delta", "weights"]


@dataclass
class ExperimentConfig:
    example: str = "flower"
    domain: tuple = (0.0, 1.0, 0.0, 1.0)
    n: list = field(default_factory=lambda: [16])
    p: int = 1
    gamma: float = 100.0
    beta: float = 1.0
    delta: float = 0.25
    alpha: tuple = (1000.0, 1.0)
    contrasts: list = field(default_factory=list)
    weights: str = "harmonic"
    solver: SolveConfig = SolveConfig()
    condition: bool = True
    offset: tuple = (0.0, 0.0)
    curve: dict = field(default_factory=dict)
    export_matrix: bool = False
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "configuration must be a mapping")
        known = set(cls.__dataclass_fields__)
        for key in raw:
            if key not in known:
                raise ConfigError(key, "unknown field")
        cfg = cls()
        if "example" in raw:
            if raw["example"] not in EXAMPLES:
                raise ConfigError("example", f"must be one of {', '.join(EXAMPLES)}")
            cfg.example = raw["example"]
        if "domain" in raw:
            d = raw["domain"]
            if not (isinstance(d, (list, tuple)) and len(d) == 4):
                raise ConfigError("domain", "expected [x0, x1, y0, y1]")
            cfg.domain = tuple(float(v) for v in d)
        if "n" in raw:
            n = raw["n"]
            n = [n] if isinstance(n, int) else n
            if not isinstance(n, list) or not n:
                raise ConfigError("n", "expected a positive integer or a nonempty list")
            if any(not isinstance(v, int) or v < 2 for v in n):
                raise ConfigError("n", "mesh sizes must be integers >= 2")
            cfg.n = sorted(n)
        if "p" in raw:
            if raw["p"] not in (1, 2, 3):
                raise ConfigError("p", "supported degrees are 1, 2 and 3")
            cfg.p = int(raw["p"])
        for name in ("gamma", "beta", "delta"):
            if name in raw:
                try:
                    setattr(cfg, name, float(raw[name]))
                except (TypeError, ValueError):
                    raise ConfigError(name, "expected a number") from None
        if not cfg.gamma > 0:
            raise ConfigError("gamma", "must be positive")
        if not 0.0 < cfg.delta < 0.5:
            raise ConfigError("delta", "must lie in (0, 1/2)")
        if "alpha" in raw:
            cfg.alpha = _pair(raw["alpha"], "alpha")
        if "contrasts" in raw:
            if not isinstance(raw["contrasts"], list):
                raise ConfigError("contrasts", "expected a list of [alpha1, alpha2] pairs")
            cfg.contrasts = [_pair(c, "contrasts") for c in raw["contrasts"]]
        if "weights" in raw:
            if raw["weights"] not in ("harmonic", "arithmetic"):
                raise ConfigError("weights", "must be 'harmonic' or 'arithmetic'")
            cfg.weights = raw["weights"]
        if "solver" in raw:
            s = raw["solver"] or {}
            try:
                cfg.solver = SolveConfig(
                    method=s.get("method", "cg"), tol=float(s.get("tol", 1e-12)), maxiter=s.get("maxiter")
                )
            except (ValueError, TypeError) as exc:
                raise ConfigError("solver", str(exc)) from None
        for name in ("condition", "export_matrix"):
            if name in raw:
                setattr(cfg, name, bool(raw[name]))
        if "offset" in raw:
            cfg.offset = _pair(raw["offset"], "offset", positive=False)
        if "curve" in raw:
            if not isinstance(raw["curve"], dict):
                raise ConfigError("curve", "expected a mapping of curve parameters")
            cfg.curve = dict(raw["curve"])
        if "seed" in raw:
            cfg.seed = int(raw["seed"])
        if cfg.example == "patch" and cfg.alpha[0] != cfg.alpha[1]:
            raise ConfigError("alpha", "the patch example needs equal coefficients")
        # harmonic average must sit between the coefficients and below twice the smaller one
        for a1, a2 in [cfg.alpha] + list(cfg.contrasts):
            aw = interface_weights(a1, a2, "harmonic")[2]
            if not (min(a1, a2) * (1 - 1e-12) <= aw <= 2 * min(a1, a2) * (1 + 1e-12)):
                raise ConfigError("alpha", "inconsistent interface average")
        return cfg

    def penalty(self):
        return PenaltyConfig(self.gamma, self.beta, self.weights)

    def params(self, alpha=None):
        a1, a2 = alpha or self.alpha
        return {"example": self.example, "p": self.p, "alpha1": a1, "alpha2": a2, "gamma": self.gamma,
                "beta": self.beta, "delta": self.delta, "weights": self.weights}


def _pair(v, name, positive=True):
    if not (isinstance(v, (list, tuple)) and len(v) == 2):
        raise ConfigError(name, "expected a pair of numbers")
    try:
        a, b = float(v[0]), float(v[1])
    except (TypeError, ValueError):
        raise ConfigError(name, "expected a pair of numbers") from None
    if positive and not (a > 0 and b > 0):
        raise ConfigError(name, "coefficients must be positive")
    return (a, b)


def load_config(path) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"invalid YAML: {exc}") from None
    return ExperimentConfig.from_dict(raw)


# ---------------------------------------------------------------------------
# runners


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def run_single(cfg: ExperimentConfig, n: int, alpha=None, strict=True, condition=None):
    """Discretize, solve and measure one configuration; returns a flat result row."""
    a1, a2 = alpha or cfg.alpha
    curve = make_curve(cfg.example, cfg.offset, **cfg.curve)
    problem = manufactured(cfg.example, a1, a2)
    disc = discretize(curve, problem, n, cfg.p, cfg.penalty(), cfg.delta, cfg.domain, strict=strict)
    if not disc.validation.ok:
        log.warning("merge validation reported issues at n=%d: %s", n, disc.validation.to_dict())
    res = solve(disc.system, cfg.solver)
    cond = None
    if cfg.condition if condition is None else condition:
        cond = estimate_condition(disc.system.A).kappa
    rep = compute_errors(disc, res.x, cond=cond, solve_result=res)
    row = {"h": disc.h, "n": n, "N": disc.N, "errH1": rep.rel_energy, "errL2": rep.rel_l2,
           "errFlux": rep.rel_flux, "cond": cond, "iterations": res.iterations, "residual": res.residual,
           "merge_ok": disc.validation.ok}
    row.update(cfg.params((a1, a2)))
    return row, disc, rep


def cmd_solve(cfg, out: Path, strict):
    row, disc, rep = run_single(cfg, cfg.n[0], strict=strict)
    data = {"params": cfg.params(), "report": rep.to_dict(), "merge_validation": disc.validation.to_dict(),
            "timings": disc.timings}
    write_json(out / "solve.json", data)
    if cfg.export_matrix:
        export_matrix(disc.system.A, out / "matrix.txt")
    print(f"n={row['n']} N={row['N']} energy={rep.rel_energy:.6e} L2={rep.rel_l2:.6e} "
          f"flux={rep.rel_flux:.6e} cond={_fmt(rep.cond)}")


def convergence_rows(cfg, strict=True):
    if len(cfg.n) < 2:
        raise ConfigError("n", "a convergence study needs at least two mesh sizes")
    rows = [run_single(cfg, n, strict=strict)[0] for n in cfg.n]
    hs = [r["h"] for r in rows]
    for key, rate in (("errH1", "rateH1"), ("errL2", "rateL2"), ("errFlux", "rateFlux")):
        for r, v in zip(rows, observed_rates(hs, [r[key] for r in rows])):
            r[rate] = v
    return rows


def cmd_convergence(cfg, out: Path, strict):
    rows = convergence_rows(cfg, strict)
    write_csv(out / "convergence.csv", CONVERGENCE_COLUMNS + PARAM_COLUMNS, rows)
    write_json(out / "convergence.json", rows)
    for r in rows:
        print(" ".join(f"{c}={_fmt(r.get(c))}" for c in CONVERGENCE_COLUMNS))


def sweep_rows(cfg, strict=True):
    if not cfg.contrasts:
        raise ConfigError("contrasts", "a contrast sweep needs at least one coefficient pair")
    rows = []
    for a1, a2 in cfg.contrasts:
        row = run_single(cfg, cfg.n[0], alpha=(a1, a2), strict=strict)[0]
        row["ratio"] = a2 / a1
        rows.append(row)
    return rows


def cmd_sweep(cfg, out: Path, strict):
    rows = sweep_rows(cfg, strict)
    cols = ["ratio", "h", "N", "errH1", "errL2", "errFlux", "cond"] + PARAM_COLUMNS
    write_csv(out / "sweep_contrast.csv", cols, rows)
    write_json(out / "sweep_contrast.json", rows)
    for r in rows:
        print(" ".join(f"{c}={_fmt(r.get(c))}" for c in cols[:7]))


def mesh_report(cfg, n, strict=True):
    grid = build_grid(cfg.domain, n)
    curve = make_curve(cfg.example, cfg.offset, **cfg.curve)
    geom = classify_elements(grid, curve, strict=strict)
    merged = run_merge(geom, cfg.delta, strict=strict)
    val = validate_merge(merged)
    cells = [{"id": k, "type": c.cut_type, "pattern": c.cut_code, "area1": c.area1, "area2": c.area2,
              "arc_length": c.arc_length, "box": list(c.box)} for k, c in sorted(geom.cells.items())]
    return {
        "n": n, "h": grid.h, "params": cfg.params(),
        "interface_cells": cells,
        "small": {s.subdomain: list(s.cells) for s in merged.small},
        "macros": [m.to_dict() for sub in (1, 2) for m in merged.macros[sub]],
        "merge_validation": val.to_dict(),
        "issues": [list(i) for i in merged.issues],
    }


def cmd_mesh_report(cfg, out: Path, strict):
    data = mesh_report(cfg, cfg.n[0], strict)
    write_json(out / "mesh_report.json", data)
    print(f"n={data['n']} interface cells={len(data['interface_cells'])} macros={len(data['macros'])} "
          f"merge ok={data['merge_validation']['ok']}")


def run_check(cfg, n):
    """Assumption report plus merge feasibility; the verdict ignores the curvature criterion."""
    grid = build_grid(cfg.domain, n)
    curve = make_curve(cfg.example, cfg.offset, **cfg.curve)
    geom = classify_elements(grid, curve, strict=False)
    rep = check_assumptions(grid, curve, cfg.delta, geom=geom)
    data = rep.to_dict()
    data["assumption_III"]["t_max"] = max_admissible_t(cfg.delta)
    merge_ok, merge_error = True, None
    if rep.one_ok:
        try:
            merged = run_merge(geom, cfg.delta, strict=True)
            data["merge_validation"] = validate_merge(merged).to_dict()
        except ASSUMPTION_ERRORS as exc:
            merge_ok, merge_error = False, str(exc)
    data["merge_feasible"] = merge_ok
    data["merge_error"] = merge_error
    data["pass"] = bool(rep.one_ok and merge_ok)
    data["n"] = n
    return data


def cmd_check(cfg, out: Path, strict):
    data = run_check(cfg, cfg.n[0])
    write_json(out / "check.json", data)
    iii = data["assumption_III"]
    print(f"assumption I: {'pass' if data['assumption_I']['pass'] else 'FAIL'}; "
          f"assumption II: {'pass' if data['assumption_II']['pass'] else 'warn'}; "
          f"assumption III: {'pass' if iii['pass'] else 'warn'} (t={iii['t']:.4f}, T={iii['T']:.4f}, "
          f"bound {iii['threshold']:.4f}); merge: {'pass' if data['merge_feasible'] else 'FAIL'}")
    if not data["pass"] and strict:
        return EXIT_ASSUMPTION
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "sweep-contrast": cmd_sweep,
    "mesh-report": cmd_mesh_report,
    "check": cmd_check,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="uipdg", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="YAML experiment file")
    ap.add_argument("--strict", dest="strict", action="store_true", default=True,
                    help="abort on unsupported mesh/interface configurations (default)")
    ap.add_argument("--no-strict", dest="strict", action="store_false")
    ap.add_argument("--deterministic", action="store_true",
                    help="single-threaded, fixed-order run (the only mode; accepted for scripts)")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](cfg, out, args.strict)
        return EXIT_OK if code is None else code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ASSUMPTION_ERRORS as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except UipdgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
