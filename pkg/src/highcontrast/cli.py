"""Command-line front end: config ingestion, study orchestration, output.

Subcommands
    spectrum    finite-contrast eigenvalues on the configured grid
    limit       the contrast -> infinity limit spectrum (both branches)
    dispersion  band structure over a Bloch-number grid
    converge    contrast sweep with affine extrapolation against the limit
    validate    geometry-appropriate acceptance checks, verdict JSON

Configs are JSON documents validated against a schema before any solve;
unknown fields are rejected.  Exit codes: 0 success, 2 config error,
3 solver failure, 4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import jsonschema

from . import bloch, dtn, exact1d, fdm, limitspec, radial3d
from .geometry import (ContrastMedium, Geometry1D, Geometry2D, GeometryError,
                       RadialGeometry, medium_from_config)

__all__ = ["main", "load_config", "run_spectrum", "run_limit", "run_dispersion",
           "run_converge", "run_validate", "CONFIG_SCHEMA"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4

_MEDIUM_SCHEMA = {
    "type": "object",
    "properties": {
        "dim": {"enum": [1, 2, "radial"]},
        "domain": {"type": "array", "items": {"type": "number"},
                   "minItems": 2, "maxItems": 2},
        "inclusions": {"type": "array"},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "epsilon": {"type": "number", "minimum": 0},
        "bc": {"anyOf": [
            {"enum": ["dirichlet", "neumann"]},
            {"type": "object", "properties": {"bloch": {"type": ["number", "array"]}},
             "required": ["bloch"], "additionalProperties": False},
        ]},
    },
    "required": ["dim", "epsilon", "bc"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "medium": _MEDIUM_SCHEMA,
        "task": {"enum": ["spectrum", "limit", "dispersion", "converge", "validate"]},
        "lambda_max": {"type": "number", "exclusiveMinimum": 0},
        "count": {"type": "integer", "minimum": 1},
        "eps_list": {"type": "array", "items": {"type": "number", "minimum": 0},
                     "minItems": 1},
        "k_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "branch_count": {"type": "integer", "minimum": 1},
        "branch": {"type": "integer", "minimum": 1},
        "refine": {"type": "array", "items": {"type": "integer", "minimum": 4}},
    },
    "required": ["medium"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def load_config(path: str) -> dict:
    """Read and schema-validate a study configuration."""
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message}") from exc
    return cfg


def _medium(cfg: dict) -> ContrastMedium:
    try:
        return medium_from_config(cfg["medium"])
    except (GeometryError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad medium: {exc}") from exc


def _grid_n(cfg: dict, medium: ContrastMedium):
    """Cell count for 1D grids, from the medium's h entry (None elsewhere)."""
    geom = medium.geometry
    if isinstance(geom, Geometry1D):
        h = cfg["medium"].get("h")
        if h is None:
            raise ConfigError("1D grid tasks need 'h' in the medium config")
        return int(round((geom.x_hi - geom.x_lo) / h))
    return None


def _emit(records, header, path_csv, fmt):
    """Write rows either as CSV with the given header or as a JSON record list."""
    if fmt == "json":
        keys = header.split(",")
        payload = [dict(zip(keys, row)) for row in records]
        with open(os.path.splitext(path_csv)[0] + ".json", "w") as fh:
            json.dump(payload, fh, indent=1, default=float)
            fh.write("\n")
    else:
        with open(path_csv, "w") as fh:
            fh.write(header + "\n")
            for row in records:
                fh.write(",".join(_fmt_cell(x) for x in row) + "\n")


def _fmt_cell(x):
    if isinstance(x, float):
        return f"{x:.16g}"
    return str(x)


def run_spectrum(cfg: dict, out: str, fmt: str = "csv") -> dict:
    """Finite-contrast spectrum of the configured medium."""
    med = _medium(cfg)
    count = cfg.get("count", 6)
    geom = med.geometry
    if isinstance(geom, RadialGeometry):
        n = int(round(1.0 / cfg["medium"].get("h", 1e-3)))
        opr = radial3d.radial_operator(geom.a, med.epsilon, n,
                                       bc=med.bc.kind)
        w, v, res = radial3d.radial_eigenpairs(opr, count)
        lams, resid = w, res
    else:
        opr = fdm.assemble(med, _grid_n(cfg, med))
        result = fdm.smallest_eigenpairs(opr, count)
        lams, resid = result.eigenvalues, result.residuals
    rows = [(j + 1, float(l), float(r)) for j, (l, r) in enumerate(zip(lams, resid))]
    _emit(rows, "j,lambda,residual", os.path.join(out, "spectrum.csv"), fmt)
    return {"eigenvalues": [float(l) for l in lams]}


def run_limit(cfg: dict, out: str, fmt: str = "csv") -> dict:
    """Limit spectrum (constant-trace and zero-flux families)."""
    med = _medium(cfg)
    lam_max = cfg.get("lambda_max", 50.0)
    geom = med.geometry
    if isinstance(geom, RadialGeometry):
        pairs, _ = radial3d.sphere_limit_spectrum(geom.a, lam_max)
        rows = [("constant_trace", float(l), 1.0,
                 abs(radial3d.sphere_char(geom.a, l)), 0.0) for l, _f in pairs]
        _emit(rows, "branch,lambda,c_1,flux_residual,pde_residual",
              os.path.join(out, "limit.csv"), fmt)
        return {"eigenvalues": [r[1] for r in rows], "S1": []}
    n = _grid_n(cfg, med)
    if med.bc.kind == "neumann":
        spec = limitspec.limit_spectrum_neumann(med, lam_max, n)
    else:
        spec = limitspec.limit_spectrum(med, lam_max, n)
    m = geom.n_inclusions
    if fmt == "json":
        rows = [(p.branch, p.lam, *[float(np.real(ci)) for ci in p.c],
                 p.flux_residual, p.pde_residual) for p in spec.pairs]
        cols = ",".join(f"c_{i + 1}" for i in range(m))
        _emit(rows, f"branch,lambda,{cols},flux_residual,pde_residual",
              os.path.join(out, "limit.csv"), fmt)
    else:
        limitspec.write_limit_csv(os.path.join(out, "limit.csv"), spec, m)
    if isinstance(geom, Geometry1D) and med.bc.kind in ("dirichlet", "neumann"):
        exact = exact1d.limit_spectrum_1d(geom, med.bc, lam_max)
        rows = ([("S1", i + 1, l, 0.0) for i, (l, _f) in enumerate(exact.S1)]
                + [("S2", i + 1, l, 0.0) for i, (l, _f) in enumerate(exact.S2)])
        exact1d.write_spectrum_csv(os.path.join(out, "exact_limit.csv"), rows)
    return {"eigenvalues": [p.lam for p in spec.pairs],
            "branches": [p.branch for p in spec.pairs],
            "unresolved": list(spec.unresolved)}


def run_dispersion(cfg: dict, out: str, fmt: str = "csv", jobs: int = 1) -> dict:
    """Band structure over the configured Bloch-number and contrast grids."""
    med = _medium(cfg)
    k_grid = cfg.get("k_grid")
    if not k_grid:
        raise ConfigError("dispersion needs a k_grid")
    eps_list = cfg.get("eps_list", [0.0, med.epsilon] if med.epsilon > 0 else [0.0])
    branch_count = cfg.get("branch_count", 2)
    n = _grid_n(cfg, med) if isinstance(med.geometry, Geometry1D) else None
    bands = bloch.dispersion_sweep(med, k_grid, branch_count, eps_list, n)
    rows = [(p.k, p.eps, p.branch, p.lam, p.omega) for p in bands.points()]
    _emit(rows, "k,epsilon,branch,lambda,omega",
          os.path.join(out, "bands.csv"), fmt)
    gap_rows = [(eps, lo, hi) for eps in bands.eps_list
                for lo, hi in bloch.gap_report(bands, eps)]
    _emit(gap_rows, "epsilon,gap_lo,gap_hi", os.path.join(out, "gaps.csv"), fmt)
    return {"crossings": list(bands.crossings), "gaps": gap_rows}


def _limit_reference(med: ContrastMedium, cfg: dict, lam_max: float) -> np.ndarray:
    geom = med.geometry
    if isinstance(geom, RadialGeometry):
        pairs, _ = radial3d.sphere_limit_spectrum(geom.a, lam_max)
        return np.array([l for l, _f in pairs])
    if isinstance(geom, Geometry1D) and med.bc.kind in ("dirichlet", "neumann"):
        return exact1d.limit_spectrum_1d(geom, med.bc, lam_max).all_eigenvalues
    spec = limitspec.limit_spectrum(med.with_epsilon(0.0), lam_max,
                                    _grid_n(cfg, med))
    return spec.eigenvalues


def run_converge(cfg: dict, out: str, fmt: str = "csv", jobs: int = 1) -> dict:
    """Contrast sweep of one grid spectrum with affine extrapolation to 0.

    The sweep must be geometric with ratio <= 1/2 and at least 4 points.
    Divergent (inclusion-dominated) branches are detected by growth along
    the sweep and excluded from extrapolation.
    """
    med = _medium(cfg)
    eps_list = sorted(cfg.get("eps_list", [1e-1, 1e-2, 1e-3, 1e-4]), reverse=True)
    if len(eps_list) < 4:
        raise ConfigError("converge needs >= 4 contrast values")
    ratios = [eps_list[i + 1] / eps_list[i] for i in range(len(eps_list) - 1)]
    if max(ratios) > 0.5 + 1e-12 or max(ratios) / min(ratios) > 1.0 + 1e-9:
        raise ConfigError("eps_list must be geometric with ratio <= 1/2")
    count = cfg.get("count", 4)
    geom = med.geometry

    def sweep_point(eps):
        if isinstance(geom, RadialGeometry):
            n = int(round(1.0 / cfg["medium"].get("h", 1e-3)))
            opr = radial3d.radial_operator(geom.a, eps, n, bc=med.bc.kind)
            w, v, _ = radial3d.radial_eigenpairs(opr, count)
            labels = opr.labels
            h = opr.h
        else:
            opr = fdm.assemble(med.with_epsilon(eps), _grid_n(cfg, med))
            res = fdm.smallest_eigenpairs(opr, count)
            w, v = res.eigenvalues, res.eigenvectors
            labels = opr.grid.labels
            h = opr.grid.h
        flat = []
        for j in range(count):
            inside = np.abs(v[labels > 0, j])
            vals = v[labels > 0, j]
            flat.append(float(np.max(np.abs(vals - vals.mean())) /
                              max(np.max(np.abs(v[:, j])), 1e-300))
                        if inside.size else 0.0)
        return np.asarray(w[:count]), flat, h

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(sweep_point, eps_list))
    else:
        results = [sweep_point(e) for e in eps_list]
    table = np.array([r[0] for r in results])        # (n_eps, count)
    flatness = np.array([r[1] for r in results])
    h = results[0][2]
    lam_ref = _limit_reference(med, cfg, float(table.max()) * 1.5 + 10.0)

    eps_arr = np.array(eps_list)
    branches = []
    for j in range(count):
        lam = table[:, j]
        growth = lam[-1] / lam[0] if lam[0] > 0 else np.inf
        divergent = bool(growth > 5.0 or np.any(lam[1:] / lam[:-1] > 5.0))
        entry = {"branch": j + 1, "lambda": lam.tolist(), "divergent": divergent}
        if not divergent:
            coef = np.polyfit(eps_arr, lam, 1)
            resid = float(np.max(np.abs(np.polyval(coef, eps_arr) - lam)))
            lam0 = float(coef[1])
            entry.update(slope=float(coef[0]), extrapolated=lam0,
                         fit_residual=resid)
            if lam_ref.size:
                near = float(lam_ref[np.argmin(np.abs(lam_ref - lam0))])
                grid_tol = 20.0 * h ** 2 * max(near, 1.0) + 1e-8
                entry.update(limit=near,
                             deviation=abs(lam0 - near),
                             passed=bool(abs(lam0 - near)
                                         <= max(5.0 * resid, grid_tol)))
            Cfit = np.polyfit(eps_arr, flatness[:, j], 1)[0]
            entry["flatness_C"] = float(Cfit)
        branches.append(entry)

    rows = [(float(e), j + 1, float(table[i, j]))
            for i, e in enumerate(eps_list) for j in range(count)]
    _emit(rows, "epsilon,branch,lambda", os.path.join(out, "converge.csv"), fmt)
    report = {"eps_list": eps_list, "branches": branches,
              "passed": all(b.get("passed", True) for b in branches)}
    with open(os.path.join(out, "converge.json"), "w") as fh:
        json.dump(report, fh, indent=1)
        fh.write("\n")
    return report


def _check(name, fn):
    try:
        ok, detail = fn()
    except Exception as exc:                       # failures are data here
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"name": name, "passed": bool(ok), "detail": str(detail)}


def run_validate(cfg: dict, out: str, fmt: str = "csv", jobs: int = 1) -> dict:
    """Geometry-appropriate subset of the acceptance checks; verdict JSON."""
    med = _medium(cfg)
    geom = med.geometry
    checks = []

    if isinstance(geom, (Geometry1D, Geometry2D)):
        n = _grid_n(cfg, med) if isinstance(geom, Geometry1D) else None

        def dtn_identity():
            worst = 0.0
            for eps in (1e-1, 1e-3):
                m = med.with_epsilon(eps)
                if m.bc.kind == "neumann":
                    return True, "skipped (Neumann closure has no trace reduction)"
                sysd = dtn.build_dtn(m, n)
                f = np.where(sysd.grid.labels > 0, 1.0, 0.5)
                u, _tr = dtn.apply_Bhat(sysd, eps, f)
                u2 = fdm.solve(fdm.assemble(m, n), f)
                worst = max(worst, float(np.max(np.abs(u - u2))))
            return worst < 1e-10, f"max deviation {worst:.2e}"
        checks.append(("dtn_identity", dtn_identity))

        def np11_negative():
            if med.bc.kind == "neumann":
                return True, "skipped"
            sysd = dtn.build_dtn(med.with_epsilon(1.0), n)
            ev = np.linalg.eigvalsh(sysd.Np11)
            return bool(ev.max() < 0), f"largest constants-block eigenvalue {ev.max():.4f}"
        checks.append(("exterior_constants_negative", np11_negative))

    if isinstance(geom, Geometry1D) and med.bc.kind in ("dirichlet", "neumann"):
        def limit_match():
            lam_max = cfg.get("lambda_max", 50.0)
            exact = exact1d.limit_spectrum_1d(geom, med.bc, lam_max)
            if med.bc.kind == "neumann":
                spec = limitspec.limit_spectrum_neumann(med.with_epsilon(0.0),
                                                        lam_max, n)
            else:
                spec = limitspec.limit_spectrum(med.with_epsilon(0.0), lam_max, n)
            ref = exact.all_eigenvalues
            worst = 0.0
            for lam in spec.eigenvalues:
                worst = max(worst, float(np.min(np.abs(ref - lam)) / lam))
            return worst < 1e-3, f"worst relative deviation {worst:.2e}"
        checks.append(("limit_matches_exact", limit_match))

    if isinstance(geom, RadialGeometry):
        def sphere_checks():
            pairs, s1 = radial3d.sphere_limit_spectrum(geom.a, 80.0)
            roots = radial3d.sphere_det_scan(geom.a, 80.0, 2000)
            worst = max(abs(r - p[0]) / p[0] for r, p in zip(roots, pairs))
            return (s1 == () and worst < 1e-3), f"det-scan deviation {worst:.2e}"
        checks.append(("sphere_limit", sphere_checks))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda c: _check(*c), checks))
    else:
        results = [_check(name, fn) for name, fn in checks]
    verdict = {"criteria": results, "passed": all(r["passed"] for r in results)}
    with open(os.path.join(out, "validate.json"), "w") as fh:
        json.dump(verdict, fh, indent=1)
        fh.write("\n")
    return verdict


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="highcontrast",
        description="spectra of high-contrast composite media")
    parser.add_argument("task", choices=["spectrum", "limit", "dispersion",
                                         "converge", "validate"])
    parser.add_argument("--config", required=True, help="JSON study configuration")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--format", choices=["csv", "json"], default="csv")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if "task" in cfg and cfg["task"] != args.task:
            raise ConfigError(f"config task {cfg['task']!r} does not match "
                              f"subcommand {args.task!r}")
        os.makedirs(args.out, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.task == "spectrum":
            run_spectrum(cfg, args.out, args.format)
        elif args.task == "limit":
            run_limit(cfg, args.out, args.format)
        elif args.task == "dispersion":
            run_dispersion(cfg, args.out, args.format, args.jobs)
        elif args.task == "converge":
            report = run_converge(cfg, args.out, args.format, args.jobs)
            if not report["passed"]:
                print("convergence check failed", file=sys.stderr)
                return EXIT_VALIDATION
        else:
            verdict = run_validate(cfg, args.out, args.format, args.jobs)
            if not verdict["passed"]:
                print("validation failed", file=sys.stderr)
                return EXIT_VALIDATION
    except (ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (fdm.EigensolverError, fdm.SolvabilityError, RuntimeError,
            ValueError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
