"""Batch front end: ``shellcut --config run.json [--out DIR] [--workers N] [--verbose]``.

Exit statuses: 0 success or Pass, 1 any Fail, 2 configuration error,
3 solver error or Inconclusive check.
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
from jsonschema.exceptions import best_match
import numpy as np

from . import __version__
from .errors import ClassViolation, NonConvexProfile, NotNested, PreconditionViolated, ShellcutError
from .fem import assemble, solve_first
from .flowcut import classify_basins, cut_diagnostics
from .geometry import AxiDomain, class_residual, find_class_member, profile_from_dict
from .geometry.domain import scale_of
from .geometry.random import random_convex_polyline
from .mesh import mesh_meridian
from .radial import NEUMANN_BC, BoundaryCondition, ShellProblem, first_eigenvalue, glue_radius
from . import verify as V

log = logging.getLogger("shellcut")

SCHEMA_VERSION = 1
OUT_ENV = "SHELLCUT_OUT"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
UNRESOLVED_LIMIT = 0.01

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_BC = {"oneOf": [{"type": "number"}, {"enum": ["dirichlet", "neumann"]}]}
_BC_PAIR = {"type": "array", "items": _BC, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_DEFS = {
    "profile": {"oneOf": [
        _obj({"kind": {"const": "ball"}, "center_z": _NUM, "radius": _POS},
             ["kind", "center_z", "radius"]),
        _obj({"kind": {"const": "spheroid"}, "center_z": _NUM, "semi_axis_rho": _POS,
              "semi_axis_z": _POS}, ["kind", "center_z", "semi_axis_rho", "semi_axis_z"]),
        _obj({"kind": {"const": "polyline"},
              "vertices": {"type": "array", "minItems": 3,
                           "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}}},
             ["kind", "vertices"]),
        _obj({"kind": {"const": "blend"}, "left": {"$ref": "#/$defs/profile"},
              "right": {"$ref": "#/$defs/profile"}, "weight": {"type": "number", "minimum": 0, "maximum": 1}},
             ["kind", "left", "right", "weight"]),
        _obj({"kind": {"const": "parallel"}, "base": {"$ref": "#/$defs/profile"}, "offset": _POS},
             ["kind", "base", "offset"]),
        _obj({"kind": {"const": "random"}, "seed": {"type": "integer"}, "n_points": {"type": "integer", "minimum": 3},
              "size": _POS, "center_z": _NUM}, ["kind"]),
    ]},
    "family": _obj({k: {"$ref": "#/$defs/profile"} for k in ("b_in", "omega_in", "omega_out", "b_out")},
                   ["b_in", "omega_in", "omega_out", "b_out"]),
    "domain": {"oneOf": [
        _obj({"outer": {"$ref": "#/$defs/profile"}, "inner": {"$ref": "#/$defs/profile"}}, ["outer", "inner"]),
        _obj({"class_member": {"$ref": "#/$defs/family"}}, ["class_member"]),
    ]},
}

_COMMON = {"command": {"type": "string"}, "n": {"type": "integer", "minimum": 2},
           "out": {"type": "string"}, "workers": {"type": "integer", "minimum": 1},
           "seed": {"type": "integer"}}

_CHECKS = {
    "thm_main": ({"domain": {"$ref": "#/$defs/domain"}, "bc": _BC_PAIR, "h": _POS}, ["domain", "bc"]),
    "dpp": ({"domain": {"$ref": "#/$defs/domain"}, "bc_inner": _BC, "h": _POS}, ["domain", "bc_inner"]),
    "ppt": ({"domain": {"$ref": "#/$defs/domain"}, "bc_outer": _BC, "h": _POS}, ["domain", "bc_outer"]),
    "web": ({"domain": {"$ref": "#/$defs/domain"}, "bc_inner": _BC, "h": _POS}, ["domain", "bc_inner"]),
    "hopf_sign": ({"domain": {"$ref": "#/$defs/domain"}, "bc": _BC_PAIR, "h": _POS}, ["domain", "bc"]),
    "glue": ({"R1": _POS, "R2": _POS, "bc": _BC_PAIR}, ["R1", "R2", "bc"]),
    "monotonicity": ({"R1": _POS, "R2": _POS, "bc": _BC_PAIR, "points": {"type": "integer", "minimum": 2}},
                     ["R1", "R2", "bc"]),
    "shape_hopf": ({"R1": _POS, "R2": _POS, "bc": _BC_PAIR, "h": _POS}, ["R1", "R2", "bc"]),
    "geometry_lemmas": ({"profile": {"$ref": "#/$defs/profile"}}, ["profile"]),
}

_CHECK_ITEM = {"oneOf": [
    _obj({"check": {"const": name}, "n": {"type": "integer", "minimum": 2}, **props}, ["check", *req])
    for name, (props, req) in _CHECKS.items()]}

COMMANDS = {
    "shell": ({"s": _POS, "t": _POS, "bc": _BC_PAIR}, ["n", "s", "t", "bc"]),
    "domain": ({"domain": {"$ref": "#/$defs/domain"}, "bc": _BC_PAIR, "h": _POS}, ["n", "domain", "bc"]),
    "cut": ({"domain": {"$ref": "#/$defs/domain"}, "bc": _BC_PAIR, "h": _POS,
             "seeds": {"enum": ["barycenter", "double"]}, "tolerance": _POS}, ["n", "domain", "bc"]),
    "class-check": ({"domain": {"$ref": "#/$defs/domain"}}, ["n", "domain"]),
    "class-find": ({"family": {"$ref": "#/$defs/family"}}, ["n", "family"]),
    "verify": ({"checks": {"type": "array", "items": _CHECK_ITEM, "minItems": 1}}, ["checks"]),
    "sweep": ({"R1": _POS, "R2": _POS, "bc": _BC_PAIR, "points": {"type": "integer", "minimum": 2},
               "grid": {"type": "array", "items": _POS, "minItems": 2}}, ["n", "R1", "R2", "bc"]),
}


def schema_for(command: str) -> dict:
    props, req = COMMANDS[command]
    return {"$schema": "https://json-schema.org/draft/2020-12/schema", "$defs": _DEFS,
            **_obj({**_COMMON, **props}, ["command", *req])}


class ConfigInvalid(Exception):
    pass


def _reject_constant(name):
    raise ConfigInvalid(f"non-finite number {name} is not allowed")


def _where(err: jsonschema.ValidationError) -> str:
    path = "/".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def validate(config) -> dict:
    """Strict schema check; the message names the offending field."""
    if not isinstance(config, dict):
        raise ConfigInvalid("config must be a JSON object")
    cmd = config.get("command")
    if cmd not in COMMANDS:
        raise ConfigInvalid(f"field 'command': expected one of {sorted(COMMANDS)}, got {cmd!r}")
    validator = jsonschema.Draft202012Validator(schema_for(cmd))
    err = best_match(validator.iter_errors(config))
    if err is not None:
        # oneOf failures hide the cause; descend into the branch whose discriminator matched
        while err.context:
            branches = {}
            for c in err.context:
                branches.setdefault(c.relative_schema_path[0], []).append(c)
            matched = [b for b in branches.values() if all(c.validator != "const" for c in b)]
            err = best_match(matched[0] if len(matched) == 1 else err.context)
        raise ConfigInvalid(f"field '{_where(err)}': {err.message}")
    return config


def load_config(path: str | os.PathLike) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"invalid JSON: {exc}") from exc
    return validate(data)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


# ----------------------------------------------------------------------------- builders

def build_profile(spec: dict, seed: int = 0):
    if spec["kind"] == "random":
        rng = np.random.default_rng(spec.get("seed", seed))
        return random_convex_polyline(rng, spec.get("n_points", 8), spec.get("size", 1.0),
                                      spec.get("center_z", 0.0))
    if spec["kind"] in ("blend", "parallel"):
        spec = copy.deepcopy(spec)
        for key in ("left", "right", "base"):
            if key in spec and spec[key]["kind"] == "random":
                sub = build_profile(spec[key], seed)
                spec[key] = sub.to_dict()
    return profile_from_dict(spec)


def build_family(spec: dict, seed: int = 0) -> dict:
    return {k: build_profile(spec[k], seed) for k in ("b_in", "omega_in", "omega_out", "b_out")}


def build_domain(spec: dict, n: int, seed: int = 0) -> AxiDomain:
    if "class_member" in spec:
        _, _, dom = find_class_member(**build_family(spec["class_member"], seed), n=n)
        return dom
    return AxiDomain(n, build_profile(spec["outer"], seed), build_profile(spec["inner"], seed))


def _bcs(pair) -> tuple[BoundaryCondition, BoundaryCondition]:
    return BoundaryCondition.parse(pair[0]), BoundaryCondition.parse(pair[1])


# ----------------------------------------------------------------------------- commands

def _line(name: str, verdict: str, detail: str = "") -> str:
    return f"{name:<20} {verdict:<12} {detail}".rstrip()


def run_shell(cfg, out: Path) -> tuple[dict, list, int]:
    bi, bo = _bcs(cfg["bc"])
    res = first_eigenvalue(ShellProblem(cfg["n"], cfg["s"], cfg["t"], bi, bo))
    _write(out / "eigenfunction.csv", res.to_csv(), cfg)
    return res.header(), [_line("shell", "Done", f"lambda={res.lam!r}")], EXIT_OK


def run_domain(cfg, out: Path):
    dom = build_domain(cfg["domain"], cfg["n"], cfg.get("seed", 0))
    bi, bo = _bcs(cfg["bc"])
    h = cfg.get("h", dom.gap / 20)
    mesh = mesh_meridian(dom, h)
    sol = solve_first(assemble(mesh, dom.n, bi, bo))
    _write(out / "mesh.json", mesh.to_json(), cfg, csv=False)
    _write(out / "solution.csv", sol.nodal_csv(), cfg)
    result = {"domain": dom.to_dict(), "h": h, "lambda": sol.lam, "iterations": sol.iterations,
              "eig_residual": sol.eig_residual, "shift": sol.shift,
              "vertices": mesh.n_vertices, "triangles": mesh.n_triangles,
              "min_angle_deg": mesh.min_angle()}
    return result, [_line("domain", "Done", f"lambda={sol.lam!r}")], EXIT_OK


def run_cut(cfg, out: Path):
    dom = build_domain(cfg["domain"], cfg["n"], cfg.get("seed", 0))
    bi, bo = _bcs(cfg["bc"])
    h = cfg.get("h", dom.gap / 20)
    sol = solve_first(assemble(mesh_meridian(dom, h), dom.n, bi, bo))
    cut = classify_basins(sol, cfg.get("seeds", "barycenter"), domain=dom)
    cut = cut_diagnostics(sol, cut, cfg.get("tolerance", 0.02))
    _write(out / "interface.csv", cut.interface_csv(), cfg)
    _write(out / "cut.json", json.dumps(V._clean(cut.to_dict()), sort_keys=True), cfg, csv=False)
    d = cut.diagnostics
    if d["fraction_unresolved"] > UNRESOLVED_LIMIT:
        verdict, code = "Inconclusive", EXIT_SOLVER
    else:
        verdict, code = ("Pass", EXIT_OK) if d["within_tolerance"] else ("Fail", EXIT_FAIL)
    result = {"domain": dom.to_dict(), "h": h, "lambda": sol.lam, "verdict": verdict,
              "diagnostics": d}
    detail = f"gap_inner={d['relative_gap_inner']:.3e} gap_outer={d['relative_gap_outer']:.3e}"
    return result, [_line("EffectlessCut", verdict, detail)], code


def run_class_check(cfg, out: Path):
    dom = build_domain(cfg["domain"], cfg["n"], cfg.get("seed", 0))
    res = class_residual(dom)
    tol = 1e-6 * scale_of(dom) ** dom.n
    inside = abs(res) <= tol
    result = {"domain": dom.to_dict(), "class_residual": res, "tolerance": tol, "in_class": inside,
              "regularity": dom.regularity}
    return result, [_line("class-check", "Pass" if inside else "Fail", f"residual={res:.3e}")], EXIT_OK


def run_class_find(cfg, out: Path):
    fam = build_family(cfg["family"], cfg.get("seed", 0))
    a, b, dom = find_class_member(**fam, n=cfg["n"])
    res = class_residual(dom)
    result = {"a": a, "b": b, "class_residual": res, "domain": dom.to_dict()}
    return result, [_line("class-find", "Done", f"a={a!r} b={b!r} residual={res:.3e}")], EXIT_OK


def _run_check(item: dict, n_default: int, seed: int) -> list[V.VerificationReport]:
    n = item.get("n", n_default)
    check = item["check"]
    if check in ("glue", "monotonicity", "shape_hopf"):
        bi, bo = _bcs(item["bc"])
        if check == "glue":
            return [V.verify_glue(item["R1"], item["R2"], bi, bo, n)]
        if check == "monotonicity":
            return V.verify_monotonicity(item["R1"], item["R2"], bi, bo, n, item.get("points", 20))
        return [V.verify_radial_shape_and_hopf(n, item["R1"], item["R2"], bi, bo, item.get("h"))]
    if check == "geometry_lemmas":
        return V.verify_geometry_lemmas(build_profile(item["profile"], seed), n)
    dom = build_domain(item["domain"], n, seed)
    h = item.get("h")
    if check == "thm_main":
        return [V.verify_thm_main(dom, *_bcs(item["bc"]), h=h)]
    if check == "hopf_sign":
        return [V.verify_hopf_sign(dom, *_bcs(item["bc"]), h=h)]
    if check == "dpp":
        return [V.verify_dpp(dom, BoundaryCondition.parse(item["bc_inner"]), h=h)]
    if check == "web":
        return [V.web_function_bound(dom, BoundaryCondition.parse(item["bc_inner"]), h=h)]
    return [V.verify_ppt(dom, BoundaryCondition.parse(item["bc_outer"]), h=h)]


_CHECK_CLAIM = {"thm_main": V.Claim.THM_MAIN, "dpp": V.Claim.THM_DPP, "ppt": V.Claim.THM_PPT,
                "web": V.Claim.WEB, "hopf_sign": V.Claim.HOPF, "glue": V.Claim.GLUE,
                "monotonicity": V.Claim.MONO_RN, "shape_hopf": V.Claim.SHAPE,
                "geometry_lemmas": V.Claim.AF}


def _check_task(args):
    item, n_default, seed = args
    try:
        reports = _run_check(item, n_default, seed)
    except (ClassViolation, PreconditionViolated, NotNested, NonConvexProfile, ValueError) as exc:
        raise ConfigInvalid(f"check {item['check']!r}: {type(exc).__name__}: {exc}") from exc
    except ShellcutError as exc:
        reports = [V.VerificationReport.inconclusive(_CHECK_CLAIM[item["check"]], item, exc)]
    return item, reports


def run_verify(cfg, out: Path, workers: int = 1):
    tasks = [(item, cfg.get("n", 3), cfg.get("seed", 0)) for item in cfg["checks"]]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_check_task, tasks))
    else:
        done = [_check_task(t) for t in tasks]
    rows = [(rep.claim.value, rep.input_hash(), item, rep) for item, reps in done for rep in reps]
    rows.sort(key=lambda r: (r[0], r[1]))
    lines, results = [], []
    for claim, ihash, item, rep in rows:
        results.append({**rep.to_dict(), "input_hash": ihash})
        lines.append(rep.summary())
        if rep.verdict == V.Verdict.FAIL:
            _bundle(out / "repro" / f"{claim}-{ihash}", item, rep, cfg)
    verdicts = {r.verdict for *_, r in rows}
    code = EXIT_FAIL if V.Verdict.FAIL in verdicts else (
        EXIT_SOLVER if V.Verdict.INCONCLUSIVE in verdicts else EXIT_OK)
    return {"reports": results}, lines, code


def run_sweep(cfg, out: Path):
    n = cfg["n"]
    r1, r2 = cfg["R1"], cfg["R2"]
    bi, bo = _bcs(cfg["bc"])
    grid = cfg.get("grid") or np.linspace(r1, r2, cfg.get("points", 20) + 2)[1:-1].tolist()
    rows = []
    for r in grid:
        row = {"r": r}
        for key, prob in (("rn", ShellProblem(n, r1, r, bi, NEUMANN_BC)),
                          ("nr", ShellProblem(n, r, r2, NEUMANN_BC, bo))):
            t0 = time.perf_counter()
            res = first_eigenvalue(prob)
            row[f"lambda_{key}"] = res.lam
            row[f"residual_{key}"] = res.residual
            row[f"wall_{key}"] = time.perf_counter() - t0
        rows.append(row)
    cols = ["r", "lambda_rn", "residual_rn", "wall_rn", "lambda_nr", "residual_nr", "wall_nr"]
    _write(out / "sweep.csv", "\n".join([",".join(cols)] + [",".join(repr(float(row[c])) for c in cols)
                                                             for row in rows]) + "\n", cfg)
    rn = np.array([row["lambda_rn"] for row in rows])
    nr = np.array([row["lambda_nr"] for row in rows])
    rn_mono = bool(np.all(np.diff(rn) <= 1e-9))
    nr_mono = bool(np.all(np.diff(nr) >= -1e-9))
    sign = np.sign(rn - nr)
    k = np.flatnonzero(sign[:-1] != sign[1:])
    result = {"grid": grid, "lambda_rn": rn.tolist(), "lambda_nr": nr.tolist(),
              "rn_nonincreasing": rn_mono, "nr_nondecreasing": nr_mono}
    ok = rn_mono and nr_mono
    if k.size:
        lo, hi = grid[k[0]], grid[k[0] + 1]
        r_star, _ = glue_radius(r1, r2, bi, bo, n)
        result.update(crossing_bracket=[lo, hi], r_star=r_star, bracket_contains_r_star=bool(lo <= r_star <= hi))
        ok = ok and result["bracket_contains_r_star"]
    verdict = "Pass" if ok else "Fail"
    return result, [_line("sweep", verdict, f"points={len(grid)}")], EXIT_OK if ok else EXIT_FAIL


# ----------------------------------------------------------------------------- output

def _stamp(cfg) -> str:
    return f"# shellcut {__version__} config {config_hash(cfg)}\n"


def _write(path: Path, text: str, cfg: dict, csv: bool = True) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if csv:
        text = _stamp(cfg) + text
    else:
        payload = json.loads(text)
        text = json.dumps({"toolkit_version": __version__, "config_hash": config_hash(cfg),
                           "data": payload}, sort_keys=True)
    path.write_text(text, encoding="utf-8")


def _bundle(where: Path, item: dict, rep: V.VerificationReport, cfg: dict) -> None:
    where.mkdir(parents=True, exist_ok=True)
    _write(where / "config.json", json.dumps(item), cfg, csv=False)
    _write(where / "report.json", json.dumps(rep.to_dict()), cfg, csv=False)
    if "mesh" in rep.artifacts:
        _write(where / "mesh.json", rep.artifacts["mesh"].to_json(), cfg, csv=False)
    if "solution" in rep.artifacts:
        _write(where / "solution.csv", rep.artifacts["solution"].nodal_csv(), cfg)


def report_json(cfg: dict, result: dict, status: int) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "toolkit_version": __version__,
           "config_hash": config_hash(cfg), "command": cfg["command"], "exit_status": status,
           "result": V._clean(result)}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_finite(v) for v in x]
    return x


RUNNERS = {"shell": run_shell, "domain": run_domain, "cut": run_cut, "class-check": run_class_check,
           "class-find": run_class_find, "verify": run_verify, "sweep": run_sweep}


def run(cfg: dict, out: Path, workers: int = 1) -> int:
    """Execute a validated config, write ``report.json`` under ``out`` and return the exit status."""
    runner = RUNNERS[cfg["command"]]
    out.mkdir(parents=True, exist_ok=True)
    try:
        if cfg["command"] == "verify":
            result, lines, code = runner(cfg, out, workers)
        else:
            result, lines, code = runner(cfg, out)
    except ConfigInvalid:
        raise
    except (NotNested, NonConvexProfile, ValueError) as exc:
        raise ConfigInvalid(f"{type(exc).__name__}: {exc}") from exc
    except ShellcutError as exc:
        result = {"error": f"{type(exc).__name__}: {exc}"}
        lines, code = [_line(cfg["command"], "Error", result["error"])], EXIT_SOLVER
    (out / "report.json").write_text(report_json(cfg, _finite(V._clean(result)), code), encoding="utf-8")
    for line in lines:
        print(line)
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="shellcut", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./shellcut_out)")
    ap.add_argument("--workers", type=int, help="worker processes for verify plans")
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.get("out") or os.environ.get(OUT_ENV) or "shellcut_out")
        workers = args.workers or cfg.get("workers", 1)
        if workers < 1:
            raise ConfigInvalid("field 'workers': must be >= 1")
        log.debug("command %s -> %s (workers=%d)", cfg["command"], out, workers)
        return run(cfg, out, workers)
    except (ConfigInvalid, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
