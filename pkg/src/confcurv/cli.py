"""Command-line front end.

Subcommands print exactly one JSON document on stdout; logging goes to
stderr. Exit codes:

    0  success
    2  invalid arguments or configuration
    3  I/O failure
    4  mesh topology / parse failure
    5  target curvature is not strictly negative
    6  solver did not converge
    7  genus <= 1 (the existence theorem needs genus g > 1)
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curvature import NegativityViolation, constant_curvature, evaluate_on_mesh, load_curvature_csv
from .diagnostics import energy_bound_summary
from .expression import EvaluationError, ExpressionSyntaxError
from .functional import SigmaRangeError, curvature_of, residual
from .geometry import build_geometry
from .mesh import MeshError, euler_characteristic, generate_genus_g, genus, load_obj, refine, save_obj
from .solver import IndefiniteSystemError, SolverConfig, run_summary, solve

log = logging.getLogger("confcurv")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_TOPOLOGY = 4
EXIT_NEGATIVITY = 5
EXIT_NO_CONVERGENCE = 6
EXIT_GENUS = 7

GENUS_HYPOTHESIS = "genus g > 1"
EMIT_CHOICES = ("report_json", "trace_csv", "sigma_csv", "obj_with_sigma", "diagnostics_jsonl")
TRACE_COLUMNS = ("iteration", "S", "b_inf", "b_l2", "step", "mean_value", "laplacian_energy")
GB_TOL = 1e-9


class CLIError(Exception):
    def __init__(self, code, kind, message, **extra):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.extra = extra


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit({"error": "usage", "message": message, "exit_code": EXIT_USAGE})
        sys.exit(EXIT_USAGE)


def _emit(doc):
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    sys.stdout.flush()


@dataclass
class RunConfig:
    mesh_source: dict
    target: dict
    refine_levels: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: Path = Path("out")
    emit: tuple = ("report_json",)
    allow_any_genus: bool = False

    @classmethod
    def from_dict(cls, data: dict, base: Path = Path(".")) -> "RunConfig":
        def bad(msg):
            raise CLIError(EXIT_USAGE, "config", msg)

        if not isinstance(data, dict):
            bad("config must be a JSON object")
        unknown = set(data) - {"mesh", "target", "refine_levels", "solver", "outputs", "emit", "allow_any_genus"}
        if unknown:
            bad(f"unknown config keys: {sorted(unknown)}")
        mesh = data.get("mesh")
        if not isinstance(mesh, dict) or len(mesh) != 1 or next(iter(mesh)) not in ("generate", "obj"):
            bad("'mesh' must be exactly one of {'generate': {genus, resolution}} or {'obj': path}")
        if "obj" in mesh:
            mesh = {"obj": str(base / mesh["obj"])}
        else:
            gen = mesh["generate"]
            if not isinstance(gen, dict) or set(gen) != {"genus", "resolution"}:
                bad("'mesh.generate' needs exactly 'genus' and 'resolution'")
        target = data.get("target")
        if not isinstance(target, dict) or len(target) != 1 or next(iter(target)) not in ("constant", "expression", "csv"):
            bad("'target' must be exactly one of {'constant': value}, {'expression': text}, {'csv': path}")
        if "csv" in target:
            target = {"csv": str(base / target["csv"])}
        refine_levels = data.get("refine_levels", 0)
        if not isinstance(refine_levels, int) or refine_levels < 0:
            bad("'refine_levels' must be a nonnegative integer")
        solver_opts = dict(data.get("solver", {}))
        init = solver_opts.get("initial_sigma")
        if isinstance(init, dict):
            if set(init) != {"csv"}:
                bad("'solver.initial_sigma' object form is {'csv': path}")
            solver_opts["initial_sigma"] = _read_sigma_csv(base / init["csv"])
        try:
            solver = SolverConfig(**solver_opts)
        except (TypeError, ValueError) as exc:
            bad(f"solver: {exc}")
        emit = data.get("emit", ["report_json"])
        if not isinstance(emit, list) or not set(emit) <= set(EMIT_CHOICES):
            bad(f"'emit' must be a list drawn from {list(EMIT_CHOICES)}")
        if "diagnostics_jsonl" in emit:
            solver.record_diagnostics = True
        return cls(
            mesh_source=mesh,
            target=target,
            refine_levels=refine_levels,
            solver=solver,
            outputs=base / data.get("outputs", "out"),
            emit=tuple(e for e in EMIT_CHOICES if e in emit),
            allow_any_genus=bool(data.get("allow_any_genus", False)),
        )


def _read_sigma_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot read {path}: {exc}")
    try:
        rows.sort(key=lambda r: int(r["vertex_index"]))
        return np.array([float(r["sigma"]) for r in rows])
    except (KeyError, ValueError):
        raise CLIError(EXIT_USAGE, "config", f"{path}: expected columns vertex_index,sigma")


def _load_mesh(path):
    try:
        return load_obj(path)
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot read {path}: {exc}")
    except MeshError as exc:
        raise CLIError(
            EXIT_TOPOLOGY, "topology", str(exc),
            element=getattr(exc, "element", None) if getattr(exc, "element", None) is not None else getattr(exc, "face", None),
        )


def _mesh_info(mesh):
    chi = euler_characteristic(mesh)
    return {"V": mesh.n_vertices, "E": mesh.n_edges, "F": mesh.n_faces, "chi": chi, "genus": genus(mesh)}


# -- generate -------------------------------------------------------------------


def cmd_generate(args) -> int:
    try:
        mesh = generate_genus_g(args.genus, args.resolution)
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, "usage", str(exc))
    out = Path(args.out or f"genus{args.genus}_res{args.resolution}.obj")
    try:
        save_obj(mesh, out)
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot write {out}: {exc}")
    _emit({**_mesh_info(mesh), "path": str(out)})
    return EXIT_OK


# -- check ------------------------------------------------------------------------


def cmd_check(args) -> int:
    mesh = _load_mesh(args.mesh)
    try:
        geom = build_geometry(mesh)
    except MeshError as exc:
        raise CLIError(EXIT_TOPOLOGY, "topology", str(exc), element=getattr(exc, "face", None))
    total_defect = float(geom.angle_defects.sum())
    gb_error = total_defect - 2 * math.pi * geom.chi
    angles = geom.corner_angles
    ok = abs(gb_error) <= GB_TOL
    _emit(
        {
            **_mesh_info(mesh),
            "total_angle_defect": total_defect,
            "gauss_bonnet_error": gb_error,
            "min_angle": float(angles.min()),
            "obtuse_fraction": float(np.mean((angles > math.pi / 2).any(axis=1))),
            "negative_cot_weights": int(np.count_nonzero(geom.cot_weights < 0)),
            "status": "ok" if ok else "gauss_bonnet_violation",
        }
    )
    return EXIT_OK if ok else EXIT_TOPOLOGY


# -- solve ------------------------------------------------------------------------


def _build_problem(cfg: RunConfig):
    if "obj" in cfg.mesh_source:
        mesh = _load_mesh(cfg.mesh_source["obj"])
    else:
        gen = cfg.mesh_source["generate"]
        try:
            mesh = generate_genus_g(gen["genus"], gen["resolution"])
        except ValueError as exc:
            raise CLIError(EXIT_USAGE, "config", str(exc))
    for _ in range(cfg.refine_levels):
        mesh = refine(mesh)
    g = genus(mesh)
    if g <= 1:
        msg = f"the existence and uniqueness theorem assumes {GENUS_HYPOTHESIS}; this mesh has genus {g}"
        if not cfg.allow_any_genus:
            raise CLIError(EXIT_GENUS, "genus", msg + " (pass --allow-any-genus to try anyway)", genus=g)
        log.warning("%s; continuing because --allow-any-genus was given", msg)
    try:
        geom = build_geometry(mesh)
    except MeshError as exc:
        raise CLIError(EXIT_TOPOLOGY, "topology", str(exc), element=getattr(exc, "face", None))

    t = cfg.target
    try:
        if "constant" in t:
            target = constant_curvature(float(t["constant"]), mesh.n_vertices)
        elif "expression" in t:
            target = evaluate_on_mesh(str(t["expression"]), geom)
        else:
            target = load_curvature_csv(t["csv"], geom)
    except NegativityViolation as exc:
        raise CLIError(EXIT_NEGATIVITY, "negativity", str(exc), vertices=exc.vertices[:100].tolist())
    except ExpressionSyntaxError as exc:
        raise CLIError(EXIT_USAGE, "expression", str(exc), offset=exc.offset)
    except EvaluationError as exc:
        raise CLIError(EXIT_USAGE, "expression", str(exc), vertex=exc.index)
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", str(exc))
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, "target", str(exc))
    return mesh, geom, target


def _write_outputs(cfg, mesh, geom, target, report, summary):
    out = cfg.outputs
    try:
        out.mkdir(parents=True, exist_ok=True)
        sigma = report.sigma_final
        written = {}
        if "trace_csv" in cfg.emit:
            path = out / "trace.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TRACE_COLUMNS)
                for rec in report.trace:
                    w.writerow([rec["iteration"]] + [repr(float(rec[c])) for c in TRACE_COLUMNS[1:]])
            written["trace_csv"] = str(path)
        if "sigma_csv" in cfg.emit:
            path = out / "sigma.csv"
            achieved = curvature_of(geom, sigma)
            b = residual(geom, target, sigma)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("vertex_index", "sigma", "K_target", "K_achieved", "b"))
                for i in range(mesh.n_vertices):
                    w.writerow([i] + [f"{v:.17g}" for v in (sigma[i], target.K[i], achieved[i], b[i])])
            written["sigma_csv"] = str(path)
        if "obj_with_sigma" in cfg.emit:
            path = out / "mesh_sigma.obj"
            save_obj(mesh, path, scalar=sigma)
            written["obj_with_sigma"] = str(path)
        if "diagnostics_jsonl" in cfg.emit:
            path = out / "diagnostics.jsonl"
            with open(path, "w") as fh:
                for rec, snap in zip(report.trace, report.diagnostics_trace):
                    fh.write(json.dumps({"iteration": rec["iteration"], **snap.to_dict()}) + "\n")
            written["diagnostics_jsonl"] = str(path)
        if "report_json" in cfg.emit:
            path = out / "report.json"
            written["report_json"] = str(path)
            Path(path).write_text(json.dumps({**summary, "outputs": written}, indent=2) + "\n")
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot write outputs to {out}: {exc}")
    return written


def run(cfg: RunConfig) -> int:
    mesh, geom, target = _build_problem(cfg)
    try:
        report = solve(geom, target, cfg.solver)
    except SigmaRangeError as exc:
        raise CLIError(EXIT_NO_CONVERGENCE, "divergence", str(exc), vertex=exc.vertex)
    except IndefiniteSystemError as exc:
        raise CLIError(EXIT_NO_CONVERGENCE, "indefinite", str(exc))
    except ValueError as exc:
        raise CLIError(EXIT_USAGE, "config", str(exc))
    summary = {
        "mesh": _mesh_info(mesh),
        "method": cfg.solver.method,
        **run_summary(geom, target, report),
        "diagnostics_final": report.diagnostics_final.to_dict(),
        "energy_bounds": {
            k: v
            for k, v in energy_bound_summary(
                geom, report.diagnostics_trace or [report.diagnostics_final], report.trace[0]["S"]
            ).items()
            if k != "chain"
        },
    }
    summary["outputs"] = _write_outputs(cfg, mesh, geom, target, report, summary)
    _emit(summary)
    return EXIT_OK if report.converged else EXIT_NO_CONVERGENCE


def cmd_solve(args) -> int:
    path = Path(args.config)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise CLIError(EXIT_IO, "io", f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise CLIError(EXIT_USAGE, "config", f"{path}: invalid JSON ({exc})")
    cfg = RunConfig.from_dict(data, base=path.parent)
    if args.allow_any_genus:
        cfg.allow_any_genus = True
    return run(cfg)


def cmd_uniformize(args) -> int:
    cfg = RunConfig(
        mesh_source={"obj": args.mesh},
        target={"constant": -1.0},
        outputs=Path(args.out_dir),
        emit=("report_json", "sigma_csv", "obj_with_sigma"),
        allow_any_genus=args.allow_any_genus,
    )
    return run(cfg)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="confcurv", description="Conformal factors with prescribed negative Gaussian curvature.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a genus-g plate surface as OBJ")
    g.add_argument("--genus", type=int, required=True)
    g.add_argument("--resolution", type=int, default=8)
    g.add_argument("--out", help="output OBJ path (default genus<g>_res<r>.obj)")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("check", help="validate a mesh and its discrete Gauss-Bonnet balance")
    c.add_argument("mesh")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="run a solve described by a JSON config")
    s.add_argument("config")
    s.add_argument("--allow-any-genus", action="store_true")
    s.set_defaults(func=cmd_solve)

    u = sub.add_parser("uniformize", help="solve for curvature -1 with Newton and default settings")
    u.add_argument("mesh")
    u.add_argument("out_dir")
    u.add_argument("--allow-any-genus", action="store_true")
    u.set_defaults(func=cmd_uniformize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CLIError as exc:
        log.error("%s", exc)
        _emit({"error": exc.kind, "message": str(exc), "exit_code": exc.code, **exc.extra})
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
