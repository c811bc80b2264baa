"""Command-line harness tying generators, AMG setup, evolution, reference
solvers, and exports together.

Subcommands: optimize, evaluate, compare, gen-problem, encode-reference.
Configuration is a line-based key=value file; any key can be overridden on
the command line with --set key=value. Exit codes: 0 success, 1 usage error,
2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np
import scipy.io

from . import amg, cycles, evolution, problems, report, sparse
from .gmres import gmres

DEFAULTS = {
    # problem
    "problem": "poisson_2d",
    "n": "33",
    "epsilon": "0.001",
    "nx": "16",
    "ny": "8",
    "blocks": "8",
    # AMG setup
    "strength_threshold": "0.8",
    "max_row_sum": "0.9",
    "max_levels": "25",
    "min_coarse_size": "9",
    "n_flex": "5",
    # evolution
    "mu": "256",
    "lambda": "256",
    "generations": "100",
    "crossover_prob": "0.9",
    "mutation_prob": "0.1",
    "init_factor": "64",
    "cost_mode": "work_units",
    "seed": "0",
    # GMRES during fitness evaluation
    "rtol": "1e-4",
    "atol": "1e-8",
    "restart": "50",
    "maxiter": "100",
    # GMRES for evaluate/compare
    "eval_maxiter": "500",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, per the CLI contract
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def load_config(path: str | None, overrides) -> dict:
    cfg = dict(DEFAULTS)
    if path:
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key = key.strip()
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            cfg[key] = val.strip()
    for item in overrides or []:
        key, sep, val = item.partition("=")
        if not sep or key not in DEFAULTS:
            raise UsageError(f"--set expects a known key=value pair, got {item!r}")
        cfg[key] = val
    return cfg


def config_hash(cfg: dict) -> str:
    canonical = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def build_metadata(cfg: dict) -> dict:
    """Every design substitution a consumer of the artifacts should know."""
    return {
        "config_hash": config_hash(cfg),
        "seed": int(cfg["seed"]),
        "coarsening": "serial classical Ruge-Stuben (substitute for parallel Falgout)",
        "interpolation": "classical direct (substitute for Extended+i)",
        "max_row_sum_rule": "all couplings weak when |sum_j a_ij| >= max_row_sum * |a_ii| (signed row sum incl. diagonal; disabled at 1.0)",
        "outer_relaxation": "omega_o damps the whole block update, not only interface rows",
        "tail": "recursive V(1,1) hybrid symmetric Gauss-Seidel, CF ordering, dense-LU coarse solve",
        "mutation_prob": float(cfg["mutation_prob"]),
        "gmres_restart": int(cfg["restart"]),
        "cost_mode": cfg["cost_mode"],
    }


def _problem(cfg: dict) -> problems.ProblemInstance:
    return problems.from_config(cfg)


def _setup_params(cfg: dict) -> amg.SetupParams:
    return amg.SetupParams(
        strength_threshold=float(cfg["strength_threshold"]),
        max_row_sum=float(cfg["max_row_sum"]),
        max_levels=int(cfg["max_levels"]),
        min_coarse_size=int(cfg["min_coarse_size"]),
    )


def _evo_config(cfg: dict) -> evolution.EvolutionConfig:
    return evolution.EvolutionConfig(
        mu=int(cfg["mu"]), lam=int(cfg["lambda"]),
        generations=int(cfg["generations"]),
        crossover_prob=float(cfg["crossover_prob"]),
        mutation_prob=float(cfg["mutation_prob"]),
        init_factor=int(cfg["init_factor"]),
        cost_mode=cfg["cost_mode"], rng_seed=int(cfg["seed"]),
        n_flex=int(cfg["n_flex"]),
        rtol=float(cfg["rtol"]), atol=float(cfg["atol"]),
        restart=int(cfg["restart"]), maxiter=int(cfg["maxiter"]),
    )


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def export_front(front_rows: list[dict], fmt: str, path: Path) -> None:
    """Write the front as JSON or CSV (5 columns)."""
    if fmt == "json":
        _dump_json(path, front_rows)
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "time_per_iter", "iterations", "aggregate", "ir_text"])
            for r in front_rows:
                w.writerow([r["name"], r["time_per_iter"], r["iterations"],
                            r["time_per_iter"] * r["iterations"], r["ir_line"]])
    else:
        raise UsageError(f"unknown export format {fmt!r}")


def cmd_optimize(args) -> int:
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    if args.cost_mode:
        cfg["cost_mode"] = args.cost_mode
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    problem = _problem(cfg)
    setup = _setup_params(cfg)
    evo = _evo_config(cfg)
    hierarchy = amg.build_hierarchy(problem.matrix, setup, problem.row_partition)
    _, front, history = evolution.evolve(evo, problem, hierarchy=hierarchy,
                                         jobs=args.jobs)

    meta = build_metadata(cfg)
    meta["hierarchy"] = hierarchy.stats()
    _dump_json(out / "metadata.json", meta)

    front_rows = []
    front_dir = out / "front"
    front_dir.mkdir(exist_ok=True)
    for k, (name, ind) in enumerate(front.members):
        ir_path = front_dir / f"{name.lower()}.cycle"
        ir_path.write_text(ind.ir.to_text())
        front_rows.append({
            "index": k, "name": name,
            "time_per_iter": ind.fitness.time_per_iteration,
            "iterations": ind.fitness.iterations,
            "feasible": ind.fitness.feasible,
            "ir_line": ind.ir.to_line(),
        })
        if k < 8:
            report.plot_cycle(ind.ir, front_dir / f"{name.lower()}.png")
    _dump_json(out / "front.json", {
        "config_hash": meta["config_hash"], "seed": meta["seed"],
        "front": front_rows,
    })

    with open(out / "history.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "index", "time_per_iter", "iterations", "ir_text"])
        for rec in history:
            for row in rec["front"]:
                w.writerow([rec["generation"], row["index"],
                            row["time_per_iter"], row["iterations"],
                            cycles.from_text(row["ir_text"]).to_line()])
    _dump_json(out / "history.json", [
        {k: v for k, v in rec.items() if k != "front"} for rec in history
    ])

    feas = [r for r in front_rows if r["feasible"]]
    report.plot_front(feas, [], out / "front.png")
    report.plot_history([{k: v for k, v in rec.items() if k != "front"}
                         for rec in history], out / "history.png")
    print(f"front: {len(front.members)} members -> {out}")
    return 0


def _run_ir(ir, problem, hierarchy, cfg):
    wu = cycles.work_units(ir, hierarchy)
    x, rep = gmres(problem.matrix, problem.rhs,
                   precond=lambda v: cycles.execute(ir, hierarchy, v),
                   rtol=float(cfg["rtol"]), atol=float(cfg["atol"]),
                   restart=int(cfg["restart"]), maxiter=int(cfg["eval_maxiter"]),
                   work_units_per_application=wu)
    return x, rep


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config, args.set)
    problem = _problem(cfg)
    hierarchy = amg.build_hierarchy(problem.matrix, _setup_params(cfg),
                                    problem.row_partition)
    try:
        ir = cycles.from_text(Path(args.ir_file).read_text())
    except cycles.CycleParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    violations = cycles.validate(ir, hierarchy)
    if violations:
        print("cycle does not validate against this hierarchy:", file=sys.stderr)
        for v in violations:
            print(f"  - {v}", file=sys.stderr)
        return 1
    _, rep = _run_ir(ir, problem, hierarchy, cfg)
    payload = rep.to_dict()
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out:
        _dump_json(Path(args.out), payload)
    if args.residuals:
        with open(args.residuals, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual"])
            for i, r in enumerate(rep.residual_history, 1):
                w.writerow([i, r])
    return 0 if rep.converged else 2


def cmd_compare(args) -> int:
    cfg = load_config(args.config, args.set)
    problem = _problem(cfg)
    hierarchy = amg.build_hierarchy(problem.matrix, _setup_params(cfg),
                                    problem.row_partition)

    candidates = []
    front_dir = Path(args.front)
    for path in sorted(front_dir.glob("*.cycle")):
        candidates.append((path.stem.upper(), cycles.from_text(path.read_text())))
    if not candidates:
        print(f"no .cycle files found in {front_dir}", file=sys.stderr)
        return 1
    for name in sorted(cycles.REFERENCE_CONFIGS):
        candidates.append((name, cycles.encode_reference(name)(hierarchy)))

    rows = []
    for name, ir in candidates:
        _, rep = _run_ir(ir, problem, hierarchy, cfg)
        if cfg["cost_mode"] == "work_units":
            tpi = rep.work_units_per_iteration
        else:
            tpi = rep.time_per_iteration
        iters = rep.iterations if rep.converged else int(cfg["eval_maxiter"]) * 10
        rows.append({"name": name, "time_per_iter": tpi, "iterations": iters,
                     "aggregate": tpi * iters, "converged": rep.converged})
    agg = {r["name"]: r["aggregate"] for r in rows}
    for r in rows:
        r["eta1"] = agg["default"] / r["aggregate"]
        r["eta2"] = agg["tuned-1"] / r["aggregate"]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["name", "time_per_iter", "iterations", "aggregate", "eta1", "eta2"])
        for r in rows:
            w.writerow([r["name"], r["time_per_iter"], r["iterations"],
                        r["aggregate"], f"{r['eta1']:.4f}", f"{r['eta2']:.4f}"])
    report.plot_compare(rows, out / "compare.png")
    widths = max(len(r["name"]) for r in rows)
    for r in rows:
        print(f"{r['name']:<{widths}}  tpi={r['time_per_iter']:.4g}  "
              f"iters={r['iterations']}  agg={r['aggregate']:.4g}  "
              f"eta1={r['eta1']:.3f}  eta2={r['eta2']:.3f}")
    return 0


def cmd_gen_problem(args) -> int:
    cfg = load_config(args.config, args.set)
    problem = _problem(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = problem.name
    sparse.write_matrix_market(out / f"{stem}.mtx", problem.matrix)
    scipy.io.mmwrite(str(out / f"{stem}_rhs.mtx"),
                     np.asarray(problem.rhs).reshape(-1, 1))
    print(f"wrote {stem}.mtx ({problem.matrix.n_rows} rows) and {stem}_rhs.mtx -> {out}")
    return 0


def cmd_encode_reference(args) -> int:
    cfg = load_config(args.config, args.set)
    problem = _problem(cfg)
    hierarchy = amg.build_hierarchy(problem.matrix, _setup_params(cfg),
                                    problem.row_partition)
    try:
        builder = cycles.encode_reference(args.name)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 1
    ir = builder(hierarchy)
    text = ir.to_text()
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flexamg",
                description="Flexible AMG cycle design by grammar-guided GP")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key=value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key")

    sp = sub.add_parser("optimize", help="run the evolutionary search")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cost-mode", choices=["work_units", "wallclock"])
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", default="runs/optimize")
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("evaluate", help="evaluate one cycle file on a problem")
    common(sp)
    sp.add_argument("ir_file")
    sp.add_argument("--out", help="write the solve report JSON here")
    sp.add_argument("--residuals", help="write per-iteration residual CSV here")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("compare", help="compare a front directory against the references")
    common(sp)
    sp.add_argument("--front", required=True, help="directory of .cycle files")
    sp.add_argument("--out", default="runs/compare")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("gen-problem", help="write a generated system as Matrix Market")
    common(sp)
    sp.add_argument("--out", default="runs/problems")
    sp.set_defaults(func=cmd_gen_problem)

    sp = sub.add_parser("encode-reference", help="emit a reference V-cycle for a problem")
    common(sp)
    sp.add_argument("name", help="default or tuned-1..tuned-4")
    sp.add_argument("--out", help="write the cycle file here")
    sp.set_defaults(func=cmd_encode_reference)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (problems.ParameterError, cycles.CycleParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (amg.SetupError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
