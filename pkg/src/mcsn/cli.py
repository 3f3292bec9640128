"""Command-line front end: run, sweep, and validate subcommands.

Results land in --out-dir (default "." or $MCSN_OUT_DIR): `run` writes
flux.csv plus summary.json, `sweep` writes sweep.csv plus alphas.json.
Failures print a machine-readable JSON object and exit nonzero.  All
reductions are fixed-order, so identical configs and seeds reproduce
bit-identical CSV files; --deterministic additionally pins the run to one
thread.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import analysis
from .config import ConfigError, load_config
from .driver import StepState, hybrid_step, steady_state_solve
from .mc import InvariantError
from .sn import SnNonConvergence

BALANCE_GATE = 1e-8


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _ns_json(n_s):
    return "inf" if (isinstance(n_s, float) and math.isinf(n_s)) else int(n_s)


def _emit_error(kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}))
    return 1


def _write_flux_csv(path: Path, problem, flux):
    centers = problem.mesh.cell_centers
    with open(path, "w", newline="") as fh:
        if problem.mesh.dimension == 1:
            fh.write("x,flux\n")
            for xc, phi in zip(centers, flux):
                fh.write(f"{_fmt(xc)},{_fmt(phi)}\n")
        else:
            fh.write("x,y,flux\n")
            for (xc, yc), phi in zip(centers, flux):
                fh.write(f"{_fmt(xc)},{_fmt(yc)},{_fmt(phi)}\n")


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, seed_override=_seed_override())
    except (ConfigError, OSError) as exc:
        return _emit_error("config", str(exc))
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    hybrid = _apply_flags(cfg.hybrid, args)
    out_dir = _out_dir(args)

    try:
        if hybrid.mode == "steady":
            res = steady_state_solve(hybrid, cfg.problem)
            flux = res.flux
            steps = None
            iterations = res.sn_iterations
            timings = res.timings
            balance = res.balance_residual
            sn_balance = res.sn_balance_residual
        else:
            state = StepState()
            steps = []
            for _ in range(hybrid.n_steps):
                state = hybrid_step(state, hybrid, cfg.problem)
                steps.append({
                    "t": state.t,
                    "sn_iterations": state.sn_iterations,
                    "weight_balance_residual": state.balance_residual,
                    "sn_balance_residual": state.sn_balance_residual,
                    "census_size": len(state.census),
                    "new_particles": state.n_new_particles,
                    "timings": state.timings,
                })
            flux = state.flux
            iterations = state.sn_iterations
            timings = state.timings
            balance = max(s["weight_balance_residual"] for s in steps)
            sn_balance = max(s["sn_balance_residual"] for s in steps)
    except (SnNonConvergence, InvariantError, ValueError) as exc:
        return _emit_error("solver", str(exc))

    _write_flux_csv(out_dir / "flux.csv", cfg.problem, flux)
    summary = {
        "problem": cfg.problem_name,
        "mode": hybrid.mode,
        "sampler": hybrid.sampler,
        "seed": hybrid.seed,
        "N_s": _ns_json(hybrid.N_s),
        "N_p": hybrid.N_p,
        "sn_iterations": iterations,
        "timings": timings,
        "weight_balance_residual": balance,
        "sn_balance_residual": sn_balance,
    }
    if steps is not None:
        summary["steps"] = steps
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if balance > BALANCE_GATE:
        return _emit_error("balance",
                           f"weight-balance residual {balance:.3e} exceeds {BALANCE_GATE}")
    print(json.dumps({"out_dir": str(out_dir), "sn_iterations": iterations,
                      "weight_balance_residual": balance}))
    return 0


def cmd_sweep(args) -> int:
    try:
        cfg = load_config(args.config, seed_override=_seed_override())
    except (ConfigError, OSError) as exc:
        return _emit_error("config", str(exc))
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if cfg.sweep is None:
        return _emit_error("config", "sweep command requires a 'sweep' section")
    hybrid = _apply_flags(cfg.hybrid, args)
    out_dir = _out_dir(args)
    csv_path = out_dir / "sweep.csv"

    rows_written = 0
    with open(csv_path, "w", newline="") as fh:
        fh.write(",".join(analysis.SWEEP_CSV_HEADER) + "\n")

        def flush_point(p):
            nonlocal rows_written
            ns = "inf" if (isinstance(p.N_s, float) and math.isinf(p.N_s)) else int(p.N_s)
            fh.write(f"{p.problem},{p.sampler},{ns},{p.N_p},{p.replica},"
                     f"{_fmt(p.l2_error)},{_fmt(p.runtime_s)},{p.sn_iterations}\n")
            fh.flush()
            rows_written += 1

        try:
            result = analysis.run_sweep(
                cfg.problem, cfg.sweep["N_s"], cfg.sweep["N_p"],
                cfg.sweep["sampler"], cfg.sweep["replicas"],
                problem_name=cfg.problem_name, base_seed=hybrid.seed,
                start_stride=max(2 ** 20, 4 * max(cfg.sweep["N_p"])),
                sn_order=hybrid.sn_order, sn_tol=hybrid.sn_tol,
                threads=hybrid.threads, progress=flush_point)
        except Exception as exc:  # partial results stay on disk
            fh.write(f"FAILED,{type(exc).__name__},,,,,,\n")
            return _emit_error("solver", f"sweep failed after {rows_written} rows: {exc}")

    alphas = {}
    for (sampler, ns), alpha in result.alphas.items():
        alphas.setdefault(sampler, {})[ns] = alpha
    iters = {}
    for (sampler, ns), m in result.mean_iterations.items():
        iters.setdefault(sampler, {})[ns] = m
    with open(out_dir / "alphas.json", "w") as fh:
        json.dump({"alpha": alphas, "mean_sn_iterations": iters}, fh, indent=2)
        fh.write("\n")
    print(json.dumps({"out_dir": str(out_dir), "rows": rows_written}))
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config, seed_override=_seed_override())
    except (ConfigError, OSError) as exc:
        return _emit_error("config", str(exc))
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    import yaml
    print(yaml.safe_dump(cfg.normalized(), sort_keys=False).rstrip())
    return 0


def _seed_override():
    v = os.environ.get("MCSN_SEED")
    return int(v) if v else None


def _out_dir(args) -> Path:
    out = Path(args.out_dir or os.environ.get("MCSN_OUT_DIR") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_flags(hybrid, args):
    threads = 1 if args.deterministic else max(1, args.threads)
    return replace(hybrid, threads=threads)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mcsn",
        description="Hybrid scatter-capped Monte Carlo / discrete-ordinates "
                    "neutron transport")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("sweep", cmd_sweep),
                     ("validate", cmd_validate)):
        p = sub.add_parser(name)
        p.add_argument("config", help="YAML configuration file")
        p.add_argument("--out-dir", default=None)
        p.add_argument("--deterministic", action="store_true",
                       help="single-threaded fixed-order run")
        p.add_argument("--threads", type=int, default=1)
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
