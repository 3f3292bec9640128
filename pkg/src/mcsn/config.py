"""YAML run-configuration parsing and validation.

A config is a single YAML mapping.  Minimal steady run:

    problem: reed
    sampler: qmc
    N_s: 0
    N_p: 4096

Full key set (defaults in parentheses): problem (preset name or inline
mapping), mode ("steady" | "time"), dt, n_steps (1), time_bins (1), sampler
("mc" | "qmc"), seed (0), halton_start_index (0), N_s (0 or "inf"), N_p
(4096), remap_variant ("remap" | "legacy" | "none"), sn: {order (4), tol
(1e-4), max_iter (2000)}, sweep: {N_s, N_p, sampler, replicas} for the sweep
command.  Unknown keys produce warnings, not errors.

Inline problems:

    problem:
      kind: slab                 # or "xy"
      cells: 40                  # 1D; use nx/ny for "xy"
      regions:
        - {x: [0.0, 1.0], sigma_a: 1.0, sigma_s: 0.5, q: 1.0}
      boundary: {x_lo: 0.0}      # optional incoming intensity per face
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .benchmarks import PRESETS
from .driver import HybridConfig
from .geometry import BoundarySource, Mesh, ProblemSpec, RegionSpec

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]

_KNOWN_TOP = {"problem", "mode", "dt", "n_steps", "time_bins", "sampler",
              "seed", "halton_start_index", "dimension_budget", "N_s", "N_p",
              "remap_variant", "sn", "sweep"}
_KNOWN_SN = {"order", "tol", "max_iter", "refine"}
_KNOWN_SWEEP = {"N_s", "N_p", "sampler", "replicas"}
_KNOWN_PROBLEM = {"kind", "cells", "nx", "ny", "regions", "boundary"}
_KNOWN_REGION = {"x", "y", "sigma_a", "sigma_s", "q"}


class ConfigError(ValueError):
    """Invalid configuration, with a config-path location in the message."""


def _parse_ns(value, where="N_s"):
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigError(f"{where}: invalid scatter cap {value!r}")
    if isinstance(value, float) and math.isinf(value):
        return math.inf
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise ConfigError(f"{where}: invalid scatter cap {value!r}")
    return int(value)


def _build_problem(spec, warnings) -> tuple:
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigError(f"problem: unknown preset {spec!r} "
                              f"(available: {', '.join(sorted(PRESETS))})")
        return spec, PRESETS[spec]()
    if not isinstance(spec, dict):
        raise ConfigError("problem: expected a preset name or a mapping")
    for k in spec:
        if k not in _KNOWN_PROBLEM:
            warnings.append(f"problem.{k}: unknown key (ignored)")
    kind = spec.get("kind", "slab")
    regions_cfg = spec.get("regions")
    if not regions_cfg:
        raise ConfigError("problem.regions: at least one region is required")
    regions = []
    for i, r in enumerate(regions_cfg):
        for k in r:
            if k not in _KNOWN_REGION:
                warnings.append(f"problem.regions[{i}].{k}: unknown key (ignored)")
        try:
            if kind == "slab":
                x0, x1 = r["x"]
                regions.append(RegionSpec((float(x0),), (float(x1),),
                                          float(r.get("sigma_a", 0.0)),
                                          float(r.get("sigma_s", 0.0)),
                                          float(r.get("q", 0.0))))
            elif kind == "xy":
                x0, x1 = r["x"]
                y0, y1 = r["y"]
                regions.append(RegionSpec((float(x0), float(y0)),
                                          (float(x1), float(y1)),
                                          float(r.get("sigma_a", 0.0)),
                                          float(r.get("sigma_s", 0.0)),
                                          float(r.get("q", 0.0))))
            else:
                raise ConfigError(f"problem.kind: unknown kind {kind!r}")
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"problem.regions[{i}]: {exc!r}") from None
    xs = [v for r in regions for v in (r.lo[0], r.hi[0])]
    try:
        if kind == "slab":
            mesh = Mesh.uniform_1d(min(xs), max(xs), int(spec.get("cells", 40)))
        else:
            ys = [v for r in regions for v in (r.lo[1], r.hi[1])]
            mesh = Mesh.uniform_2d(min(xs), max(xs), int(spec.get("nx", 20)),
                                   min(ys), max(ys), int(spec.get("ny", 20)))
        boundary = BoundarySource(**(spec.get("boundary") or {}))
        return "custom", ProblemSpec(mesh, regions, boundary)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"problem: {exc}") from None


@dataclass
class RunConfig:
    """Parsed configuration: solver settings plus the problem instance."""

    hybrid: HybridConfig
    problem: ProblemSpec
    problem_name: str
    sweep: dict | None = None
    warnings: list = field(default_factory=list)

    def normalized(self) -> dict:
        h = self.hybrid
        out = {
            "problem": self.problem_name,
            "mode": h.mode,
            "sampler": h.sampler,
            "seed": h.seed,
            "halton_start_index": h.halton_start_index,
            "N_s": "inf" if (isinstance(h.N_s, float) and math.isinf(h.N_s))
                   else int(h.N_s),
            "N_p": h.N_p,
            "remap_variant": h.remap_variant,
            "sn": {"order": h.sn_order, "tol": h.sn_tol,
                   "max_iter": h.sn_max_iter,
                   "refine": h.sn_refine if h.sn_refine is not None else "auto"},
        }
        if h.mode == "time":
            out["dt"] = h.dt
            out["n_steps"] = h.n_steps
            out["time_bins"] = h.time_bins
        if self.sweep:
            out["sweep"] = {
                "N_s": ["inf" if (isinstance(v, float) and math.isinf(v))
                        else int(v) for v in self.sweep["N_s"]],
                "N_p": self.sweep["N_p"],
                "sampler": self.sweep["sampler"],
                "replicas": self.sweep["replicas"],
            }
        return out


def parse_config(data: dict, *, seed_override=None) -> RunConfig:
    """Validate a raw mapping into a RunConfig; raises ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    warnings = []
    for k in data:
        if k not in _KNOWN_TOP:
            warnings.append(f"{k}: unknown key (ignored)")
    name, problem = _build_problem(data.get("problem", "reed"), warnings)

    sn = data.get("sn") or {}
    if not isinstance(sn, dict):
        raise ConfigError("sn: expected a mapping")
    for k in sn:
        if k not in _KNOWN_SN:
            warnings.append(f"sn.{k}: unknown key (ignored)")

    mode = data.get("mode", "steady")
    seed = int(seed_override if seed_override is not None else data.get("seed", 0))
    try:
        hybrid = HybridConfig(
            N_s=_parse_ns(data.get("N_s", 0)),
            N_p=int(data.get("N_p", 4096)),
            sampler=str(data.get("sampler", "mc")),
            seed=seed,
            halton_start_index=int(data.get("halton_start_index", 0)),
            dimension_budget=data.get("dimension_budget"),
            sn_order=int(sn.get("order", 4)),
            sn_tol=float(sn.get("tol", 1e-4)),
            sn_max_iter=int(sn.get("max_iter", 2000)),
            sn_refine=int(sn["refine"]) if sn.get("refine") is not None else None,
            mode=mode,
            dt=float(data["dt"]) if "dt" in data and data["dt"] is not None else None,
            n_steps=int(data.get("n_steps", 1)),
            time_bins=int(data.get("time_bins", 1)),
            remap_variant=str(data.get("remap_variant", "remap")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if hybrid.sampler not in ("mc", "qmc"):
        raise ConfigError(f"sampler: expected 'mc' or 'qmc', got {hybrid.sampler!r}")

    sweep = None
    if "sweep" in data and data["sweep"] is not None:
        raw = data["sweep"]
        if not isinstance(raw, dict):
            raise ConfigError("sweep: expected a mapping")
        for k in raw:
            if k not in _KNOWN_SWEEP:
                warnings.append(f"sweep.{k}: unknown key (ignored)")
        try:
            sweep = {
                "N_s": [_parse_ns(v, "sweep.N_s") for v in raw.get("N_s", [hybrid.N_s])],
                "N_p": [int(v) for v in raw.get("N_p", [hybrid.N_p])],
                "sampler": list(raw.get("sampler", [hybrid.sampler])),
                "replicas": int(raw.get("replicas", 1)),
            }
        except TypeError as exc:
            raise ConfigError(f"sweep: {exc}") from None
        for s in sweep["sampler"]:
            if s not in ("mc", "qmc"):
                raise ConfigError(f"sweep.sampler: expected 'mc' or 'qmc', got {s!r}")
        if sweep["replicas"] < 1 or any(n < 1 for n in sweep["N_p"]):
            raise ConfigError("sweep: replicas and N_p entries must be >= 1")
    return RunConfig(hybrid, problem, name, sweep, warnings)


def load_config(path, *, seed_override=None) -> RunConfig:
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return parse_config(data or {}, seed_override=seed_override)
