"""Command-line experiment runner.

Every command reads an experiment JSON (or a manifest written by an earlier
run), derives replica seeds as ``seed + replica``, writes its outputs
atomically under ``--out`` and records a manifest that re-runs it.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import components, stub_intensities, total_edge_length
from .errors import DomainError, MatchingError, SizeError, UnsupportedCase
from .io import read_config, read_matching, write_config, write_json, write_matching, write_text
from .matcher import (brute_force_stable, match_report, run_2cimc, run_greedy, stable_matching,
                      verify_stable)
from .sampling import Deterministic, Geometric, SimParams, Zipf, choose_truncations, sample_config, stream
from .schemes import alternating_truncation, finite_component_scheme, percolating_scheme
from .spatial import Color, PointConfig, Window

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_UNSUPPORTED = 0, 2, 3, 4

SCHEMES = ("finite", "percolating", "truncation")
ENGINES = ("greedy", "rounds")
GRID_AXES = ("side", "dimension", "k", "zipf_s", "geometric_p", "lambda", "lambda_red", "lambda_blue")
LAW_AXES = ("k", "zipf_s", "geometric_p")

SWEEP_COLUMNS = [
    "replica", "seed", "n_red", "n_blue", "stubs_red", "stubs_blue", "edges",
    "unmatched_red_stubs", "unmatched_blue_stubs", "unmatched_fraction",
    "largest_fraction", "n_components", "mean_component_size", "paths", "cycles", "other",
    "mean_edge_length_sum",
]

SWEEP_HELP = """\
sweep output (sweep.csv), one row per (grid point, replica):
  <grid axes in the order given>, then
  replica, seed                 replica index and its seed (seed + replica)
  n_red, n_blue                 point counts
  stubs_red, stubs_blue         stub totals
  edges                         number of edges of the stable multi-matching
  unmatched_red_stubs, unmatched_blue_stubs
  unmatched_fraction            unmatched stubs / all stubs
  largest_fraction              largest component size / number of points
  n_components, mean_component_size
  paths, cycles, other          component shapes (paths/cycles need degrees <= 2)
  mean_edge_length_sum          mean over points of the summed incident edge length
grid axes: side, dimension, k (deterministic degree, both colors), zipf_s,
geometric_p, lambda (both colors), lambda_red, lambda_blue.
"""


class SpecError(ValueError):
    """The experiment description is inconsistent."""


@dataclass
class ExperimentSpec:
    sim: SimParams
    replicas: int = 1
    engine: str = "greedy"
    scheme: Optional[str] = None
    stages: int = 4
    grid: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise SpecError(f"replicas must be >= 1, got {self.replicas!r}")
        if self.engine not in ENGINES:
            raise SpecError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.scheme is not None and self.scheme not in SCHEMES:
            raise SpecError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.stages < 1:
            raise SpecError("stages must be >= 1")

    def to_dict(self) -> dict:
        return {"sim": self.sim.to_dict(), "replicas": self.replicas, "engine": self.engine,
                "scheme": self.scheme, "stages": self.stages, "grid": self.grid}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        if "sim" not in data:
            raise SpecError("experiment needs a 'sim' section")
        return cls(sim=SimParams.from_dict(data["sim"]), replicas=int(data.get("replicas", 1)),
                   engine=data.get("engine", "greedy"), scheme=data.get("scheme"),
                   stages=int(data.get("stages", 4)), grid=dict(data.get("grid") or {}))

    def replica_params(self, i: int) -> SimParams:
        return replace(self.sim, seed=self.sim.seed + i)


def _replica_name(i: int) -> str:
    return f"replica_{i:04d}"


def _load_spec(args) -> tuple[ExperimentSpec, Path]:
    if args.config is None:
        raise SpecError("--config is required")
    path = Path(args.config)
    data = json.loads(path.read_text())
    is_manifest = "spec" in data and "command" in data
    if is_manifest:
        data = data["spec"]
    data = json.loads(json.dumps(data))
    if args.seed is not None:
        data.setdefault("sim", {})["seed"] = args.seed
    if data.get("sim", {}).get("seed") is None:
        raise SpecError("no seed given: set sim.seed in the config or pass --seed")
    if args.replicas is not None:
        data["replicas"] = args.replicas
    if args.engine is not None:
        data["engine"] = args.engine
    if getattr(args, "scheme", None) is not None:
        data["scheme"] = args.scheme
    spec = ExperimentSpec.from_dict(data)
    if args.out is not None:
        out = Path(args.out)
    elif is_manifest:
        out = path.parent
    else:
        raise SpecError("--out is required")
    return spec, out


def _write_manifest(out: Path, command: str, spec: ExperimentSpec, suffix: Optional[str] = None) -> None:
    name = f"manifest.{command}.{suffix}.json" if suffix else f"manifest.{command}.json"
    write_json(out / name,
               {"command": command, "tool": "stubmatch", "version": __version__, "spec": spec.to_dict()})


def _map(fn, items, threads: int):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _config_path(out: Path, i: int) -> Path:
    return out / "configs" / f"{_replica_name(i)}.csv"


def _load_config(out: Path, i: int) -> PointConfig:
    path = _config_path(out, i)
    if not path.exists():
        raise FileNotFoundError(f"missing configuration {path}; run 'generate' first")
    return read_config(path)


# ---------------------------------------------------------------- generate

def _generate_one(job):
    out, spec, i = job
    write_config(_config_path(out, i), sample_config(spec.replica_params(i)))
    return i


def cmd_generate(spec: ExperimentSpec, out: Path, threads: int = 1) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _map(_generate_one, [(out, spec, i) for i in range(spec.replicas)], threads)
    _write_manifest(out, "generate", spec)


# ---------------------------------------------------------------- match

def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()) if v.size else math.nan, math.nan
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format(x, ".17g") if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _match_one(job):
    out, spec, i = job
    cfg = _load_config(out, i)
    rounds = None
    if spec.engine == "rounds":
        m, rounds = run_2cimc(cfg)
    else:
        m = run_greedy(cfg)
    write_matching(out / "matchings" / f"{_replica_name(i)}.csv", cfg, m)
    rep = match_report(cfg, m)
    total_r, total_b = cfg.total_stubs(Color.RED), cfg.total_stubs(Color.BLUE)
    total = total_r + total_b
    report = {
        **rep.to_dict(),
        "replica": i,
        "seed": spec.sim.seed + i,
        "engine": spec.engine,
        "rounds": rounds,
        "stub_total_red": total_r,
        "stub_total_blue": total_b,
        "unmatched_fraction": (rep.unmatched_red_stubs + rep.unmatched_blue_stubs) / total if total else 0.0,
        "saturated": rep.saturated,
        "expected_saturated": "both" if total_r == total_b else ("red" if total_r < total_b else "blue"),
    }
    write_json(out / "reports" / f"{_replica_name(i)}.json", report)
    return report


MATCH_METRICS = ("matched_red_stubs", "matched_blue_stubs", "unmatched_red_stubs",
                 "unmatched_blue_stubs", "edge_count", "unmatched_fraction")


def cmd_match(spec: ExperimentSpec, out: Path, threads: int = 1) -> list[dict]:
    reports = _map(_match_one, [(out, spec, i) for i in range(spec.replicas)], threads)
    rows = []
    for key in MATCH_METRICS:
        mean, se = _mean_se([r[key] for r in reports])
        rows.append([key, mean, se, len(reports)])
    write_text(out / "aggregate.csv", _csv_text(["metric", "mean", "stderr", "replicas"], rows))
    _write_manifest(out, "match", spec)
    return reports


# ---------------------------------------------------------------- scheme

def _scheme_one(job):
    out, spec, i = job
    cfg = _load_config(out, i)
    base = out / "schemes" / spec.scheme
    name = _replica_name(i)
    if spec.scheme == "finite":
        if spec.sim.lambda_red != spec.sim.lambda_blue:
            raise UnsupportedCase("the finite-component scheme needs equal intensities")
        res = finite_component_scheme(cfg, spec.sim.red_law, spec.sim.blue_law)
        payload = {"groups": res.groups, "leftovers": res.leftovers,
                   "thresholds": {str(k): v for k, v in res.thresholds.items()}, **res.metadata}
        m = res.matching
    elif spec.scheme == "percolating":
        res = percolating_scheme(cfg, engine=spec.engine)
        payload = {"path": res.path, **res.metadata}
        m = res.matching
    else:
        caps = choose_truncations(spec.sim.red_law, spec.sim.blue_law, spec.sim.lambda_red,
                                  spec.sim.lambda_blue, spec.stages)
        res = alternating_truncation(cfg, caps, engine=spec.engine)
        payload = {"caps": [list(c) for c in caps], "stages": [s.to_dict() for s in res.stages]}
        m = res.matching
    write_matching(base / f"{name}.matching.csv", cfg, m)
    payload["report"] = match_report(cfg, m).to_dict()
    write_json(base / f"{name}.json", payload)
    return i


def cmd_scheme(spec: ExperimentSpec, out: Path, threads: int = 1) -> None:
    if spec.scheme is None:
        raise SpecError("choose a scheme with --scheme or the 'scheme' config key")
    _map(_scheme_one, [(out, spec, i) for i in range(spec.replicas)], threads)
    _write_manifest(out, "scheme", spec, suffix=spec.scheme)


# ---------------------------------------------------------------- analyze

def _analysis_record(cfg: PointConfig, m) -> dict:
    comp = components(cfg, m)
    return {"components": comp.to_dict(), "intensities": stub_intensities(cfg, m).to_dict(),
            "edge_length": total_edge_length(cfg, m).to_dict()}, comp


def _analyze_one(job):
    out, spec, i = job
    cfg = _load_config(out, i)
    if spec.scheme is not None:
        path = out / "schemes" / spec.scheme / f"{_replica_name(i)}.matching.csv"
    else:
        path = out / "matchings" / f"{_replica_name(i)}.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing matching {path}")
    m = read_matching(path, cfg)
    record, comp = _analysis_record(cfg, m)
    record["replica"] = i
    base = out / "analysis" / spec.scheme if spec.scheme else out / "analysis"
    write_json(base / f"{_replica_name(i)}.json", record)
    write_text(base / f"{_replica_name(i)}.hist.csv", _csv_text(["size", "count"], comp.histogram_rows()))
    return record


def cmd_analyze(spec: ExperimentSpec, out: Path, threads: int = 1) -> None:
    records = _map(_analyze_one, [(out, spec, i) for i in range(spec.replicas)], threads)
    prefix = f"analysis.{spec.scheme}" if spec.scheme else "analysis"
    rows = []
    for r in records:
        c, s = r["components"], r["intensities"]
        rows.append([r["replica"], c["largest_fraction"], c["n_components"], c["mean_size"],
                     c["structure"]["paths"], c["structure"]["cycles"], c["structure"]["other"],
                     s["unmatched_red_rate"], s["unmatched_blue_rate"], r["edge_length"]["mean"]])
    write_text(out / f"{prefix}.csv", _csv_text(
        ["replica", "largest_fraction", "n_components", "mean_component_size", "paths", "cycles",
         "other", "unmatched_red_rate", "unmatched_blue_rate", "mean_edge_length_sum"], rows))
    _write_manifest(out, "analyze", spec, suffix=spec.scheme)


# ---------------------------------------------------------------- sweep

def grid_points(grid: dict) -> list[dict]:
    if not grid:
        raise SpecError("sweep needs a non-empty 'grid'")
    for axis, values in grid.items():
        if axis not in GRID_AXES:
            raise SpecError(f"unknown grid axis {axis!r}; known: {', '.join(GRID_AXES)}")
        if not isinstance(values, list) or not values:
            raise SpecError(f"grid axis {axis!r} needs a non-empty list")
    if "lambda" in grid and ({"lambda_red", "lambda_blue"} & set(grid)):
        raise SpecError("grid axis 'lambda' conflicts with 'lambda_red'/'lambda_blue'")
    laws = [a for a in LAW_AXES if a in grid]
    if len(laws) > 1:
        raise SpecError(f"grid axes {laws} both set the degree law")
    axes = list(grid)
    return [dict(zip(axes, combo)) for combo in itertools.product(*(grid[a] for a in axes))]


def _apply_point(sim: SimParams, point: dict) -> SimParams:
    w = sim.window
    window = Window(point.get("dimension", w.dimension), point.get("side", w.side), w.boundary)
    lam_r = point.get("lambda_red", point.get("lambda", sim.lambda_red))
    lam_b = point.get("lambda_blue", point.get("lambda", sim.lambda_blue))
    red_law, blue_law = sim.red_law, sim.blue_law
    if "k" in point:
        red_law = blue_law = Deterministic(point["k"])
    elif "zipf_s" in point:
        red_law = blue_law = Zipf(point["zipf_s"])
    elif "geometric_p" in point:
        red_law = blue_law = Geometric(point["geometric_p"])
    return SimParams(window, float(lam_r), float(lam_b), red_law, blue_law, sim.seed)


def sweep_row(params: SimParams, engine: str = "greedy") -> list:
    cfg = sample_config(params)
    m = stable_matching(cfg, engine=engine)
    rep = match_report(cfg, m)
    comp = components(cfg, m)
    total = int(cfg.stubs.sum())
    return [
        int((cfg.colors == Color.RED).sum()), int((cfg.colors == Color.BLUE).sum()),
        cfg.total_stubs(Color.RED), cfg.total_stubs(Color.BLUE), rep.edge_count,
        rep.unmatched_red_stubs, rep.unmatched_blue_stubs,
        (rep.unmatched_red_stubs + rep.unmatched_blue_stubs) / total if total else 0.0,
        comp.largest_fraction, comp.n_components, comp.mean_size, comp.paths, comp.cycles, comp.other,
        total_edge_length(cfg, m).mean,
    ]


def _sweep_one(job):
    spec, point, i = job
    params = replace(_apply_point(spec.sim, point), seed=spec.sim.seed + i)
    return [point[a] for a in point] + [i, params.seed] + sweep_row(params, spec.engine)


def cmd_sweep(spec: ExperimentSpec, out: Path, threads: int = 1) -> None:
    points = grid_points(spec.grid)
    for p in points:
        _apply_point(spec.sim, p)
    jobs = [(spec, p, i) for p in points for i in range(spec.replicas)]
    rows = _map(_sweep_one, jobs, threads)
    write_text(out / "sweep.csv", _csv_text(list(spec.grid) + SWEEP_COLUMNS, rows))
    _write_manifest(out, "sweep", spec)


# ---------------------------------------------------------------- validate

VALIDATE_MAX_POINTS = 4000


def _validate_one(job):
    spec, i = job
    cfg = sample_config(spec.replica_params(i))
    greedy = run_greedy(cfg)
    rep = match_report(cfg, greedy)
    checks = {"fairness": rep.matched_red_stubs == rep.matched_blue_stubs == rep.edge_count}
    if cfg.n <= VALIDATE_MAX_POINTS:
        checks["stable"] = verify_stable(cfg, greedy)[0]
        checks["engines_agree"] = run_2cimc(cfg)[0].edges == greedy.edges
    return {"replica": i, "n": cfg.n, "checks": checks}


def _oracle_sweep(seed: int, count: int = 25) -> bool:
    rng = stream(seed, "aux")
    for _ in range(count):
        nr, nb = rng.integers(1, 6, size=2)
        cfg = PointConfig(Window(2, 1.0, "box"), rng.random((nr + nb, 2)),
                          np.r_[np.zeros(nr, np.int8), np.ones(nb, np.int8)], rng.integers(1, 4, nr + nb))
        stable = brute_force_stable(cfg)
        if len(stable) != 1 or stable[0].edges != run_greedy(cfg).edges:
            return False
    return True


def cmd_validate(spec: ExperimentSpec, out: Path, threads: int = 1) -> bool:
    results = _map(_validate_one, [(spec, i) for i in range(spec.replicas)], threads)
    oracle = _oracle_sweep(spec.sim.seed)
    passed = oracle and all(all(r["checks"].values()) for r in results)
    write_json(out / "validate.json", {"passed": passed, "oracle_uniqueness": oracle, "replicas": results})
    _write_manifest(out, "validate", spec)
    return passed


# ---------------------------------------------------------------- entry point

COMMANDS = {
    "generate": (cmd_generate, "sample one configuration file per replica"),
    "match": (cmd_match, "stable multi-matching of every generated configuration"),
    "scheme": (cmd_scheme, "run a factor scheme (finite, percolating, truncation)"),
    "analyze": (cmd_analyze, "component and intensity analysis of stored matchings"),
    "sweep": (cmd_sweep, "sample, match and analyze over a parameter grid"),
    "validate": (cmd_validate, "self-checks: stability, engine agreement, uniqueness oracle"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stubmatch", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text,
                           epilog=SWEEP_HELP if name == "sweep" else None,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", help="experiment JSON or a manifest from an earlier run")
        p.add_argument("--seed", type=int, help="base seed (replica i uses seed + i)")
        p.add_argument("--replicas", type=int)
        p.add_argument("--engine", choices=ENGINES)
        p.add_argument("--out", help="output directory (defaults to the manifest's directory)")
        p.add_argument("--threads", type=int, default=1)
        if name in ("scheme", "analyze"):
            p.add_argument("--scheme", choices=SCHEMES)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn = COMMANDS[args.command][0]
    try:
        spec, out = _load_spec(args)
        result = fn(spec, out, max(1, args.threads))
    except (SpecError, DomainError, MatchingError, SizeError, json.JSONDecodeError, KeyError) as exc:
        print(f"stubmatch: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except UnsupportedCase as exc:
        print(f"stubmatch: unsupported case: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except OSError as exc:
        print(f"stubmatch: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args.command == "validate" and not result:
        print("stubmatch: validation checks failed, see validate.json", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
