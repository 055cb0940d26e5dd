"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 decode failure. File and user labels in every output are one-based.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from mccs import combinatorics as comb
from mccs import rates, simulator
from mccs.errors import MccsError, SolverError
from mccs.lp import build, lower_bound, optimize_mccs, to_lp_format
from mccs.model import (
    ProblemInstance,
    instance_from_dict,
    instance_to_dict,
    new_instance,
    zipf_popularity,
)

log = logging.getLogger("mccs")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_DECODE = 0, 2, 3, 4

CSV_COLUMNS = ["theta", "M", "rate_p0", "rate_p1", "rate_p2", "gap_p2",
               "status_p0", "status_p1", "status_p2"]
DEFAULT_M_GRID = [round(0.1 * i, 10) for i in range(1, 41)]
DEFAULT_THETA_GRID = [round(0.1 * i, 10) for i in range(0, 21)]
DEFAULT_THETAS = [0.8, 1.4]
DEFAULT_CACHES = [0.9, 2.1]


class ConfigError(MccsError):
    pass


def parse_grid(text: str) -> list[float]:
    """``"a:b:step"`` (inclusive of b) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 10) for i in range(count)]
        else:
            values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; use start:stop:step or v1,v2,...") from None
    if not values:
        raise ConfigError("grid is empty")
    return values


def _fmt(x: float) -> str:
    return f"{x:.9g}"


# -- instance configuration ---------------------------------------------------

@dataclass
class InstanceSpec:
    """Partially specified instance; sweeps fill in theta or M per point."""

    n_files: int = 4
    k_users: int = 4
    cache_size: Optional[float] = None
    theta: Optional[float] = None
    popularity: Optional[list[float]] = None

    def build(self, cache_size: Optional[float] = None, theta: Optional[float] = None) -> ProblemInstance:
        m = self.cache_size if cache_size is None else cache_size
        if m is None:
            raise ConfigError("cache size is required (--cache)")
        th = self.theta if theta is None else theta
        if self.popularity is not None and theta is None:
            pop = self.popularity
        elif th is not None:
            pop = zipf_popularity(self.n_files, th)
        else:
            raise ConfigError("popularity is required (--zipf or --popularity)")
        return new_instance(self.n_files, self.k_users, m, pop)


def instance_spec(args) -> InstanceSpec:
    spec = InstanceSpec()
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        spec.n_files = cfg.get("n_files", spec.n_files)
        spec.k_users = cfg.get("k_users", spec.k_users)
        spec.cache_size = cfg.get("cache_size")
        pop = cfg.get("popularity")
        if isinstance(pop, dict):
            spec.theta = pop.get("zipf_theta")
        elif pop is not None:
            spec.popularity = [float(x) for x in pop]
        if spec.cache_size is not None and pop is not None:
            instance_from_dict(cfg)  # full schema validation
    if args.files is not None:
        spec.n_files = args.files
    if args.users is not None:
        spec.k_users = args.users
    if getattr(args, "cache", None) is not None:
        spec.cache_size = args.cache[-1] if isinstance(args.cache, list) else args.cache
    if getattr(args, "zipf", None) is not None:
        spec.theta = args.zipf[-1] if isinstance(args.zipf, list) else args.zipf
        spec.popularity = None
    if args.popularity is not None:
        try:
            spec.popularity = [float(x) for x in args.popularity.split(",")]
        except ValueError:
            raise ConfigError(f"bad popularity list {args.popularity!r}") from None
        spec.theta = None
    return spec


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _labels(instance: ProblemInstance) -> list[int]:
    return [i + 1 for i in instance.permutation]


def _instance_json(instance: ProblemInstance) -> dict:
    out = instance_to_dict(instance)
    out["file_labels"] = _labels(instance)
    return out


# -- optimize -----------------------------------------------------------------

def cmd_optimize(args) -> int:
    inst = instance_spec(args).build()
    sol = optimize_mccs(inst, backend=args.backend)
    result = {
        "instance": _instance_json(inst),
        "problem": "P0",
        "rate": sol.optimal_rate,
        "placement": sol.placement.to_list(),
        "validation": sol.validation.as_dict(),
        "lp": {"status": sol.lp_solution.status.value, "iterations": sol.lp_solution.iterations},
    }
    _emit(json.dumps(result, indent=2) + "\n", args.out)
    return EXIT_OK


# -- sweeps -------------------------------------------------------------------

def sweep_point(spec: InstanceSpec, theta: Optional[float], cache: float,
                backend: str = "simplex") -> dict:
    """Solve P0, P1 and P2 at one grid point; failures are recorded, not raised."""
    inst = spec.build(cache_size=cache, theta=theta)
    row = {"theta": theta, "M": cache}
    for name, fn in [("p0", lambda: optimize_mccs(inst, backend)),
                     ("p1", lambda: lower_bound(inst, "P1", backend)),
                     ("p2", lambda: lower_bound(inst, "P2", backend))]:
        try:
            sol = fn()
            row[f"rate_{name}"] = sol.optimal_rate
            row[f"status_{name}"] = sol.lp_solution.status.value
        except SolverError as exc:
            row[f"rate_{name}"] = math.nan
            row[f"status_{name}"] = exc.status.value if exc.status is not None else "error"
    row["gap_p2"] = row["rate_p0"] - row["rate_p2"]
    return row


def _point(job):
    return sweep_point(*job)


def run_sweep(spec: InstanceSpec, points: Sequence[tuple[Optional[float], float]],
              jobs: int = 1, backend: str = "simplex") -> list[dict]:
    """Evaluate every ``(theta, M)`` point; rows come back in grid order."""
    work = [(spec, th, m, backend) for th, m in points]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_point, work))
    return [_point(w) for w in work]


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([
            "" if r["theta"] is None else _fmt(r["theta"]),
            _fmt(r["M"]),
            _fmt(r["rate_p0"]), _fmt(r["rate_p1"]), _fmt(r["rate_p2"]), _fmt(r["gap_p2"]),
            r["status_p0"], r["status_p1"], r["status_p2"],
        ])
    return buf.getvalue()


def _finish_sweep(rows: list[dict], out: Optional[str]) -> int:
    _emit(rows_to_csv(rows), out)
    failed = [r for r in rows if any(r[f"status_{p}"] != "optimal" for p in ("p0", "p1", "p2"))]
    if failed:
        log.warning("%d sweep point(s) did not solve to optimality", len(failed))
        return EXIT_SOLVER
    return EXIT_OK


def cmd_sweep_m(args) -> int:
    spec = instance_spec(args)
    grid = parse_grid(args.grid) if args.grid else DEFAULT_M_GRID
    if args.popularity is not None:
        thetas: list[Optional[float]] = [None]
    else:
        thetas = args.zipf or ([spec.theta] if spec.theta is not None else DEFAULT_THETAS)
    for m in grid:
        if not 0 <= m <= spec.n_files:
            raise ConfigError(f"cache size {m} outside [0, {spec.n_files}]")
    points = [(th, m) for th in thetas for m in grid]
    return _finish_sweep(run_sweep(spec, points, args.jobs, args.backend), args.out)


def cmd_sweep_theta(args) -> int:
    spec = instance_spec(args)
    if args.popularity is not None:
        raise ConfigError("sweep-theta generates Zipf popularity; drop --popularity")
    grid = parse_grid(args.grid) if args.grid else DEFAULT_THETA_GRID
    if min(grid) < 0:
        raise ConfigError("Zipf exponents must be nonnegative")
    caches = args.cache or ([spec.cache_size] if spec.cache_size is not None else DEFAULT_CACHES)
    points = [(th, m) for m in caches for th in grid]
    return _finish_sweep(run_sweep(spec, points, args.jobs, args.backend), args.out)


# -- gap report ---------------------------------------------------------------

def gap_report(inst: ProblemInstance, source: str = "P2", per_demand: bool = False,
               backend: str = "simplex") -> dict:
    """Per demand class, compare the MCCS load with the converse bound at the
    optimal popularity-first placement."""
    sol = lower_bound(inst, "P2", backend) if source == "P2" else optimize_mccs(inst, backend)
    placement = sol.placement
    a = placement
    k = inst.k_users
    classes = []
    for cls in comb.enumerate_demand_classes(inst):
        lb = rates.rate_lb_popfirst(inst, a, cls.distinct_set)
        gaps, weighted = [], []
        worst = None
        demand_rows = []
        for d in cls.demands(k):
            pr = comb.demand_probability(inst, d)
            r = rates.rate_mccs(inst, a, d).total
            gap = r - lb
            weighted.append(pr * gap)
            gaps.append(gap)
            if worst is None or gap > worst[0] + 1e-15:
                worst = (gap, d)
            if per_demand:
                demand_rows.append({"demand": [n + 1 for n in d], "probability": pr,
                                    "rate_mccs": r, "gap": gap})
        mean_gap = math.fsum(weighted) / cls.weight
        padded = rates.padded_subsets(inst, a, worst[1])
        entry = {
            "files": [n + 1 for n in cls.distinct_set],
            "weight": cls.weight,
            "region": rates.region(k, len(cls.distinct_set)),
            "rate_lb": lb,
            "mean_gap": mean_gap,
            "max_gap": worst[0],
            "worst_demand": [n + 1 for n in worst[1]],
            "padded_subsets": [{"users": [u + 1 for u in comb.members(s)], "excess": e}
                               for s, e in padded],
        }
        if per_demand:
            entry["demands"] = demand_rows
        classes.append(entry)
    r_mccs = rates.avg_rate_mccs(inst, a)
    r_lb = rates.avg_rate_lb(inst, a, popfirst=True)
    return {
        "instance": _instance_json(inst),
        "placement_source": source,
        "placement": placement.to_list(),
        "avg_rate_mccs": r_mccs,
        "avg_rate_lb": r_lb,
        "avg_gap": r_mccs - r_lb,
        "classes": classes,
    }


def cmd_gap(args) -> int:
    inst = instance_spec(args).build()
    report = gap_report(inst, args.placement_from, args.per_demand, args.backend)
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


# -- simulate -----------------------------------------------------------------

def simulate_summary(inst: ProblemInstance, seed: int, file_bits: Optional[int] = None,
                     backend: str = "simplex") -> dict:
    f = file_bits or simulator.default_file_bits(inst.k_users)
    placement = optimize_mccs(inst, backend).placement
    layout = simulator.quantize_placement(placement, f)
    files = simulator.make_files(inst.n_files, f, seed)
    caches = simulator.build_caches(inst, layout, files)
    checks = [simulator.check_demand(inst, placement, layout, files, caches, d)
              for d in comb.iter_demands(inst)]
    decoded = sum(c.decoded for c in checks)
    within = all(c.deviation * f <= c.messages + 1e-6 for c in checks)
    return {
        "instance": _instance_json(inst),
        "F": f,
        "seed": seed,
        "demands": len(checks),
        "decoded": decoded,
        "max_deviation": max(c.deviation for c in checks),
        "max_deviation_bits": max(c.deviation for c in checks) * f,
        "deviation_within_bound": within,
        "max_cache_bits": max(c.bits for c in caches),
        "failed_demands": [[n + 1 for n in c.demand] for c in checks if not c.decoded],
    }


def cmd_simulate(args) -> int:
    inst = instance_spec(args).build()
    summary = simulate_summary(inst, args.seed, args.file_bits, args.backend)
    if args.export_log:
        if not args.demand:
            raise ConfigError("--export-log needs --demand")
        d = [int(x) - 1 for x in args.demand.split(",")]
        if len(d) != inst.k_users or min(d) < 0 or max(d) >= inst.n_files:
            raise ConfigError(f"demand {args.demand!r} is not a valid demand vector")
        f = summary["F"]
        layout = simulator.quantize_placement(optimize_mccs(inst, args.backend).placement, f)
        files = simulator.make_files(inst.n_files, f, args.seed)
        tlog = simulator.deliver(inst, layout, files, d)
        with open(args.export_log, "w") as fh:
            json.dump(tlog.to_json(f, args.seed, d), fh, indent=2)
    _emit(json.dumps(summary, indent=2) + "\n", args.out)
    return EXIT_OK if summary["decoded"] == summary["demands"] else EXIT_DECODE


# -- dump-lp ------------------------------------------------------------------

def cmd_dump_lp(args) -> int:
    inst = instance_spec(args).build()
    _emit(to_lp_format(build(inst, args.problem)), args.out)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def _common(p: argparse.ArgumentParser, cache_append: bool = False, zipf_append: bool = False) -> None:
    p.add_argument("--config", help="JSON instance file")
    p.add_argument("--files", type=int, help="number of files N")
    p.add_argument("--users", type=int, help="number of users K")
    if cache_append:
        p.add_argument("--cache", type=float, action="append", help="cache size M (repeatable)")
    else:
        p.add_argument("--cache", type=float, help="cache size M in files")
    pop = p.add_mutually_exclusive_group()
    if zipf_append:
        pop.add_argument("--zipf", type=float, action="append", help="Zipf exponent (repeatable)")
    else:
        pop.add_argument("--zipf", type=float, help="Zipf exponent theta")
    pop.add_argument("--popularity", help="comma-separated file probabilities")
    p.add_argument("--out", help="write output here instead of stdout")
    p.add_argument("--backend", default="simplex", choices=["simplex", "highs"],
                   help="LP solver (default: embedded simplex)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mccs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="optimal popularity-first MCCS placement (P0)")
    _common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep-m", help="P0/P1/P2 rates over a cache-size grid")
    _common(p, zipf_append=True)
    p.add_argument("--grid", help="M grid, start:stop:step or list (default 0.1:4.0:0.1)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep_m)

    p = sub.add_parser("sweep-theta", help="P0/P1/P2 rates over a Zipf-exponent grid")
    _common(p, cache_append=True)
    p.add_argument("--grid", help="theta grid (default 0.0:2.0:0.1)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep_theta)

    p = sub.add_parser("gap", help="per-demand-class zero-padding gap report")
    _common(p)
    p.add_argument("--placement-from", choices=["P2", "P0"], default="P2")
    p.add_argument("--per-demand", action="store_true", help="list every demand vector")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("simulate", help="bit-level delivery and decoding over all demands")
    _common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--file-bits", type=int, help="file size F in bits (default 2^K * 1024)")
    p.add_argument("--demand", help="one-based demand vector for --export-log, e.g. 1,1,2,3")
    p.add_argument("--export-log", help="write the transmission log for --demand as JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dump-lp", help="write P0, P1 or P2 in CPLEX LP format")
    _common(p)
    p.add_argument("--problem", choices=["P0", "P1", "P2"], default="P0")
    p.set_defaults(func=cmd_dump_lp)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except SolverError as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    except (MccsError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
