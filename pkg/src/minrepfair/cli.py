"""Command-line harness: run k-means and MiniReL over dataset x K x seed
grids, audit saved clusterings, and benchmark initialization and pre-fixing
strategies.

Every command writes into one output directory holding a copy of the
resolved config, CSV tables, JSON-lines traces and plot-ready CSVs.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import kmeans
from .data import Schema, load_dataset, subsample
from .fairness import FairnessSpec, InfeasibleError, beta_for, validate
from .minirel import INIT_SCHEMES, PREFIX_MODES, MiniRelConfig, run as run_minirel

log = logging.getLogger("minrepfair")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3
NOTIONS = ("sp", "eqop")
METHODS = ("kmeans", "minirel-sp", "minirel-eqop")
BENCH_INITS = ("random", "kmeanspp", "warmstart1", "warmstart100")
BENCH_PREFIXES = ("naive", "proportion", "weighted", "local", "off")

DEFAULTS = {
    "K": list(range(4, 16)),
    "alpha": 0.51,
    "methods": list(METHODS),
    "seeds": 10,
    "init": "warmstart",
    "restarts": 10,
    "kmeans_restarts": 10,
    "prefix": "auto",
    "L": 100,
    "notion": "eqop",
    "time_limit": None,
    "node_limit": None,
    "init_schemes": list(BENCH_INITS),
    "prefix_modes": list(BENCH_PREFIXES),
}

TIMING_FIELDS = ("wall_time",)


class ConfigError(ValueError):
    def __init__(self, problems):
        super().__init__("invalid config:\n  " + "\n  ".join(problems))
        self.problems = problems


# ---- config ----

def _int_list(value):
    if isinstance(value, dict) and {"from", "to"} <= set(value):
        return list(range(int(value["from"]), int(value["to"]) + 1))
    if isinstance(value, int):
        return [value]
    return list(value)


def resolve_config(raw: dict, base_dir=None):
    """Fill defaults and validate; raises ConfigError listing every problem."""
    problems = []
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    unknown = set(raw) - set(DEFAULTS) - {"datasets"}
    if unknown:
        problems.append(f"unknown keys: {sorted(unknown)}")
    cfg = dict(DEFAULTS)
    cfg.update({k: v for k, v in raw.items() if k in DEFAULTS})

    datasets = raw.get("datasets")
    if not datasets:
        problems.append("'datasets' must list at least one dataset")
        datasets = []
    resolved = []
    for i, d in enumerate(datasets):
        if not isinstance(d, dict) or "path" not in d or "schema" not in d:
            problems.append(f"datasets[{i}]: needs 'path' and 'schema'")
            continue
        path = Path(d["path"])
        if base_dir is not None and not path.is_absolute() and not path.exists():
            path = Path(base_dir) / path
        if not path.exists():
            problems.append(f"datasets[{i}]: file not found: {d['path']}")
        try:
            Schema.from_dict(d["schema"])
        except (TypeError, ValueError) as e:
            problems.append(f"datasets[{i}]: bad schema: {e}")
        resolved.append({"name": d.get("name", path.stem.split(".")[0]), "path": str(path),
                         "schema": d["schema"], "subsample": d.get("subsample")})
    cfg["datasets"] = resolved

    try:
        cfg["K"] = [int(k) for k in _int_list(cfg["K"])]
        if not cfg["K"] or min(cfg["K"]) < 1:
            problems.append("K values must be positive")
    except (TypeError, ValueError):
        problems.append("K must be an int, a list of ints or {'from': a, 'to': b}")
    try:
        a = float(cfg["alpha"])
        if not 0 < a <= 1:
            problems.append(f"alpha must lie in (0, 1], got {a}")
    except (TypeError, ValueError):
        problems.append("alpha must be a number")
    for key, allowed in (("methods", METHODS), ("init_schemes", BENCH_INITS),
                         ("prefix_modes", BENCH_PREFIXES)):
        bad = [m for m in cfg[key] if m not in allowed]
        if bad:
            problems.append(f"{key}: unknown {bad}; allowed values: {list(allowed)}")
    if cfg["notion"] not in NOTIONS:
        problems.append(f"unknown fairness notion {cfg['notion']!r}; allowed values: {list(NOTIONS)}")
    if cfg["init"] not in INIT_SCHEMES:
        problems.append(f"unknown init {cfg['init']!r}; allowed values: {list(INIT_SCHEMES)}")
    if cfg["prefix"] not in PREFIX_MODES:
        problems.append(f"unknown prefix {cfg['prefix']!r}; allowed values: {list(PREFIX_MODES)}")
    for key in ("seeds", "restarts", "kmeans_restarts", "L"):
        if not isinstance(cfg[key], int) or cfg[key] < 1:
            problems.append(f"{key} must be a positive integer")
    for key in ("time_limit", "node_limit"):
        if cfg[key] is not None and (not isinstance(cfg[key], (int, float)) or cfg[key] <= 0):
            problems.append(f"{key} must be positive or null")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path):
    try:
        with open(path) as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError([f"cannot read config: {e}"])
    except json.JSONDecodeError as e:
        raise ConfigError([f"config is not valid JSON: {e}"])
    return resolve_config(raw, base_dir=Path(path).parent)


# ---- datasets ----

@lru_cache(maxsize=8)
def _load(path, schema_json, size, seed):
    ds = load_dataset(path, Schema.from_dict(json.loads(schema_json)))
    if size is not None and ds.n > size:
        ds = subsample(ds, size, seed)
    return ds


def get_dataset(dspec, scale=None, seed_base=0):
    size = dspec.get("subsample") or scale
    return _load(dspec["path"], json.dumps(dspec["schema"], sort_keys=True), size, seed_base)


# ---- cells ----

def _spec(ds, cfg, K, notion):
    return FairnessSpec(cfg["alpha"], beta_for(notion, ds, cfg["alpha"], K), K)


def _record(dname, K, seed, method, ds, spec, clustering, extra):
    rep = validate(clustering, ds, spec)
    row = {"dataset": dname, "K": K, "seed": seed, "method": method,
           "cost": round(clustering.cost, 10),
           "lambda": ";".join(map(str, rep.lambdas)), "beta": ";".join(map(str, rep.beta)),
           "satisfied": rep.satisfied}
    row.update(extra)
    return row


def run_cell(cell):
    """One (dataset, K, seed, method, variant) job; returns (row, trace records, clustering)."""
    cfg, dspec, K, seed, method, variant, scale, seed_base = cell
    ds = get_dataset(dspec, scale, seed_base)
    notion = method.split("-", 1)[1] if method.startswith("minirel-") else cfg["notion"]
    spec = _spec(ds, cfg, K, notion)
    key = {"dataset": dspec["name"], "K": K, "seed": seed, "method": method, "variant": variant}
    t0 = time.perf_counter()
    if method == "kmeans":
        cl = kmeans.best_of(ds, K, restarts=cfg["kmeans_restarts"], seed=seed)
        extra = {"variant": variant, "prefix": "", "status": "ok", "iterations": cl.iterations, "nodes": 0,
                 "converged": True, "partial": False, "wall_time": time.perf_counter() - t0}
        row = _record(dspec["name"], K, seed, method, ds, spec, cl, extra)
        return row, [], {**key, "assignment": cl.assignment.tolist()}

    init, restarts, prefix = cfg["init"], cfg["restarts"], cfg["prefix"]
    if variant.startswith("init:"):
        scheme = variant[5:]
        init = "warmstart" if scheme.startswith("warmstart") else scheme
        restarts = int(scheme[9:]) if scheme.startswith("warmstart") else restarts
    elif variant.startswith("prefix:"):
        prefix = variant[7:]
    mcfg = MiniRelConfig(K, spec, init=init, restarts=restarts, L=cfg["L"], prefix=prefix,
                         seed=seed, time_limit=cfg["time_limit"], node_limit=cfg["node_limit"])
    try:
        tr = run_minirel(ds, mcfg)
    except InfeasibleError as e:
        row = {"dataset": dspec["name"], "K": K, "seed": seed, "method": method, "cost": math.nan,
               "lambda": "", "beta": ";".join(map(str, spec.beta)), "satisfied": False,
               "variant": variant, "prefix": prefix, "status": f"infeasible: {e}", "iterations": 0, "nodes": 0,
               "converged": False, "partial": True, "wall_time": time.perf_counter() - t0}
        return row, [], None
    status = "ok" if tr.clustering is not None else "budget"
    extra = {"variant": variant, "prefix": tr.prefix, "status": status, "iterations": tr.iterations,
             "nodes": int(sum(tr.nodes)), "converged": tr.converged, "partial": tr.partial,
             "wall_time": time.perf_counter() - t0}
    records = [{**key, **r} for r in tr.records()]
    if tr.clustering is None:
        row = {"dataset": dspec["name"], "K": K, "seed": seed, "method": method, "cost": math.nan,
               "lambda": "", "beta": ";".join(map(str, spec.beta)), "satisfied": False, **extra}
        return row, records, None
    row = _record(dspec["name"], K, seed, method, ds, spec, tr.clustering, extra)
    return row, records, {**key, "assignment": tr.clustering.assignment.tolist()}


def _execute(cells, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(run_cell, cells))
    else:
        out = [run_cell(c) for c in cells]
    order = sorted(range(len(cells)), key=lambda i: (
        cells[i][1]["name"], cells[i][2], cells[i][4], cells[i][5], cells[i][3]))
    return [out[i] for i in order]


# ---- output ----

ROW_FIELDS = ["dataset", "K", "seed", "method", "variant", "prefix", "cost", "lambda", "beta", "satisfied",
              "status", "iterations", "nodes", "converged", "partial", "wall_time"]


def _write_csv(path, rows, fields):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def _write_jsonl(path, records):
    with open(path, "w") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")


def mean_stderr(values):
    v = np.asarray([x for x in values if not (isinstance(x, float) and math.isnan(x))], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


def _group_rows(rows, keys):
    groups = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    return groups


def plot_tables(rows):
    """(lambda-vs-K rows, cost-vs-K rows) averaged over seeds."""
    lam, cost = [], []
    for (dname, method, K), rs in sorted(_group_rows(rows, ("dataset", "method", "K")).items()):
        m, se = mean_stderr([r["cost"] for r in rs])
        cost.append({"dataset": dname, "method": method, "K": K, "cost_mean": m, "cost_stderr": se,
                     "runs": len(rs)})
        per_group = [list(map(int, r["lambda"].split(";"))) for r in rs if r["lambda"]]
        beta = list(map(int, rs[0]["beta"].split(";"))) if rs[0]["beta"] else []
        for g in range(len(beta)):
            vals = [p[g] for p in per_group]
            m, se = mean_stderr(vals)
            lam.append({"dataset": dname, "method": method, "K": K, "group": g, "lambda_mean": m,
                        "lambda_stderr": se, "beta": beta[g]})
    return lam, cost


def write_outputs(out, cfg, results, command):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as f:
        json.dump({"command": command, **cfg}, f, indent=2, sort_keys=True)
    rows = [r for r, _, _ in results]
    _write_csv(out / "results.csv", rows, ROW_FIELDS)
    _write_jsonl(out / "results.jsonl", rows)
    _write_jsonl(out / "traces.jsonl", [rec for _, recs, _ in results for rec in recs])
    _write_jsonl(out / "clusterings.jsonl", [c for _, _, c in results if c is not None])
    return rows


def summarize(rows, by, baseline_variant=None):
    """Mean and standard error of time, iterations and cost per ``by`` key;
    with ``baseline_variant``, adds the mean time ratio baseline / variant."""
    out = []
    groups = _group_rows(rows, by)
    for key, rs in sorted(groups.items()):
        rec = dict(zip(by, key))
        for field in ("wall_time", "iterations", "cost"):
            m, se = mean_stderr([r[field] for r in rs])
            rec[f"{field}_mean"], rec[f"{field}_stderr"] = m, se
        rec["runs"] = len(rs)
        out.append(rec)
    if baseline_variant is not None:
        base = {tuple(r[k] for k in by if k != "variant"): r["wall_time_mean"]
                for r in out if r.get("variant") == baseline_variant}
        for rec in out:
            b = base.get(tuple(rec[k] for k in by if k != "variant"))
            rec["speedup_vs_full"] = b / rec["wall_time_mean"] if b and rec["wall_time_mean"] else math.nan
    return out


def _cells(cfg, methods_variants, scale, seed_base):
    cells = []
    for d in cfg["datasets"]:
        for K in cfg["K"]:
            for method, variant in methods_variants:
                for s in range(cfg["seeds"]):
                    cells.append((cfg, d, K, seed_base + s, method, variant, scale, seed_base))
    return cells


def cmd_run(args, cfg):
    cells = _cells(cfg, [(m, "default") for m in cfg["methods"]], args.scale, args.seed_base)
    results = _execute(cells, args.jobs)
    rows = write_outputs(args.out, cfg, results, "run")
    lam, cost = plot_tables(rows)
    _write_csv(Path(args.out) / "lambda_vs_k.csv", lam,
               ["dataset", "method", "K", "group", "lambda_mean", "lambda_stderr", "beta"])
    _write_csv(Path(args.out) / "cost_vs_k.csv", cost,
               ["dataset", "method", "K", "cost_mean", "cost_stderr", "runs"])
    return rows


def _bench(args, cfg, variants, command, baseline=None):
    method = f"minirel-{cfg['notion']}"
    cells = _cells(cfg, [(method, v) for v in variants], args.scale, args.seed_base)
    results = _execute(cells, args.jobs)
    rows = write_outputs(args.out, cfg, results, command)
    summary = summarize(rows, ("dataset", "K", "variant"), baseline)
    fields = list(summary[0]) if summary else []
    _write_csv(Path(args.out) / "summary.csv", summary, fields)
    overall = summarize(rows, ("dataset", "variant"), baseline)
    _write_csv(Path(args.out) / "summary_by_dataset.csv", overall, list(overall[0]) if overall else [])
    return rows


def cmd_bench_init(args, cfg):
    return _bench(args, cfg, [f"init:{s}" for s in cfg["init_schemes"]], "bench-init")


def cmd_bench_prefix(args, cfg):
    baseline = "prefix:off" if "off" in cfg["prefix_modes"] else None
    return _bench(args, cfg, [f"prefix:{m}" for m in cfg["prefix_modes"]], "bench-prefix", baseline)


def audit_records(cfg, clusterings, scale=None, seed_base=0, notion=None):
    """Recompute validation reports for saved clusterings."""
    by_name = {d["name"]: d for d in cfg["datasets"]}
    out = []
    for c in clusterings:
        d = by_name.get(c["dataset"])
        if d is None:
            raise ConfigError([f"clustering refers to unknown dataset {c['dataset']!r}"])
        ds = get_dataset(d, scale, seed_base)
        assignment = np.asarray(c["assignment"], dtype=np.int64)
        if assignment.shape != (ds.n,):
            raise ConfigError([f"clustering for {c['dataset']} has {assignment.size} points, dataset has {ds.n}"])
        K = int(c["K"])
        method = c.get("method", "")
        nt = notion or (method.split("-", 1)[1] if method.startswith("minirel-") else cfg["notion"])
        spec = _spec(ds, cfg, K, nt)
        cl = kmeans.Clustering.from_assignment(ds, assignment, K)
        rep = validate(cl, ds, spec)
        out.append({**{k: c[k] for k in ("dataset", "K", "seed", "method", "variant") if k in c},
                    "notion": nt, **rep.to_dict()})
    return out


def cmd_audit(args, cfg):
    with open(args.clusterings) as f:
        clusterings = [json.loads(line) for line in f if line.strip()]
    reports = audit_records(cfg, clusterings, args.scale, args.seed_base, args.notion)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_jsonl(out / "audit.jsonl", reports)
    for r in reports:
        print(f"{r['dataset']} K={r['K']} seed={r.get('seed')} {r.get('method', '')}: "
              f"lambda={r['lambda']} beta={r['beta']} satisfied={r['satisfied']}")
    return reports


COMMANDS = {"run": cmd_run, "audit": cmd_audit, "bench-init": cmd_bench_init,
            "bench-prefix": cmd_bench_prefix}


def build_parser():
    p = argparse.ArgumentParser(prog="minrepfair", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--scale", type=int, default=None,
                       help="subsample datasets larger than N points to N")
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--seed-base", type=int, default=0)
        if name == "audit":
            s.add_argument("--clusterings", required=True, help="clusterings.jsonl from a run")
            s.add_argument("--notion", choices=NOTIONS, default=None)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = COMMANDS[args.command](args, cfg)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_CONFIG
    if args.command != "audit" and any(str(r["status"]).startswith("infeasible") for r in rows):
        print("some cells were infeasible; partial results written", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
