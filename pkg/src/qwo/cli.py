"""Command-line front end: ``discover``, ``simulate``, ``bench`` and ``evaluate``.

Exit codes: 0 success, 2 usage error, 3 data error (unreadable or malformed
input), 4 numerical failure (singular covariance, degenerate design).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .algorithm import DEFAULT_TAU, ORACLE_TAU, DegenerateWhiteningError
from .metrics import evaluate
from .model import FIXTURES, Dag, GraphError, LigamModel, format_edges, load_fixture, read_edges
from .scores import DegenerateDesignError, ScoreCache
from .search import SearchConfig, discover
from .synth import NOISES, GenConfig, simulate
from .whitening import SingularCovarianceError, build_whitening, estimate_covariance, oracle_whitening

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
WORKERS_ENV = "QWO_MAX_WORKERS"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


# ---------------------------------------------------------------- formatting

def round_sig(x, digits: int = 10):
    """Round floats (recursively inside lists/dicts) to ``digits`` significant digits."""
    if isinstance(x, dict):
        return {k: round_sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round_sig(v, digits) for v in x]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x) or x == 0.0:
            return x
        return float(f"{x:.{digits}g}")
    if isinstance(x, np.integer):
        return int(x)
    return x


def dump_json(obj) -> str:
    return json.dumps(round_sig(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------- I/O

def read_csv_matrix(path, header: bool | None = None) -> tuple[np.ndarray, list[str] | None]:
    """Numeric CSV to an (N, n) array.

    ``header=True`` always treats the first row as a header, ``False`` never
    does, and ``None`` (default) treats it as one when it is not numeric.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: no data")

    if header is None:
        try:
            [float(c) for c in rows[0]]
            header = False
        except ValueError:
            header = True
    names = None
    if header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: header but no data rows")

    width = len(names) if names is not None else len(rows[0])
    data = np.empty((len(rows), width))
    first = 2 if names is not None else 1
    for i, row in enumerate(rows):
        line = i + first
        if len(row) != width:
            raise DataError(f"{path}: row {line} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                data[i, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {line}, column {j + 1}: not a number: {cell!r}") from None
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))[0]
        raise DataError(f"{path}: row {bad[0] + first}, column {bad[1] + 1}: non-finite value")
    return data, names


def write_csv_matrix(path, X: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(X.shape[1])])
        for row in X:
            w.writerow([repr(float(v)) for v in row])


def model_to_dict(model: LigamModel) -> dict:
    return {"n": model.n, "B": model.B.tolist(), "sigma": model.sigma.tolist()}


def read_model(path) -> LigamModel:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    try:
        spec = json.loads(path.read_text())
        return LigamModel(np.asarray(spec["B"], dtype=float), np.asarray(spec["sigma"], dtype=float))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: not a valid model file ({exc})") from None


def _read_graph(path) -> Dag:
    if not Path(path).is_file():
        raise DataError(f"{path}: file not found")
    return read_edges(path)


# ----------------------------------------------------------------- discover

def _search_config(args, tau) -> SearchConfig:
    return SearchConfig(
        strategy=args.search, builder=args.score, dfs_depth=args.depth, k=args.k,
        rng_seed=args.seed, tau=tau, alpha=args.alpha, first_any_edge=args.first_any_edge,
        max_iters=args.max_iters,
    )


def run_discovery(ctx, config: SearchConfig, cache=None):
    t = time.perf_counter()
    result = discover(ctx, config, cache=cache)
    return result, time.perf_counter() - t


def cmd_discover(args) -> int:
    if (args.data is None) == (args.oracle_model is None):
        raise UsageError("give exactly one of a data CSV or --oracle-model")
    if args.oracle_model is not None and args.score == "bic":
        raise UsageError("--score bic needs sample data; it cannot run on an oracle model")
    if args.oracle_model is not None and args.alpha is not None:
        raise UsageError("--alpha needs sample data; use --threshold with --oracle-model")

    timing = {}
    cache = None
    t = time.perf_counter()
    if args.oracle_model is not None:
        model = read_model(args.oracle_model)
        cov = model.covariance()
        n_samples = None
        source = {"oracle_model": str(args.oracle_model)}
    else:
        X, _ = read_csv_matrix(args.data, True if args.header else None)
        cov = estimate_covariance(X)
        n_samples = X.shape[0]
        source = {"data": str(args.data), "samples": n_samples}
        if args.score == "bic":
            cache = ScoreCache(cov, n_samples)
    timing["covariance"] = time.perf_counter() - t

    t = time.perf_counter()
    ctx = build_whitening(cov, ridge=args.ridge, n_samples=n_samples)
    timing["whitening"] = time.perf_counter() - t

    tau = args.threshold
    if tau is None:
        tau = ORACLE_TAU if args.oracle_model is not None else DEFAULT_TAU
    config = _search_config(args, tau)
    result, timing["search"] = run_discovery(ctx, config, cache)

    metrics = None
    if args.truth is not None:
        truth = _read_graph(args.truth)
        metrics = evaluate(result.graph, truth)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "graph.edges").write_text(format_edges(result.graph))
    report = {
        "config": {
            **source, "search": args.search, "score": args.score, "threshold": tau,
            "alpha": args.alpha, "first_any_edge": args.first_any_edge, "depth": args.depth,
            "k": args.k, "ridge": args.ridge, "max_iters": args.max_iters,
        },
        "seed": args.seed,
        "result": {
            "edge_count": result.edge_count,
            "edges": [[u + 1, v + 1] for u, v in sorted(result.graph.edges)],
            "pi": [v + 1 for v in result.pi.order],
            "builder_calls": result.builder_calls,
            "iterations": result.iterations,
            "trace": result.trace,
        },
        "metrics": metrics,
        "timing": timing,
    }
    (out / "report.json").write_text(dump_json(report))
    msg = f"{result.edge_count} edges, {result.builder_calls} builder calls, {timing['search']:.3g}s search"
    if metrics is not None:
        msg += f", skf1 {metrics['skf1']:.4f}, pshd {metrics['pshd']:.4f}"
    print(msg)
    return EXIT_OK


# ----------------------------------------------------------------- simulate

def cmd_simulate(args) -> int:
    fixture = load_fixture(args.graph) if args.graph else None
    n = fixture.n if fixture is not None else args.n
    if n is None:
        raise UsageError("--n is required unless --graph names a fixture")
    try:
        config = GenConfig(n=n, avg_degree=args.avg_degree if fixture is None else 0.0,
                           N=args.samples, noise=args.noise, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    g, model, X = simulate(config, g=fixture)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv_matrix(out / "data.csv", X)
    (out / "truth.edges").write_text(format_edges(g))
    meta = {**model_to_dict(model), "seed": args.seed, "config": config.to_dict(),
            "graph": args.graph or "er"}
    # the model file keeps full precision so it can serve as an oracle input
    (out / "model.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {X.shape[0]} samples of {n} variables ({g.edge_count} true edges) to {out}")
    return EXIT_OK


# -------------------------------------------------------------------- bench

RUN_FIELDS = [
    "graph", "n", "avg_degree", "noise", "samples", "oracle", "builder", "search", "rep", "seed",
    "true_edges", "edge_count", "skf1", "pshd", "builder_calls", "iterations",
    "time_covariance", "time_whitening", "time_search",
]
TIME_FIELDS = ("time_covariance", "time_whitening", "time_search")


def _bench_replicate(task: dict) -> list[dict]:
    # one (cell, replicate): the same data feed every builder/search combination
    fixture = load_fixture(task["graph"]) if task["graph"] != "er" else None
    config = GenConfig(n=task["n"], avg_degree=task["avg_degree"], N=task["samples"],
                       noise=task["noise"], seed=task["seed"])
    g, model, X = simulate(config, g=fixture)
    rows = []
    t = time.perf_counter()
    cov = model.covariance() if task["oracle"] else estimate_covariance(X)
    t_cov = time.perf_counter() - t
    t = time.perf_counter()
    if task["oracle"]:
        ctx = oracle_whitening(model)
    else:
        ctx = build_whitening(cov, n_samples=X.shape[0])
    t_white = time.perf_counter() - t
    for builder in task["builders"]:
        for search in task["searches"]:
            cfg = SearchConfig(
                strategy=search, builder=builder, dfs_depth=task["depth"], k=task["k"],
                rng_seed=task["seed"], tau=task["tau"], alpha=task["alpha"],
                first_any_edge=task["first_any_edge"],
            )
            cache = ScoreCache(cov, X.shape[0]) if builder == "bic" else None
            result, t_search = run_discovery(ctx, cfg, cache)
            m = evaluate(result.graph, g)
            rows.append({
                "graph": task["graph"], "n": g.n, "avg_degree": task["avg_degree"],
                "noise": task["noise"], "samples": task["samples"], "oracle": int(task["oracle"]),
                "builder": builder, "search": search, "rep": task["rep"], "seed": task["seed"],
                "true_edges": g.edge_count, "edge_count": result.edge_count,
                "skf1": m["skf1"], "pshd": m["pshd"], "builder_calls": result.builder_calls,
                "iterations": result.iterations, "time_covariance": t_cov,
                "time_whitening": t_white, "time_search": t_search,
            })
    return rows


def max_workers(requested: int | None = None) -> int:
    """Worker count: the request (default: CPU count), capped by ``QWO_MAX_WORKERS``."""
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def run_bench(tasks: list[dict], workers: int = 1) -> list[dict]:
    if workers <= 1 or len(tasks) <= 1:
        chunks = [_bench_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_bench_replicate, tasks))
    rows = [r for chunk in chunks for r in chunk]
    key = lambda r: (r["graph"], r["n"], r["avg_degree"], r["noise"], r["builder"], r["search"], r["rep"])
    return sorted(rows, key=key)


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean/std of SKF1 and PSHD plus median search time per cell."""
    cells: dict[tuple, list[dict]] = {}
    for r in rows:
        k = (r["graph"], r["n"], r["avg_degree"], r["noise"], r["samples"], r["oracle"],
             r["builder"], r["search"])
        cells.setdefault(k, []).append(r)
    out = []
    for k, rs in cells.items():
        skf1 = np.array([r["skf1"] for r in rs])
        ps = np.array([r["pshd"] for r in rs])
        ts = np.array([r["time_search"] for r in rs])
        out.append({
            "graph": k[0], "n": k[1], "avg_degree": k[2], "noise": k[3], "samples": k[4],
            "oracle": k[5], "builder": k[6], "search": k[7], "reps": len(rs),
            "skf1_mean": skf1.mean(), "skf1_std": skf1.std(), "pshd_mean": ps.mean(),
            "pshd_std": ps.std(), "time_search_median": float(np.median(ts)),
        })
    return out


def _write_rows(path, rows, fields) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({f: _csv_value(r[f]) for f in fields})


def _csv_value(v):
    if isinstance(v, float):
        return repr(round_sig(v))
    return v


def _plot_tables(summary: list[dict], out: Path) -> list[Path]:
    # wide CSVs: one row per n, one column per series, ready for any plotting tool
    series = sorted({(s["graph"], s["avg_degree"], s["noise"], s["builder"], s["search"]) for s in summary})
    names = [f"{g}-d{d:g}-{nz}-{b}-{sr}" for g, d, nz, b, sr in series]
    ns = sorted({s["n"] for s in summary})
    written = []
    for metric in ("skf1_mean", "pshd_mean", "time_search_median"):
        table = {(s["graph"], s["avg_degree"], s["noise"], s["builder"], s["search"], s["n"]): s[metric]
                 for s in summary}
        path = out / f"plot_{metric}.csv"
        rows = []
        for n in ns:
            row = {"n": n}
            for name, key in zip(names, series):
                v = table.get(key + (n,))
                row[name] = "" if v is None else v
            rows.append(row)
        _write_rows(path, rows, ["n"] + names)
        written.append(path)
    return written


def _fixture_degree(name: str) -> float:
    g = load_fixture(name)
    return round(2 * g.edge_count / g.n, 4)


def cmd_bench(args) -> int:
    if args.oracle and "bic" in args.builder:
        raise UsageError("the BIC builder needs sample data; drop it from --builder with --oracle")
    if args.oracle and args.alpha is not None:
        raise UsageError("--alpha needs sample data")
    graphs = args.graph or ["er"]
    tau = args.threshold if args.threshold is not None else (ORACLE_TAU if args.oracle else DEFAULT_TAU)
    tasks = []
    for graph in graphs:
        if graph != "er" and graph not in FIXTURES:
            raise UsageError(f"unknown graph {graph!r}; use 'er' or one of {FIXTURES}")
        for n in (args.n if graph == "er" else [load_fixture(graph).n]):
            for d in (args.avg_degree if graph == "er" else [_fixture_degree(graph)]):
                if graph == "er" and not 0 <= d <= max(n - 1, 0):
                    raise UsageError(f"avg degree {d} is not in [0, {n - 1}] for n = {n}")
                for noise in args.noise:
                    samples = args.samples or (500 if n <= 11 else 10_000)
                    for rep in range(args.reps):
                        tasks.append({
                            "graph": graph, "n": n, "avg_degree": d, "noise": noise,
                            "samples": samples, "oracle": args.oracle, "rep": rep,
                            "seed": args.seed + rep, "builders": args.builder,
                            "searches": args.search, "depth": args.depth, "k": args.k,
                            "tau": tau, "alpha": args.alpha,
                            "first_any_edge": args.first_any_edge,
                        })
    rows = run_bench(tasks, max_workers(args.workers))
    summary = aggregate(rows)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "runs.csv", rows, RUN_FIELDS)
    _write_rows(out / "summary.csv", summary, list(summary[0]) if summary else [])
    if args.plot:
        _plot_tables(summary, out)

    print(f"{'graph':>7} {'n':>4} {'deg':>5} {'noise':>11} {'builder':>7} {'search':>6} "
          f"{'skf1':>7} {'pshd':>7} {'time(s)':>9}")
    for s in summary:
        print(f"{s['graph']:>7} {s['n']:>4} {s['avg_degree']:>5.3g} {s['noise']:>11} {s['builder']:>7} "
              f"{s['search']:>6} {s['skf1_mean']:7.3f} {s['pshd_mean']:7.3f} {s['time_search_median']:9.4f}")
    return EXIT_OK


# ----------------------------------------------------------------- evaluate

def cmd_evaluate(args) -> int:
    pred, truth = _read_graph(args.pred), _read_graph(args.truth)
    if pred.n != truth.n:
        raise DataError(f"graphs have different sizes: {pred.n} vs {truth.n} nodes")
    m = evaluate(pred, truth)
    print(json.dumps({k: round(v, 4) for k, v in m.items()}))
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {s}")
    return v


def _alpha(s):
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {s}")
    return v


def _add_search_flags(p, multi: bool = False):
    if multi:
        p.add_argument("--search", nargs="+", choices=("grasp", "hc"), default=["grasp"])
        p.add_argument("--builder", nargs="+", choices=("qwo", "bic"), default=["qwo"])
    else:
        p.add_argument("--search", choices=("grasp", "hc"), default="grasp")
        p.add_argument("--score", choices=("qwo", "bic"), default="qwo")
    p.add_argument("--threshold", type=_nonneg_float, default=None,
                   help=f"edge threshold on |QW| (default {DEFAULT_TAU}, or {ORACLE_TAU} with an oracle)")
    p.add_argument("--alpha", type=_alpha, default=None,
                   help="use a Fisher-z partial-correlation test at this level instead of --threshold")
    p.add_argument("--covered-only", dest="first_any_edge", action="store_false",
                   help="restrict every GRaSP tuck to covered edges (by default the first may use any edge)")
    p.add_argument("--depth", type=_positive_int, default=3, help="GRaSP DFS depth")
    p.add_argument("--k", type=_positive_int, default=5, help="hill-climbing swap radius")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qwo", description="Permutation-based causal discovery with QWO.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="learn a DAG from a data CSV or an oracle model")
    p.add_argument("data", nargs="?", help="CSV with one column per variable (header optional)")
    p.add_argument("--header", action="store_true",
                   help="skip the first line (a non-numeric first line is skipped anyway)")
    p.add_argument("--oracle-model", help="model JSON (B, sigma); uses its exact covariance")
    _add_search_flags(p)
    p.add_argument("--ridge", type=_nonneg_float, default=0.0)
    p.add_argument("--max-iters", type=_positive_int, default=100_000)
    p.add_argument("--truth", help="true edge list; adds SKF1/PSHD to the report")
    p.add_argument("--out", default="qwo-out")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("simulate", help="sample an ER2-style model and data")
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--avg-degree", type=_nonneg_float, default=2.0)
    p.add_argument("--graph", choices=FIXTURES, help="use a bundled structure instead of an ER graph")
    p.add_argument("--samples", type=_positive_int, default=500)
    p.add_argument("--noise", choices=NOISES, default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="qwo-sim")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="sweep synthetic experiments and aggregate metrics")
    p.add_argument("--n", type=_positive_int, nargs="+", default=[5])
    p.add_argument("--avg-degree", type=_nonneg_float, nargs="+", default=[2.0])
    p.add_argument("--graph", nargs="+", help=f"'er' and/or fixtures {FIXTURES}")
    p.add_argument("--noise", nargs="+", choices=NOISES, default=["gaussian"])
    p.add_argument("--samples", type=_positive_int, default=None,
                   help="samples per replicate (default 500 for n <= 11, else 10000)")
    p.add_argument("--oracle", action="store_true", help="use the exact covariance")
    p.add_argument("--reps", type=_positive_int, default=30)
    _add_search_flags(p, multi=True)
    p.add_argument("--workers", type=_positive_int, default=None,
                   help=f"parallel processes (capped by ${WORKERS_ENV})")
    p.add_argument("--plot", action="store_true", help="also write plot_*.csv line-chart tables")
    p.add_argument("--out", default="qwo-bench")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("evaluate", help="SKF1 and PSHD of a predicted edge list")
    p.add_argument("pred")
    p.add_argument("truth")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qwo {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularCovarianceError, DegenerateWhiteningError, DegenerateDesignError) as exc:
        msg = str(exc)
        if isinstance(exc, SingularCovarianceError):
            msg += " (try --ridge)"
        print(f"qwo {args.command}: numerical failure: {msg}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, GraphError, OSError) as exc:
        print(f"qwo {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"qwo {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
