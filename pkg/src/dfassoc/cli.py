"""Command line front end.

    dfassoc estimate --input data.csv --x-cols a,b --y-cols c
    dfassoc test --input data.csv --x-cols a --y-cols c --seed 1
    dfassoc null-table --n 200 --dx 2 --dy 1 --seed 1
    dfassoc simulate --model bivariate-gaussian:rho=0.3 --n 100 --reps 500 --seed 1

Results are JSON (CSV for ``simulate``) on stdout or ``--output``. Errors
are reported as JSON on stderr with exit code 2 (configuration), 3 (data)
or 4 (numeric degeneracy).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import norm

from . import __version__
from .errors import (ConfigError, DataError, DfassocError, ParameterError, ParseError,
                     SchemaError, SizeError)
from .estimator import RankPipeline, eta_hat_plain
from .graphs import GraphSpec, graph_stats
from .grids import parse_grid
from .inference import NullTableKey, TableCache, test_independence, variance_components
from .kernels import Kernel
from .oracles import parse_model

COMMANDS = ("rank", "graph", "estimate", "test", "null-table", "simulate")


@dataclass
class RunConfig:
    command: str
    input: Optional[str] = None
    x_cols: List[str] = field(default_factory=list)
    y_cols: List[str] = field(default_factory=list)
    grid: str = "auto"
    graph: str = "knn"
    kernel: str = "energy"
    alpha: float = 0.05
    replicates: int = 10**4
    seed: Optional[int] = None
    cache_dir: Optional[str] = None
    output: Optional[str] = None
    plain: bool = False
    n: Optional[int] = None
    dx: int = 1
    dy: int = 1
    model: Optional[str] = None
    reps: int = 100
    jobs: int = 1

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command in ("rank", "graph", "estimate", "test"):
            if not self.input:
                raise ConfigError(f"{self.command} needs --input")
            if not self.x_cols:
                raise SchemaError("--x-cols must name at least one column")
            if self.command in ("estimate", "test") and not self.y_cols:
                raise SchemaError("--y-cols must name at least one column")
            overlap = set(self.x_cols) & set(self.y_cols)
            if overlap:
                raise SchemaError(f"x and y columns overlap: {sorted(overlap)}")
        if self.command in ("test", "null-table", "simulate") and self.seed is None:
            raise ConfigError(f"{self.command} is randomized and needs an explicit --seed")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError("--alpha must lie in (0, 1)")
        if self.replicates < 1:
            raise ParameterError("--replicates must be positive")
        if self.jobs < 1:
            raise ParameterError("--jobs must be positive")

    def settings(self) -> dict:
        keep = ("input", "x_cols", "y_cols", "grid", "graph", "kernel", "alpha",
                "replicates", "seed")
        return {k: v for k, v in asdict(self).items() if k in keep}


# ---------------------------------------------------------------------------
# input


def ingest_csv(path, x_cols: Sequence[str], y_cols: Sequence[str] = ()):
    """Read the selected numeric columns of a headed UTF-8 CSV file.

    Returns ``(x, y)`` with one row per data line, in file order; ``y`` is
    ``None`` when no y columns are requested.
    """
    x_cols, y_cols = list(x_cols), list(y_cols)
    if not x_cols:
        raise SchemaError("no x columns selected")
    if set(x_cols) & set(y_cols):
        raise SchemaError(f"x and y columns overlap: {sorted(set(x_cols) & set(y_cols))}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in x_cols + y_cols if c not in header]
    if missing:
        raise SchemaError(f"columns not found in header: {missing}")
    idx = {c: header.index(c) for c in x_cols + y_cols}
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if len(body) < 3:
        raise SizeError(f"need at least 3 data rows, found {len(body)}")
    out = np.empty((len(body), len(x_cols) + len(y_cols)))
    for r, row in enumerate(body):
        for c, name in enumerate(x_cols + y_cols):
            j = idx[name]
            cell = row[j].strip() if j < len(row) else ""
            try:
                value = float(cell)
            except ValueError:
                value = math.nan
            if not math.isfinite(value):
                raise ParseError(f"row {r + 1} (line {r + 2}), column {name!r}: "
                                 f"not a finite number: {cell!r}")
            out[r, c] = value
    x = out[:, :len(x_cols)]
    y = out[:, len(x_cols):] if y_cols else None
    return x, y


# ---------------------------------------------------------------------------
# commands


def _pipeline(cfg: RunConfig, n: int, dx: int, dy: int) -> RankPipeline:
    return RankPipeline(parse_grid(cfg.grid, n, dx), parse_grid(cfg.grid, n, dy),
                        GraphSpec.parse(cfg.graph), Kernel.parse(cfg.kernel))


def _cmd_rank(cfg):
    x, y = ingest_csv(cfg.input, cfg.x_cols, cfg.y_cols)
    from .ranks import compute_ranks

    out = {}
    for side, data in (("x", x), ("y", y)):
        if data is None:
            continue
        grid = parse_grid(cfg.grid, len(data), data.shape[1])
        ra = compute_ranks(data, grid)
        out[side] = {**ra.to_dict(), "ranks": ra.ranks.tolist()}
    return out


def _cmd_graph(cfg):
    x, _ = ingest_csv(cfg.input, cfg.x_cols)
    from .graphs import build_graph
    from .ranks import compute_ranks

    grid = parse_grid(cfg.grid, len(x), x.shape[1])
    ra = compute_ranks(x, grid)
    g = build_graph(grid.points, GraphSpec.parse(cfg.graph))
    # vertices renamed from grid points to input rows
    g = g.relabel(ra.inverse())
    return {"graph": g.to_dict(), "stats": graph_stats(g).to_dict(),
            "grid": grid.spec.to_dict()}


def _cmd_estimate(cfg):
    x, y = ingest_csv(cfg.input, cfg.x_cols, cfg.y_cols)
    if cfg.plain:
        return eta_hat_plain(x, y, GraphSpec.parse(cfg.graph), Kernel.parse(cfg.kernel)).to_dict()
    pipe = _pipeline(cfg, len(x), x.shape[1], y.shape[1])
    return pipe.estimate(x, y).to_dict()


def _cmd_test(cfg, run):
    x, y = ingest_csv(cfg.input, cfg.x_cols, cfg.y_cols)
    pipe = _pipeline(cfg, len(x), x.shape[1], y.shape[1])
    res = test_independence(x, y, alpha=cfg.alpha, replicates=cfg.replicates, seed=cfg.seed,
                            cache=TableCache(cfg.cache_dir), n_jobs=cfg.jobs, pipeline=pipe)
    run["cache_hit"] = res.cache_hit
    return res.to_dict()


def _cmd_null_table(cfg, run):
    if cfg.input:
        x, y = ingest_csv(cfg.input, cfg.x_cols, cfg.y_cols)
        n, dx, dy = len(x), x.shape[1], y.shape[1]
    elif cfg.n:
        n, dx, dy = cfg.n, cfg.dx, cfg.dy
    else:
        raise ConfigError("null-table needs --n (with --dx/--dy) or --input")
    pipe = _pipeline(cfg, n, dx, dy)
    key = NullTableKey.of(pipe)
    cache = TableCache(cfg.cache_dir)
    table, hit = cache.get_or_build(key, cfg.replicates, cfg.seed, pipe, cfg.jobs)
    run["cache_hit"] = hit
    return {
        "key": key.to_dict(),
        "digest": key.digest(),
        "seed": table.seed,
        "replicates": table.replicates,
        "path": str(cache.path(key, cfg.seed, cfg.replicates)),
        "quantiles": {str(q): float(table.quantile(q)) for q in (0.5, 0.9, 0.95, 0.99)},
    }


SIM_FIELDS = ("replicate", "model", "n", "eta_hat", "N_n_rank", "p_exact", "z_stat",
              "p_clt", "reject")


def _cmd_simulate(cfg, run):
    if not cfg.model or not cfg.n:
        raise ConfigError("simulate needs --model and --n")
    if cfg.reps < 1:
        raise ParameterError("--reps must be positive")
    model = parse_model(cfg.model)
    pipe = _pipeline(cfg, cfg.n, model.d1, model.d2)
    key = NullTableKey.of(pipe)
    table, hit = TableCache(cfg.cache_dir).get_or_build(key, cfg.replicates, cfg.seed, pipe,
                                                        cfg.jobs)
    run["cache_hit"] = hit
    var = variance_components(pipe.grid_y, pipe.graph, pipe.kernel)
    sd = math.sqrt(var.var_exact)

    def one(r):
        data_seed = int(np.random.SeedSequence([cfg.seed, 1, r]).generate_state(1)[0])
        x, y = model.sample(cfg.n, data_seed)
        est = pipe.estimate(x, y)
        p = table.p_value(est.eta_hat)
        z = est.N_n_rank / sd
        return {"replicate": r, "model": cfg.model, "n": cfg.n, "eta_hat": est.eta_hat,
                "N_n_rank": est.N_n_rank, "p_exact": p, "z_stat": z,
                "p_clt": float(norm.sf(z)), "reject": int(p <= cfg.alpha)}

    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            rows = list(pool.map(one, range(cfg.reps)))
    else:
        rows = [one(r) for r in range(cfg.reps)]
    rows.sort(key=lambda row: row["replicate"])
    rate = sum(r["reject"] for r in rows) / len(rows)
    return rows, {"model": cfg.model, "n": cfg.n, "reps": cfg.reps, "alpha": cfg.alpha,
                  "rejection_rate": rate, "null_table": key.digest()}


# ---------------------------------------------------------------------------
# driver


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def _emit(text: str, path: Optional[str]):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    """Execute one command; returns the process exit code."""
    try:
        cfg.validate()
        run_info = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                    "version": __version__}
        if cfg.command == "simulate":
            rows, summary = _cmd_simulate(cfg, run_info)
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=SIM_FIELDS, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
            _emit(buf.getvalue(), cfg.output)
            if cfg.output:
                sys.stdout.write(json.dumps(_clean({**summary, "run": run_info}), indent=2) + "\n")
            return 0
        handlers = {"rank": _cmd_rank, "graph": _cmd_graph, "estimate": _cmd_estimate}
        if cfg.command in handlers:
            result = handlers[cfg.command](cfg)
        else:
            result = {"test": _cmd_test, "null-table": _cmd_null_table}[cfg.command](cfg, run_info)
        doc = {"command": cfg.command, "config": cfg.settings(), "result": result,
               "run": run_info}
        _emit(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n", cfg.output)
        return 0
    except DfassocError as exc:
        return _fail(exc, exc.exit_code)


def _fail(exc, code) -> int:
    err = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    sys.stderr.write(json.dumps(err) + "\n")
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _cols(text: str) -> List[str]:
    return [c.strip() for c in text.split(",") if c.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dfassoc", description="Distribution-free rank measures of association.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--input")
    p.add_argument("--x-cols", type=_cols, default=[])
    p.add_argument("--y-cols", type=_cols, default=[])
    p.add_argument("--grid", default="auto", help="auto | lattice | halton | iid:SEED")
    p.add_argument("--graph", default="knn", help="knn | knn:K | mst")
    p.add_argument("--kernel", default="energy", help="energy | gaussian[:SIGMA] | laplace[:SIGMA]")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--replicates", type=int, default=10**4, help="null table size")
    p.add_argument("--seed", type=int)
    p.add_argument("--cache-dir", help="null table cache (default $DFASSOC_CACHE_DIR)")
    p.add_argument("--output")
    p.add_argument("--plain", action="store_true", help="estimate on raw data instead of ranks")
    p.add_argument("--n", type=int, help="sample size (null-table, simulate)")
    p.add_argument("--dx", type=int, default=1)
    p.add_argument("--dy", type=int, default=1)
    p.add_argument("--model", help="e.g. bivariate-gaussian:rho=0.5 (simulate)")
    p.add_argument("--reps", type=int, default=100, help="simulated data sets (simulate)")
    p.add_argument("--jobs", type=int, default=1)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except ConfigError as exc:
        return _fail(exc, exc.exit_code)
    return run(RunConfig(**vars(ns)))


if __name__ == "__main__":
    sys.exit(main())
