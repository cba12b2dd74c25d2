"""Command-line interface: ``fubif <command> [options]``.

Commands: fit, score, explain, benchmark, scoremap, gen-data. Forest
settings come from an optional JSON file (``--config``) overridden by
flags. Exit status: 0 success, 2 config error, 3 data error, 4 dimension
mismatch.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import config as cfg
from .data import Dataset, _atomic_write, generate, load_csv, save_csv, scenario_split, translate
from .errors import ConfigError, DataError, DimensionMismatchError, FubifError
from .forest import fit
from .importance import global_importance, local_importance_matrix
from .metrics import auc_fs, average_precision, precision_at_contamination, roc_auc
from .persist import load_forest, save_forest

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIM = 0, 2, 3, 4

REPORT_HEADER = ["dataset", "model", "scenario", "threshold_kind", "avg_prec", "roc_auc", "prec_at_p",
                 "auc_fs", "fit_ms", "score_ms", "runs"]
# keys that may hold a list in a benchmark config; the grid is their product
GRID_KEYS = ("family", "threshold_kind", "scenario")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _depth(text):
    return text if text == "auto" else int(text)


def _add_config_flags(p, grid=False):
    g = p.add_argument_group("forest settings (override --config)")
    g.add_argument("--config", help="JSON file with run settings")
    if grid:
        g.add_argument("--family", type=lambda s: s.split(","), help="comma-separated families")
        g.add_argument("--threshold-kind", type=lambda s: s.split(","), help="comma-separated: uniform,normal")
        g.add_argument("--scenario", type=lambda s: s.split(","), help="comma-separated: I,II")
    else:
        g.add_argument("--family", help="IF, EIF, HIF, Ellipse, Hyper, Para, Quad(λ), NN, Sine")
        g.add_argument("--threshold-kind", help="uniform or normal")
        g.add_argument("--scenario", help="I (all points) or II (inliers only)")
    g.add_argument("--quad-lambda", type=float)
    g.add_argument("--nn-hidden-widths", type=_ints)
    g.add_argument("--eta", type=float)
    g.add_argument("--n-trees", type=int)
    g.add_argument("--subsample", type=int)
    g.add_argument("--max-depth", type=_depth)
    g.add_argument("--seed", type=int)
    g.add_argument("--contamination", type=float)
    g.add_argument("--runs", type=int)


def _raw_settings(args) -> dict:
    values = cfg.load_config(args.config) if args.config else {}
    for key in cfg.KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def _settings(args) -> cfg.RunConfig:
    return cfg.from_mapping(_raw_settings(args))


def _grid(args) -> list[cfg.RunConfig]:
    values = _raw_settings(args)
    axes = {}
    for key in GRID_KEYS:
        if isinstance(values.get(key), (list, tuple)):
            axes[key] = list(values.pop(key))
    base = cfg.from_mapping(values)
    combos = itertools.product(*axes.values()) if axes else [()]
    return [cfg.from_mapping(dict(zip(axes, combo)), base) for combo in combos]


def _write_csv(path, header, rows) -> None:
    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    _atomic_write(path, write)


def _fmt(v) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


# -- commands -----------------------------------------------------------------

def _warm_up(config, d: int) -> None:
    """Load compiled kernels so the first timed fit measures only fitting."""
    pts = np.random.default_rng(0).standard_normal((8, d))
    fit(pts, config.replace(n_trees=1)).score_samples(pts)


def cmd_fit(args) -> int:
    run = _settings(args)
    ds = load_csv(args.data)
    train, _ = scenario_split(ds, run.scenario_or("I"))
    config = run.forest_config()
    config.family.check_dim(ds.d)
    _warm_up(config, ds.d)
    t0 = time.perf_counter()
    forest = fit(train.points, config)
    fit_ms = (time.perf_counter() - t0) * 1000.0
    save_forest(forest, args.model_out)
    print(f"fit_ms={fit_ms:.3f}")
    return EXIT_OK


def _score_metrics(scores, labels, p):
    return {"avg_prec": average_precision(scores, labels), "roc_auc": roc_auc(scores, labels),
            "prec_at_p": precision_at_contamination(scores, labels, p)}


def cmd_score(args) -> int:
    forest = load_forest(args.model)
    ds = load_csv(args.data)
    if args.metrics and ds.labels is None:
        raise DataError("labels required for --metrics")
    if args.contamination is not None and not 0.0 < args.contamination < 1.0:
        raise ConfigError(f"contamination must lie in (0, 1), got {args.contamination}")
    scores = forest.score_samples(ds.points)
    _write_csv(args.out, ["row_index", "score"], ([i, repr(float(s))] for i, s in enumerate(scores)))
    if args.metrics:
        p = args.contamination if args.contamination is not None else ds.contamination
        for key, value in _score_metrics(scores, ds.labels, p).items():
            print(f"{key}={value!r}")
    return EXIT_OK


def cmd_explain(args) -> int:
    forest = load_forest(args.model)
    ds = load_csv(args.data)
    if args.mode == "local":
        local = local_importance_matrix(forest, ds.points)
        header = ["row_index"] + list(ds.feature_names)
        _write_csv(args.out, header, ([i] + [repr(float(v)) for v in row] for i, row in enumerate(local)))
        return EXIT_OK
    use_labels = ds.labels is not None and not args.ignore_labels
    if not use_labels and args.contamination is None:
        raise DataError("global importance needs labels or --contamination")
    if use_labels:
        gfi = global_importance(forest, ds.points, labels=ds.labels)
        mode = "labels"
    else:
        gfi = global_importance(forest, ds.points, contamination=args.contamination)
        mode = f"contamination={args.contamination!r}"
    _write_csv(args.out, ["feature_index", "score"],
               ([j + 1, repr(float(v))] for j, v in enumerate(gfi)))
    sidecar = Path(str(args.out) + ".meta")
    _atomic_write(sidecar, lambda fh: fh.write(f"partition={mode} seed={forest.config.seed}\n"))
    return EXIT_OK


def _datasets(args) -> list[Dataset]:
    out = []
    for kind in args.synthetic or []:
        out.append(generate(kind, args.data_seed))
    if args.datasets:
        root = Path(args.datasets)
        if not root.is_dir():
            raise DataError(f"datasets directory {root} does not exist")
        out.extend(sorted(root.glob("*.csv")))
    return out


def benchmark_cell(ds: Dataset, run: cfg.RunConfig, with_auc_fs: bool = True) -> dict:
    """Run-averaged metrics for one (dataset, settings) cell of the report."""
    if ds.labels is None:
        raise DataError(f"{ds.name}: benchmark needs a label column")
    scenario = run.scenario_or("II")
    train, test = scenario_split(ds, scenario)
    base = run.forest_config()
    p = run.contamination if run.contamination is not None else test.contamination
    base.family.check_dim(ds.d)
    _warm_up(base, ds.d)
    rows, fit_ms, score_ms, gfis = [], [], [], []
    for r in range(run.runs):
        t0 = time.perf_counter()
        forest = fit(train.points, base.replace(seed=base.seed + r))
        t1 = time.perf_counter()
        scores = forest.score_samples(test.points)
        t2 = time.perf_counter()
        fit_ms.append((t1 - t0) * 1000.0)
        score_ms.append((t2 - t1) * 1000.0)
        rows.append(_score_metrics(scores, test.labels, p))
        if with_auc_fs and ds.d >= 2:
            gfis.append(global_importance(forest, test.points, labels=test.labels))
    cell = {key: float(np.mean([m[key] for m in rows])) for key in rows[0]}
    cell["auc_fs"] = (auc_fs(ds, base, np.mean(gfis, axis=0), scenario, run.runs)
                      if gfis else float("nan"))
    cell.update(fit_ms=statistics.median(fit_ms), score_ms=statistics.median(score_ms))
    return cell


def _row_prefix(name, run: cfg.RunConfig) -> list:
    return [name, run.descriptor().name, run.scenario_or("II"), run.forest_config().threshold_kind.value]


def cmd_benchmark(args) -> int:
    grid = _grid(args)
    sources = _datasets(args)
    rows = []
    failures = 0
    for src in sources:
        try:
            ds = src if isinstance(src, Dataset) else load_csv(src, require_label=True)
        except FubifError as exc:
            print(f"error: {exc}", file=sys.stderr)
            for run in grid:
                rows.append(_row_prefix(Path(src).stem, run) + ["nan"] * 6 + [run.runs])
                failures += 1
            continue
        for run in grid:
            model = run.descriptor().name
            try:
                cell = benchmark_cell(ds, run, with_auc_fs=not args.skip_auc_fs)
            except FubifError as exc:
                print(f"error: {ds.name} / {model}: {exc}", file=sys.stderr)
                rows.append(_row_prefix(ds.name, run) + ["nan"] * 6 + [run.runs])
                failures += 1
                continue
            rows.append(_row_prefix(ds.name, run) + [_fmt(cell[k]) for k in REPORT_HEADER[4:10]] + [run.runs])
            print(f"{ds.name} {model}: avg_prec={cell['avg_prec']:.4f}", file=sys.stderr)
    _write_csv(args.out, REPORT_HEADER, rows)
    return EXIT_DATA if failures else EXIT_OK


def scoremap_grid(forest, m: int, bounds=None, points=None):
    """Score an m-by-m grid; returns an (m*m, 3) array of x, y, score."""
    if forest.n_features != 2:
        raise DimensionMismatchError("scoremap requires 2-d models")
    if m < 1:
        raise ConfigError(f"grid size must be >= 1, got {m}")
    if bounds is None:
        if points is None:
            points = np.vstack([t.train for t in forest.trees])
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        pad = 0.1 * (hi - lo)
        lo, hi = lo - pad, hi + pad
    else:
        lo = np.array([bounds[0], bounds[2]], dtype=np.float64)
        hi = np.array([bounds[1], bounds[3]], dtype=np.float64)
    xs = np.linspace(lo[0], hi[0], m)
    ys = np.linspace(lo[1], hi[1], m)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return np.column_stack([pts, forest.score_samples(pts)])


def cmd_scoremap(args) -> int:
    forest = load_forest(args.model)
    bounds = None
    points = None
    if args.bounds is not None:
        if len(args.bounds) != 4 or args.bounds[0] >= args.bounds[1] or args.bounds[2] >= args.bounds[3]:
            raise ConfigError("--bounds takes xmin,xmax,ymin,ymax with min < max")
        bounds = args.bounds
    elif args.data is not None:
        ds = load_csv(args.data)
        if ds.d != forest.n_features:
            raise DimensionMismatchError(f"data has {ds.d} features, model was fit on {forest.n_features}")
        points = ds.points
    grid = scoremap_grid(forest, args.grid_size, bounds, points)
    _write_csv(args.out, ["x", "y", "score"], ([repr(float(v)) for v in row] for row in grid))
    return EXIT_OK


def cmd_gen_data(args) -> int:
    ds = generate(args.kind, args.seed)
    if args.translate is not None:
        ds = translate(ds, args.translate)
    save_csv(ds, args.out)
    return EXIT_OK


# -- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fubif", description="Function-based isolation forests.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a forest and save it")
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--model-out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score points with a saved forest")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", action="store_true", help="print AP, ROC AUC and precision@p")
    p.add_argument("--contamination", type=float, help="p for precision@p (default: label prevalence)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("explain", help="local or global feature importance")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=["local", "global"], default="global")
    p.add_argument("--out", required=True)
    p.add_argument("--contamination", type=float, help="top fraction treated as outliers when unlabeled")
    p.add_argument("--ignore-labels", action="store_true", help="partition by score even if labels exist")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("benchmark", help="metrics report over a dataset x settings grid")
    p.add_argument("--datasets", help="directory of labeled CSV files")
    p.add_argument("--synthetic", type=lambda s: [v for v in s.split(",") if v],
                   help="generated datasets to include, e.g. xaxis,bisect3d")
    p.add_argument("--data-seed", type=int, default=0, help="seed for --synthetic datasets")
    p.add_argument("--out", required=True)
    p.add_argument("--skip-auc-fs", action="store_true", help="leave auc_fs as nan (saves refits)")
    _add_config_flags(p, grid=True)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("scoremap", help="score a grid for a 2-d model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid-size", type=int, default=100)
    where = p.add_mutually_exclusive_group()
    where.add_argument("--data", help="CSV whose bounding box (padded 10%%) sets the grid")
    where.add_argument("--bounds", type=_floats, help="xmin,xmax,ymin,ymax")
    p.set_defaults(func=cmd_scoremap)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    p.add_argument("--kind", required=True, help="xaxis or bisect3d")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--translate", type=_floats, help="comma-separated offset, one value per feature")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)
    return parser


# list-valued flags whose value may start with "-" (e.g. --translate -10,0)
_LIST_FLAGS = ("--translate", "--bounds")


def _join_list_flags(argv):
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _LIST_FLAGS:
            value = next(it, None)
            out.append(tok if value is None else f"{tok}={value}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = build_parser().parse_args(_join_list_flags(argv))
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionMismatchError as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIM
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
