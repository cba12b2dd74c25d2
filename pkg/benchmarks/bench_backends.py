"""Compare the numba and pure-numpy backends on fit, score and explain.

    python benchmarks/bench_backends.py [--families IF,EIF,HIF] [--n-trees 100] [--repeats 3]

Prints one line per (family, stage) with the median wall time of each
backend, the speedup, and the largest absolute difference between the
two backends' outputs. The numba kernels are compiled (or loaded from
cache) before timing starts.
"""
import argparse
import statistics
import time

import numpy as np

from fubif import ForestConfig, fit, generate_xaxis, scenario_split
from fubif._backend import HAVE_NUMBA, NUMBA, NUMPY
from fubif.importance import local_importance_matrix


def timed(fn, repeats):
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times) * 1000.0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--families", default="IF,EIF,HIF,Ellipse,Quad,NN")
    ap.add_argument("--threshold-kind", default="normal")
    ap.add_argument("--n-trees", type=int, default=100)
    ap.add_argument("--explain-points", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    train, test = scenario_split(generate_xaxis(0), "II")
    X = test.points
    E = X[-args.explain_points:]
    print(f"{'family':<10}{'stage':<9}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}{'max |diff|':>12}")
    for fam in args.families.split(","):
        config = ForestConfig(family=fam, threshold_kind=args.threshold_kind, n_trees=args.n_trees)
        # warm-up: compile or load the kernels
        small = fit(train.points[:16], config.replace(n_trees=1), NUMBA)
        small.score_samples(X[:4], NUMBA)
        local_importance_matrix(small, X[:4], NUMBA)

        results = {}
        for backend in (NUMBA, NUMPY):
            t_fit, forest = timed(lambda: fit(train.points, config, backend), args.repeats)
            t_score, scores = timed(lambda: forest.score_samples(X, backend), args.repeats)
            # the first explain call builds the per-tree routing tables; time it cold
            t_explain, local = timed(lambda: local_importance_matrix(forest, E, backend), 1)
            results[backend] = {"fit": (t_fit, forest.score_samples(X, NUMPY)),
                                "score": (t_score, scores), "explain": (t_explain, local)}
        for stage in ("fit", "score", "explain"):
            (ta, a), (tb, b) = results[NUMBA][stage], results[NUMPY][stage]
            diff = float(np.max(np.abs(a - b)))
            print(f"{fam:<10}{stage:<9}{ta:>10.1f}{tb:>10.1f}{tb / ta:>8.1f}x{diff:>12.2e}")


if __name__ == "__main__":
    main()
