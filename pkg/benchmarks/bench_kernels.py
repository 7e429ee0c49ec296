"""Compare the compiled and pure-Python kernels on paper-profile sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--walks N] [--points N] [--repeat R]
"""

import argparse
import time

import numpy as np

from polarscope import _pykernels, graph
from polarscope.synth import generate, paper_profile

try:
    from polarscope import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def walk_inputs(seed):
    ds, _ = generate(paper_profile(seed))
    g = graph.build_graph(ds)
    sides = graph.detect_communities(g, 2)
    side = np.array([sides[v] for v in g.nodes], dtype=np.int64)
    deg = g.degrees()
    auth_side = np.full(g.n_nodes, -1, dtype=np.int8)
    starts = []
    for s in (0, 1):
        members = np.flatnonzero(side == s)
        k = graph.default_k_authoritative(len(members))
        ranked = sorted(members.tolist(), key=lambda v: (-int(deg[v]), v))
        auth_side[ranked[:k]] = s
        starts.append(np.array(sorted(ranked[k:]), dtype=np.int64))
    reachable = np.ones(g.n_nodes, dtype=np.int8)
    cumw = np.empty_like(g.weights)
    for i in range(g.n_nodes):
        lo, hi = g.indptr[i], g.indptr[i + 1]
        cumw[lo:hi] = np.cumsum(g.weights[lo:hi])
    return g, cumw, auth_side, reachable, starts[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--walks", type=int, default=10_000)
    ap.add_argument("--points", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    g, cumw, auth_side, reachable, starts = walk_inputs(0)
    walk_args = (g.indptr, g.indices, cumw, auth_side, reachable, starts, args.walks, 0, 0, 100_000, 10_000)
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(args.points, 3))
    labels = rng.integers(0, 4, size=args.points).astype(np.int64)

    cases = [
        (f"random_walks ({args.walks} walks, {g.n_nodes} nodes)",
         lambda m: (lambda: m.random_walks(*walk_args))),
        (f"cluster_distance_sums ({args.points} x 3, k=4)",
         lambda m: (lambda: m.cluster_distance_sums(X, labels, 4))),
    ]
    print(f"{'kernel':<48} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}  identical")
    for name, make in cases:
        t_py, out_py = best_of(make(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<48} {t_py:11.4f} {'n/a':>11} {'n/a':>8}  n/a")
            continue
        t_c, out_c = best_of(make(_ckernels), args.repeat)
        same = all(np.array_equal(np.asarray(a), np.asarray(b)) for a, b in zip(
            out_py if isinstance(out_py, tuple) else (out_py,),
            out_c if isinstance(out_c, tuple) else (out_c,)))
        print(f"{name:<48} {t_py:11.4f} {t_c:11.4f} {t_py / t_c:7.1f}x  {same}")


if __name__ == "__main__":
    main()
