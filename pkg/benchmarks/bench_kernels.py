"""Compare the compiled kernels with the numpy fallback on deep-sea-sized workloads.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--depth D]
"""

import argparse
import timeit

import numpy as np

from deepexplore import _fallback
from deepexplore.numerics import MlpSpec, init_params

try:
    from deepexplore import _kernels
except ImportError:  # extension not built
    _kernels = None


def workload(depth, batch, seed=0):
    rng = np.random.default_rng(seed)
    spec = MlpSpec(depth * depth, 2, 2, 50, "leaky_relu", 0.1)
    params = init_params(spec, rng)
    table = np.eye(depth * depth)
    rows = rng.integers(0, depth * depth, batch).astype(np.int64)
    actions = rng.integers(0, 2, batch).astype(np.int64)
    targets = rng.standard_normal(batch)
    return spec, params, table, rows, actions, targets


def bench(mod, spec, params, table, rows, actions, targets, repeat):
    grad = np.empty_like(params)
    m, v = np.zeros_like(params), np.zeros_like(params)
    theta = params.copy()
    z = np.random.default_rng(1).standard_normal(params.size)
    cases = {
        "forward": lambda: mod.mlp_forward(params, spec.dims, spec.negative_slope, table, rows),
        "loss+grad": lambda: mod.mlp_td_grad(params, spec.dims, spec.negative_slope, table, rows,
                                             actions, targets, 1e-4, grad),
        "adam+noise": lambda: mod.adam_update(theta, grad, m, v, 1e-3, 0.9, 0.999, 1e-8, 1e-4, z),
    }
    return {k: min(timeit.repeat(f, number=repeat, repeat=3)) / repeat * 1e6 for k, f in cases.items()}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=500)
    ap.add_argument("--depth", type=int, default=10)
    ap.add_argument("--batch", type=int, default=128)
    args = ap.parse_args()
    w = workload(args.depth, args.batch)
    py = bench(_fallback, *w, args.repeat)
    print(f"depth {args.depth}, batch {args.batch}, {w[0].n_params} parameters; microseconds per call")
    print(f"{'kernel':<12}{'numpy':>10}{'compiled':>10}{'speedup':>9}")
    comp = bench(_kernels, *w, args.repeat) if _kernels is not None else {}
    for k, t in py.items():
        c = comp.get(k)
        if c is None:
            print(f"{k:<12}{t:>10.1f}{'n/a':>10}")
        else:
            print(f"{k:<12}{t:>10.1f}{c:>10.1f}{t / c:>8.2f}x")


if __name__ == "__main__":
    main()
