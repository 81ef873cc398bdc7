"""Compare the compiled and pure-Python kernel backends.

Usage::

    python3 benchmarks/bench_kernels.py [--nodes 20000] [--repeat 5]

For every kernel the script checks that both backends return the same
numbers, then reports the best-of-``repeat`` wall time and the speed-up.
"""
import argparse
import time

import numpy as np

from hba import kernels


def random_csr(rng, n, out_degree=4, term_frac=0.01):
    term = rng.random(n) < term_frac
    term[-1] = True
    indptr = [0]
    indices, data = [], []
    for s in range(n):
        if term[s]:
            indices.append(s)
            data.append(1.0)
        else:
            dst = rng.integers(n, size=out_degree)
            w = rng.random(out_degree) + 0.05
            indices.extend(dst)
            data.extend(w / w.sum())
        indptr.append(len(indices))
    return np.array(indptr), np.array(indices), np.array(data), term


def _parts(out):
    return out if isinstance(out, tuple) else (out,)


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=20_000)
    parser.add_argument("--steps", type=int, default=50)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    indptr, indices, data, term = random_csr(rng, args.nodes)
    block_of = rng.integers(64, size=args.nodes)
    observed = rng.random((args.nodes, 8)) * (rng.random((args.nodes, 8)) < 0.5)
    peak = np.maximum(observed, rng.random((args.nodes, 8)))
    cases = {
        "bounded_reach": lambda: kernels.bounded_reach(indptr, indices, data, term, args.steps),
        "reach_fixpoint": lambda: kernels.reach_fixpoint(indptr, indices, data, term, 1e-10, 100_000),
        "block_mass": lambda: kernels.block_mass(indptr, indices, data, block_of, 64),
        "overlap_terms": lambda: kernels.overlap_terms(observed, peak, 10),
    }
    print(f"nodes={args.nodes} edges={len(indices)} steps={args.steps} repeat={args.repeat}")
    print(f"available backends: {', '.join(kernels.BACKENDS)}")
    header = f"{'kernel':<16}" + "".join(f"{b + ' [ms]':>16}" for b in kernels.BACKENDS)
    if len(kernels.BACKENDS) > 1:
        header += f"{'speed-up':>10}"
    print(header)
    previous = kernels.backend()
    try:
        for name, fn in cases.items():
            times, outputs = [], []
            for b in kernels.BACKENDS:
                kernels.use_backend(b)
                t, out = best_time(fn, args.repeat)
                times.append(t)
                outputs.append(out)
            reference = _parts(outputs[0])
            for out in outputs[1:]:
                for a, b in zip(reference, _parts(out)):
                    np.testing.assert_allclose(a, b, atol=1e-9)
            row = f"{name:<16}" + "".join(f"{1e3 * t:>16.2f}" for t in times)
            if len(times) > 1:
                row += f"{times[1] / times[0]:>9.1f}x"
            print(row)
    finally:
        kernels.use_backend(previous)


if __name__ == "__main__":
    main()
