"""Compare the numba kernels with the pure-numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--k 3] [--c 3] [--T 8] [--n 2000] [--repeat 5]

Prints the best-of-``repeat`` wall time of each kernel on both backends, the
speedup, and the largest absolute difference between the two results.
"""
import argparse
import time

import numpy as np

from oakeshmm import ProbParams, simulate
from oakeshmm import _kernels
from oakeshmm._accel import HAS_NUMBA
from oakeshmm.params import elementary_derivatives


def _best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _max_diff(a, b):
    return max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, b))


def random_params(rng, k, c):
    return ProbParams(rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k), size=k), rng.dirichlet(np.ones(c), size=k).T)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--c", type=int, default=3)
    ap.add_argument("--T", type=int, default=8)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if not HAS_NUMBA:
        raise SystemExit("numba is unavailable or disabled; nothing to compare")

    rng = np.random.default_rng(args.seed)
    p = random_params(rng, args.k, args.c)
    d = simulate(p, args.n, args.T, seed=args.seed)
    obs, counts = d.configs, d.counts.astype(float)
    base = (obs, counts, p.initial, p.transition, p.response)
    de = elementary_derivatives(p)
    cases = {
        "forward_backward": (
            lambda: _kernels.forward_backward_nb(obs, p.initial, p.transition, p.response),
            lambda: _kernels.forward_backward_np(obs, p.initial, p.transition, p.response),
        ),
        "estep": (lambda: _kernels.estep_nb(*base)[0], lambda: _kernels.estep_np(*base)[0]),
        "dpass": (lambda: _kernels.dpass_nb(*base, *de)[0], lambda: _kernels.dpass_np(*base, *de)[0]),
    }
    print(f"k={args.k} c={args.c} T={args.T} n={args.n} configurations={d.n_configs} s={p.n_params}")
    print(f"{'kernel':<18}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, (nb, npy) in cases.items():
        nb()  # compile or load from cache outside the timing
        t_nb, out_nb = _best_time(nb, args.repeat)
        t_np, out_np = _best_time(npy, args.repeat)
        print(f"{name:<18}{1e3 * t_nb:>12.3f}{1e3 * t_np:>12.3f}{t_np / t_nb:>10.1f}{_max_diff(out_nb, out_np):>13.2e}")


if __name__ == "__main__":
    main()
