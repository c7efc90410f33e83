"""Compare the compiled and pure-Python chain kernels.

Both backends receive the same pre-drawn randomness; the script checks that
their outputs are identical and prints the best-of-``--repeat`` wall time.

    python benchmarks/bench_kernels.py [--steps 200000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from gibbslab import _backend


def cases(steps: int, rng: np.random.Generator):
    d = 2
    z = rng.standard_normal((steps, d))
    log_u = np.log(rng.random(steps))
    r = rng.integers(0, 4, steps)
    lt = np.log(rng.dirichlet(np.ones(5)))
    batch = 64
    noise_b = rng.standard_normal((max(steps // batch, 1), batch, d))
    shift_b = rng.standard_normal((batch, d))
    w_b = rng.standard_normal((batch, d))
    return {
        "mh_quadratic": lambda k: k.mh_quadratic(np.zeros(d), 11.0, np.ones(d), 0.7, z, log_u),
        "mh_finite": lambda k: k.mh_finite(0, lt, r, log_u),
        "ula_quadratic_path": lambda k: k.ula_quadratic_path(np.zeros(d), 11.0, np.ones(d), 1e-3, z, 1.0, 1e6),
        "ula_quadratic_batch": lambda k: (lambda w: (k.ula_quadratic_batch(w, 11.0, shift_b, 1e-3, noise_b,
                                                                           1.0, 1e6), w))(w_b.copy()),
    }


def best_time(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    py = _backend.load("python")
    try:
        cy = _backend.load("cython")
    except ImportError:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    print(f"{'kernel':22s} {'python [s]':>11s} {'cython [s]':>11s} {'speedup':>8s}  identical")
    for name, fn in cases(args.steps, np.random.default_rng(0)).items():
        t_py, out_py = best_time(lambda: fn(py), args.repeat)
        t_cy, out_cy = best_time(lambda: fn(cy), args.repeat)
        print(f"{name:22s} {t_py:11.4f} {t_cy:11.4f} {t_py / t_cy:8.1f}x  {same(out_py, out_cy)}")


if __name__ == "__main__":
    main()
