"""Time the compiled kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``. Each kernel is
called on identical inputs by both implementations; results are checked for
agreement before timing.
"""
import argparse
import timeit

import numpy as np

from fairconformal import _fallback

try:
    from fairconformal import _kernels
except ImportError:
    _kernels = None


def _cases():
    rng = np.random.default_rng(0)
    Z = np.column_stack([np.ones(1000), rng.normal(size=(1000, 4))])
    y = Z @ rng.normal(size=5) + rng.normal(size=1000)
    yield "subgradient n=1000 p=5 2000 it", "subgradient_pinball", (Z, y, 0.05, 2000, 1.0, 0.0, 50)

    inner = 4096
    dv = 1.0 / (inner - 1)
    h = 0.178
    pad = int(np.ceil(h / dv)) + 1
    f = np.sort(rng.normal(size=inner + 2 * pad))
    t = (np.arange(1024) + 0.5) / 1024
    yield "triangular smooth 1024x4096", "kernel_smooth", (f, -pad * dv, dv, t, h, h, 0)
    pad4 = int(np.ceil(min(4 * h, 1.0) / dv)) + 1
    f4 = np.sort(rng.normal(size=inner + 2 * pad4))
    yield "gaussian smooth 1024x4096", "kernel_smooth", (f4, -pad4 * dv, dv, t, h,
                                                         min(4 * h, 1.0), 1)

    a = np.sort(rng.normal(size=20000))
    b = np.sort(rng.normal(0.1, 1, size=20000))
    yield "exact KS 20000 vs 20000", "ks_sorted", (a, b)


def _result(out):
    # the optimizer returns (theta, n_iter, converged); compare theta only
    return np.asarray(out[0] if isinstance(out, tuple) else out)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback can be timed")
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label, name, inputs in _cases():
        py = getattr(_fallback, name)
        t_py = min(timeit.repeat(lambda: py(*inputs), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{label:34s} {t_py:11.2f} {'-':>12s} {'-':>8s}")
            continue
        cy = getattr(_kernels, name)
        if not np.allclose(_result(py(*inputs)), _result(cy(*inputs)), rtol=1e-9, atol=1e-9):
            raise SystemExit(f"{name}: backends disagree")
        t_cy = min(timeit.repeat(lambda: cy(*inputs), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:34s} {t_py:11.2f} {t_cy:12.2f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
