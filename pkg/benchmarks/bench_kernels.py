"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 20]

Each kernel is called once untimed (numba compiles on first call, numpy
warms its caches), then the best of ``--repeat`` calls is reported.  The
two backends are also checked to agree before timing.
"""

import argparse
import time

import numpy as np

from halodeconv import kernels


def best_of(fn, args, repeat):
    fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(n, rng):
    img = rng.random((n, n)) + 0.1
    mask = rng.random((n, n)) > 0.3
    return {
        "tv_value_grad": (img, 1e-2),
        "logsmooth_value_grad": (img,),
        "forward_diff": (img,),
        "dilate3": (mask,),
        "erode3": (mask,),
        "strict_local_maxima": (img,),
        "median_filter": (img, 3),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return np.isclose(a, b, rtol=1e-10)
    return np.allclose(a, b, rtol=1e-10, atol=1e-12)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    if kernels.numba_backend is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'numpy ms':>10}{'numba ms':>10}{'speedup':>9}")
    for name, fargs in cases(args.size, rng).items():
        f_np = getattr(kernels.numpy_backend, name)
        f_nb = getattr(kernels.numba_backend, name)
        if not _same(f_np(*fargs), f_nb(*fargs)):
            raise SystemExit(f"backends disagree on {name}")
        t_np = best_of(f_np, fargs, args.repeat)
        t_nb = best_of(f_nb, fargs, args.repeat)
        print(f"{name:<22}{1e3 * t_np:>10.3f}{1e3 * t_nb:>10.3f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
