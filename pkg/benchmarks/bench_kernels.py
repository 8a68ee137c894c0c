"""Compare the compiled and pure-Python numeric kernels.

    python3 benchmarks/bench_kernels.py [--size N] [--repeat R]
"""
import argparse
import importlib
import timeit

import numpy as np

from pllvle.numeric import _pykernels


def _compiled():
    try:
        return importlib.import_module("pllvle.numeric._ckernels")
    except ImportError:
        return None


def cases(n, gen):
    x = gen.uniform(1e-3, 50.0, n)
    a = gen.uniform(0.05, 20.0, n)
    z = gen.gamma(a)
    return {
        "lgamma": (x,),
        "digamma": (x,),
        "trigamma": (x,),
        "gamma_cdf": (a, z),
        "gamma_cdf_shape_derivative": (z, a),
        "gamma_log_sample_grad": (a, np.log(z)),
    }


def _tuple(out):
    return out if isinstance(out, tuple) else (out,)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--size", type=int, default=100_000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    compiled = _compiled()
    gen = np.random.default_rng(0)
    print(f"{'kernel':<28}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}{'max diff':>12}")
    for name, inputs in cases(args.size, gen).items():
        py = getattr(_pykernels, name)
        t_py = min(timeit.repeat(lambda: py(*inputs), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{name:<28}{t_py:>12.2f}{'n/a':>14}")
            continue
        c = getattr(compiled, name)
        t_c = min(timeit.repeat(lambda: c(*inputs), number=1, repeat=args.repeat)) * 1e3
        out_py, out_c = py(*inputs), c(*inputs)
        diff = max(np.nanmax(np.abs(np.asarray(u) - np.asarray(v))) for u, v in zip(_tuple(out_py), _tuple(out_c)))
        print(f"{name:<28}{t_py:>12.2f}{t_c:>14.2f}{t_py / t_c:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
