"""Time the compiled and pure-Python kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--size 128] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from stereokit import _kernels


def cases(size, rng):
    img = rng.random((size, size, 3))
    disp = rng.uniform(0, 20, (size, size))
    feats = rng.normal(size=(32, size // 4, size // 4))
    return {
        "warp_rows": lambda m: m.warp_rows(img, disp, 1.0),
        "laplacian_coo": lambda m: m.laplacian_coo(img, 1, 1e-7),
        "autocorr": lambda m: m.autocorr(feats, 3),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    impls = _kernels.backends()
    rng = np.random.default_rng(0)
    print(f"size {args.size}x{args.size}, best of {args.repeat}; backends: {', '.join(sorted(impls))}")
    print(f"{'kernel':<16}" + "".join(f"{name:>12}" for name in sorted(impls)) + f"{'speedup':>10}")
    for kernel, fn in cases(args.size, rng).items():
        times = {}
        for name, mod in sorted(impls.items()):
            fn(mod)  # warm-up
            times[name] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{kernel:<16}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in sorted(impls)) + f"{speed:>9.1f}x")


if __name__ == "__main__":
    main()
