"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Shapes are the ones a 64x64 defense run hits: the conv surrogate's two
layers (3 -> 64 -> 3 channels, 3x3 taps) and the 11-tap smoothing window.
"""
import argparse
import timeit

import numpy as np

from grasp.filters import gaussian_window
from grasp.kernels import backends, conv_multi, correlate_depthwise

CASES = {
    "conv_multi 3->64": lambda rng: (conv_multi, rng.normal(size=(3, 66, 66)), rng.normal(size=(64, 3, 3, 3))),
    "conv_multi 64->3": lambda rng: (conv_multi, rng.normal(size=(64, 66, 66)), rng.normal(size=(3, 64, 3, 3))),
    "depthwise 11x11": lambda rng: (correlate_depthwise, rng.normal(size=(3, 74, 74)), gaussian_window(11, 11 / 6)),
}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=10)
    args = p.parse_args(argv)
    impls = backends()
    rng = np.random.default_rng(0)
    print(f"{'case':<20}" + "".join(f"{m.NAME + ' ms':>14}" for m in impls) + f"{'speedup':>10}")
    for label, make in CASES.items():
        fn, x, k = make(rng)
        times = []
        for m in impls:
            t = min(timeit.repeat(lambda: fn(x, k, m), number=args.number, repeat=args.repeat))
            times.append(1e3 * t / args.number)
        ref = [fn(x, k, m) for m in impls]
        same = all(np.array_equal(r, ref[0]) for r in ref)
        speed = times[-1] / times[0] if len(times) > 1 else 1.0
        print(f"{label:<20}" + "".join(f"{t:>14.3f}" for t in times) + f"{speed:>9.1f}x"
              + ("" if same else "  MISMATCH"))


if __name__ == "__main__":
    main()
