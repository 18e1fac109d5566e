"""Time the compiled kernels against the numpy fallback, then a short AFG
training run under each backend (each in a fresh interpreter, since the
backend is fixed at import).

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dfs_gzsl import _kernels_py

try:
    from dfs_gzsl import _ckernels
except ImportError:
    _ckernels = None

TRAIN_SNIPPET = """
import time
from dfs_gzsl import BACKEND
from dfs_gzsl.afg import AfgConfig, train_afg
from dfs_gzsl.data_io import generate_synthetic_benchmark
ds = generate_synthetic_benchmark()
t = time.perf_counter()
train_afg(ds, AfgConfig(epochs=30))
print(BACKEND, time.perf_counter() - t)
"""


def _inputs(n: int, d: int, rng: np.random.Generator) -> dict:
    mu1, lv1, mu2, lv2 = (rng.standard_normal((n, d)) for _ in range(4))
    p = rng.standard_normal(n * d)
    return {
        "l1_rows": (mu1, mu2),
        "kl_rows": (mu1, lv1),
        "w2_rows": (mu1, lv1, mu2, lv2),
        "softmax_xent_rows": (mu1, rng.integers(0, d, n)),
        "adam_update": (p, p * 0.1, np.zeros_like(p), np.zeros_like(p), 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001),
    }


def bench_kernels(sizes, repeat: int) -> None:
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18} {'shape':>10} {'python us':>11} {'cython us':>11} {'speedup':>8}")
    for n, d in sizes:
        args = _inputs(n, d, rng)
        for name, a in args.items():
            py = min(timeit.repeat(lambda: getattr(_kernels_py, name)(*a), number=repeat, repeat=5)) / repeat
            if _ckernels is None:
                print(f"{name:<18} {n:>5}x{d:<4} {py * 1e6:>11.1f} {'n/a':>11}")
                continue
            cy = min(timeit.repeat(lambda: getattr(_ckernels, name)(*a), number=repeat, repeat=5)) / repeat
            print(f"{name:<18} {n:>5}x{d:<4} {py * 1e6:>11.1f} {cy * 1e6:>11.1f} {py / cy:>7.2f}x")


def bench_training() -> None:
    for pure in ("1", "0"):
        env = {**os.environ, "DFS_GZSL_PURE_PYTHON": pure}
        out = subprocess.run([sys.executable, "-c", TRAIN_SNIPPET], env=env, check=True,
                             capture_output=True, text=True).stdout.split()
        print(f"train_afg 30 epochs  backend={out[0]:<7} {float(out[1]):.3f} s")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    bench_kernels([(32, 16), (64, 32), (1024, 256)], args.repeat)
    print()
    bench_training()


if __name__ == "__main__":
    main()
