#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy reference backend.

Times the three hot kernels on training-shaped tensors and a full training
epoch with each backend swapped in. Backends are bit-identical in output;
this only measures speed. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--epoch-samples N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import envseal.bdnn.kernels as kernels
from envseal.bdnn.kernels import available_backends

KERNEL_NAMES = ("im2col", "col2im", "maxpool2x2", "maxpool2x2_backward")


def bench(fn, *args, repeat: int = 30) -> float:
    fn(*args)  # warm up
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def micro(backend) -> dict[str, float]:
    rng = np.random.default_rng(0)
    x = rng.standard_normal((16, 8, 32, 32))
    cols = backend.im2col(x, 3, 3, 1, 1)
    out, argmax = backend.maxpool2x2(x)
    dout = rng.standard_normal(out.shape)
    return {
        "im2col": bench(backend.im2col, x, 3, 3, 1, 1),
        "col2im": bench(backend.col2im, cols, 8, 32, 32, 3, 3, 1, 1),
        "maxpool2x2": bench(backend.maxpool2x2, x),
        "maxpool2x2_backward": bench(backend.maxpool2x2_backward, dout, argmax),
    }


def swap_backend(module) -> None:
    for name in KERNEL_NAMES:
        setattr(kernels, name, getattr(module, name))


def epoch_time(module, n_samples: int) -> float:
    from envseal.bdnn import TrainConfig, train
    from envseal.core import AttributeSample, Label, SampleKind
    from envseal.demo import disc_image, _negative_image
    from envseal.images import encode_pgm
    from envseal.core import Bitmap

    swap_backend(module)
    rng = np.random.default_rng(1)
    samples = []
    for i in range(n_samples // 2):
        for maker, label in ((disc_image, Label.POSITIVE), (_negative_image, Label.NEGATIVE)):
            arr = np.clip(maker(rng), 0, 255).astype(np.uint8)
            data = encode_pgm(Bitmap(32, 32, 1, arr.tobytes()))
            samples.append(AttributeSample(SampleKind.IMAGE, data, label, f"{label.value}{i}"))
    cfg = TrainConfig(epochs=2, seed=0)
    t0 = time.perf_counter()
    train(samples, cfg)
    return (time.perf_counter() - t0) / cfg.epochs


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--epoch-samples", type=int, default=128)
    args = parser.parse_args()

    backends = available_backends()
    if len(backends) < 2:
        print("compiled backend not built; run: python3 setup.py build_ext --inplace")
    print(f"backends: {', '.join(sorted(backends))}\n")

    results = {name: micro(mod) for name, mod in backends.items()}
    header = f"{'kernel':<22}" + "".join(f"{name:>14}" for name in sorted(results))
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for kernel in KERNEL_NAMES:
        row = f"{kernel:<22}"
        times = [results[name][kernel] for name in sorted(results)]
        row += "".join(f"{t * 1e3:>12.2f}ms" for t in times)
        if len(times) == 2:
            ref = results["reference"][kernel]
            fast = results[sorted(set(results) - {"reference"})[0]][kernel]
            row += f"{ref / fast:>9.2f}x"
        print(row)

    print(f"\ntraining epoch ({args.epoch_samples} samples, stock model):")
    original = {name: getattr(kernels, name) for name in KERNEL_NAMES}
    try:
        epoch = {name: epoch_time(mod, args.epoch_samples) for name, mod in backends.items()}
    finally:
        for name, fn in original.items():
            setattr(kernels, name, fn)
    for name in sorted(epoch):
        print(f"  {name:<12} {epoch[name]:.3f}s/epoch")
    if len(epoch) == 2:
        other = sorted(set(epoch) - {"reference"})[0]
        print(f"  end-to-end speedup: {epoch['reference'] / epoch[other]:.2f}x")


if __name__ == "__main__":
    main()
