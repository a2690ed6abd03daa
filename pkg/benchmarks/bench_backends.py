#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the three hot kernels at the experiment grid's layer sizes, plus one
representative full training run per backend.  Run from the repo root:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from volcast import backends
from volcast import network as nn
from volcast import trainers as tr

N_SAMPLES = 480
N_INPUTS, N_OUTPUTS = 7, 2
HIDDEN_SIZES = (20, 30, 40)
REPEATS = 200


def _time(fn, repeats=REPEATS):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_kernels():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(N_SAMPLES, N_INPUTS))
    Y = rng.normal(size=(N_SAMPLES, N_OUTPUTS))
    rows = []
    for hidden in HIDDEN_SIZES:
        net = nn.init_weights(nn.Topology("CFFN", N_INPUTS, hidden, N_OUTPUTS), 1)
        for kernel, fn in (
            ("forward", lambda: nn.forward_batch(net, X)),
            ("loss+grad", lambda: nn.loss_and_gradient(net, X, Y)),
            ("jacobian", lambda: nn.jacobian(net, X)),
        ):
            timings = {}
            for name in backends.available_backends():
                backends.use_backend(name)
                timings[name] = _time(fn)
            rows.append((f"7-{hidden}-2", kernel, timings))
    return rows


def bench_training():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(N_SAMPLES, N_INPUTS))
    Y = np.tanh(X @ rng.normal(size=(N_INPUTS, N_OUTPUTS))) * 0.5
    results = {}
    for name in ("auto",) + backends.available_backends():
        backends.use_backend(name)
        start = time.perf_counter()
        for algo in ("LM", "BFGS", "SCG"):
            net = nn.init_weights(nn.Topology("MLFF", N_INPUTS, 40, N_OUTPUTS), 3)
            tr.train(net, tr.TrainerSpec(algo), tr.TrainConfig(max_epochs=100), (X, Y))
        results[name] = time.perf_counter() - start
    backends.use_backend("auto")
    return results


def main():
    names = backends.available_backends()
    if len(names) < 2:
        print(f"only the {names[0]} backend is built; nothing to compare")

    print(f"default mode: {backends.active_backend()} "
          "(numpy forward/loss+grad, compiled jacobian when built)")
    print(f"kernel timings, mean of {REPEATS} calls on {N_SAMPLES} samples (ms)")
    header = f"{'net':>8s} {'kernel':>10s}" + "".join(f" {n:>10s}" for n in names)
    if len(names) == 2:
        header += f" {'speedup':>9s}"
    print(header)
    for net_label, kernel, timings in bench_kernels():
        line = f"{net_label:>8s} {kernel:>10s}"
        for n in names:
            line += f" {timings[n] * 1e3:10.3f}"
        if len(names) == 2:
            line += f" {timings['numpy'] / timings['cython']:8.2f}x"
        print(line)

    print()
    print("three 100-epoch training runs (LM, BFGS, SCG on a 7-40-2 net), seconds")
    for name, elapsed in bench_training().items():
        print(f"  {name:>8s} {elapsed:8.3f}")


if __name__ == "__main__":
    main()
