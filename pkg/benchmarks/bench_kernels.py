"""Benchmark the compiled trial kernel against the numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--trials 20000] [--sizes 4 8 14]
"""

import argparse
import time

import numpy as np

from swarmphase import kernels
from swarmphase.channel import NoiseModel, RngStream
from swarmphase.gls import ls_policy
from swarmphase.symstate import make_optimal_input_state


def bench(backend, n_qubits, model, trials, repeats=3):
    state = make_optimal_input_state(n_qubits)
    policy = ls_policy(n_qubits)
    gen = RngStream(0, "bench", n_qubits).generator
    phis = gen.uniform(0, 2 * np.pi, trials)
    raws = kernels.draw_raws(model, trials, n_qubits, gen)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        kernels.simulate_batch(policy.deltas, state.amplitudes, model, phis,
                               None, backend=backend, raws=raws)
        best = min(best, time.perf_counter() - t0)
    return trials / best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20_000)
    parser.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 14])
    args = parser.parse_args()

    models = {
        "ideal": NoiseModel(),
        "noisy": NoiseModel(kind="gaussian", sigma_theta=0.1 * np.pi,
                            sigma_n=0.1, loss_eta=0.05),
    }
    backends = ["py"] + (["c"] if kernels.HAVE_C_KERNEL else [])
    if not kernels.HAVE_C_KERNEL:
        print("compiled kernel not available; benchmarking the fallback only")

    print(f"{'N':>3} {'model':>6} " + " ".join(f"{b + ' trials/s':>14}" for b in backends)
          + ("   speedup" if len(backends) == 2 else ""))
    for n in args.sizes:
        for name, model in models.items():
            rates = [bench(b, n, model, args.trials) for b in backends]
            row = f"{n:>3} {name:>6} " + " ".join(f"{r:>14.0f}" for r in rates)
            if len(rates) == 2:
                row += f"   {rates[1] / rates[0]:>6.2f}x"
            print(row)


if __name__ == "__main__":
    main()
