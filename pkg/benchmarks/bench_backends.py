"""Wall time per device-step of the numba and numpy Enable kernels.

    python3 benchmarks/bench_backends.py [--n-devices 8] [--trials 20] [--batch 64]

The numba kernel integrates one trial at a time; the numpy kernel vectorizes
over a batch of trials, so it is timed at the given batch size. Both consume
identical noise, which the script checks by comparing output words.
"""

import argparse
import time

import numpy as np

from mtjtrng import kernels, nominal_config, seeding
from mtjtrng.protocol import words_from_mx


def _gens(n):
    return [seeding.generator(seeding.trial_key(0, i)) for i in range(n)]


def time_backend(cfg, backend, trials, batch):
    kernels.simulate(cfg.replace(t_enable=10 * cfg.dt), _gens(1), backend=backend)  # warm up / compile
    done, words, t0 = 0, [], time.perf_counter()
    while done < trials:
        k = min(batch, trials - done)
        gens = [seeding.generator(seeding.trial_key(0, i)) for i in range(done, done + k)]
        words.append(words_from_mx(kernels.simulate(cfg, gens, backend=backend).mx))
        done += k
    elapsed = time.perf_counter() - t0
    steps = trials * cfg.n_devices * (cfg.n_steps + cfg.n_burn)
    return elapsed, elapsed / steps, np.concatenate(words)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-devices", type=int, default=8, choices=(2, 4, 6, 8))
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--batch", type=int, default=64, help="trials per numpy call")
    args = ap.parse_args()
    cfg = nominal_config(args.n_devices)
    results = {}
    for backend in ("numba", "numpy"):
        elapsed, per_step, words = time_backend(cfg, backend, args.trials, args.batch)
        results[backend] = words
        print(f"{backend:6s} {args.trials} trials  {elapsed:8.2f} s  {per_step * 1e9:8.1f} ns/device-step")
    same = np.array_equal(results["numba"], results["numpy"])
    print(f"identical words: {same}")


if __name__ == "__main__":
    main()
