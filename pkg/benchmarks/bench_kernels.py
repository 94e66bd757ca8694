"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py            # kernel-level comparison
    python3 benchmarks/bench_kernels.py --end-to-end

The end-to-end mode runs a pressure estimate in two subprocesses, one with
THERMOSHIFT_DISABLE_NUMBA=1.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from thermoshift import _kernels as k
from thermoshift.potentials import potential_from_function
from thermoshift.symbolic import shift_from_config

_END_TO_END = """
import json, time
from thermoshift import _kernels
from thermoshift.pressure import pressure_estimate
from thermoshift.symbolic import shift_from_config
from thermoshift.potentials import potential_from_function
spec = shift_from_config("golden-mean")
phi = potential_from_function(spec, 1, 2, lambda w: 0.1 * sum(w) - 0.3 * w[0] * w[-1])
pressure_estimate(spec, phi, 8, "fekete")
t0 = time.perf_counter()
pressure_estimate(spec, phi, {n}, "fekete")
print(json.dumps({{"backend": _kernels.backend(), "seconds": time.perf_counter() - t0}}))
"""


def _inputs(n):
    spec = shift_from_config("full2")
    phi = potential_from_function(spec, 1, 2, lambda w: 0.1 * sum(w) - 0.3 * w[0] * w[-1])
    trans = spec.automaton.trans.astype(np.int64)
    words = np.zeros((1, 0), dtype=np.uint8)
    states = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        words, states = k.extend_words_numpy(words, states, trans)
    logw = np.log(np.arange(1, trans.size + 1, dtype=np.float64)).reshape(trans.shape)
    keys = (np.arange(words.shape[0]) // 4).astype(np.int64)
    return spec, phi, trans, words, states, logw, keys


def kernel_table(n: int, repeat: int) -> list[tuple[str, float, float]]:
    if not k.HAVE_NUMBA:
        raise SystemExit("numba is not active; unset THERMOSHIFT_DISABLE_NUMBA or install numba")
    spec, phi, trans, words, states, logw, keys = _inputs(n)
    sums = k.window_sums_numpy(words, phi.dense, phi.width, spec.nsym)
    calls = {
        "extend_words": lambda impl: impl(words, states, trans),
        "window_sums": lambda impl: impl(words, phi.dense, phi.width, spec.nsym),
        "group_max": lambda impl: impl(keys, sums, int(keys.max()) + 1),
        "walk": lambda impl: impl(words, 0, trans, logw),
    }
    rows = []
    for name, call in calls.items():
        fast, slow = getattr(k, name + "_numba"), getattr(k, name + "_numpy")
        call(fast)  # compile outside the timing
        t_numba = min(timeit.repeat(lambda: call(fast), number=1, repeat=repeat))
        t_numpy = min(timeit.repeat(lambda: call(slow), number=1, repeat=repeat))
        rows.append((name, t_numba, t_numpy))
    return rows


def end_to_end(n_max: int) -> dict:
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = {**os.environ, "THERMOSHIFT_DISABLE_NUMBA": flag}
        proc = subprocess.run([sys.executable, "-c", _END_TO_END.format(n=n_max)], env=env,
                              capture_output=True, text=True, check=True)
        out[label] = json.loads(proc.stdout.strip().splitlines()[-1])
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--length", type=int, default=18, help="word length (full shift: 2^length rows)")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--end-to-end", action="store_true")
    parser.add_argument("--n-max", type=int, default=20)
    args = parser.parse_args()
    if args.end_to_end:
        res = end_to_end(args.n_max)
        for label, r in res.items():
            print(f"{label:<6} backend={r['backend']:<6} {r['seconds'] * 1e3:9.2f} ms")
        return
    print(f"{'kernel':<14}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, a, b in kernel_table(args.length, args.repeat):
        print(f"{name:<14}{a * 1e3:12.2f}{b * 1e3:12.2f}{b / a:10.1f}x")


if __name__ == "__main__":
    main()
