"""Compare the compiled kernels against the numpy fallback.

Per-kernel timings call both implementations directly on identical inputs.
The end-to-end figure trains a short desk-scale run in a subprocess per
backend, since the backend is chosen once at import.

    python benchmarks/bench_kernels.py [--steps 3000] [--repeat 5]
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from opaclab import _fallback

try:
    from opaclab import _ckernels
except ImportError:  # extension not built
    _ckernels = None

END_TO_END = """
import time
from opaclab import harness, kernels
from opaclab.config import parse_text
cfg = parse_text('''algorithm = {algo}
env = nav_mixed
penalty_preset = large
total_env_steps = {steps}
eval_interval = {steps}
eval_episodes = 1
hidden_dims = 64, 64
batch_size = 128
initial_exploration_steps = 500
epoch_len = 500
''')
t0 = time.perf_counter()
harness.run_experiment(cfg, 0)
print(kernels.BACKEND, (time.perf_counter() - t0) / {steps} * 1e3)
"""


def kernel_cases(rng):
    n = 64 * 64 + 2 * 64 * 16  # about one 64x64 network
    p, g, m, v = (rng.normal(size=n) for _ in range(4))
    v = np.abs(v)
    u, mean, ls = rng.normal(size=(128, 2)), rng.normal(size=(128, 2)), rng.uniform(-2, 1, size=(128, 2))
    hazards = np.column_stack([rng.uniform(-2, 2, size=(6, 2)), np.full(6, 0.25)])
    goal = np.array([1.0, 1.0])
    pos, vel, act = np.zeros(2), np.zeros(2), np.array([0.3, -0.2])
    out = np.zeros(5 + 2 * 3)
    return {
        "adam_update": lambda k: k.adam_update(p, g.copy(), m, v, 1e-3, 0.9, 0.999, 1e-8, 10),
        "polyak": lambda k: k.polyak(p, m, 0.995),
        "tanh_gauss_logp (128x2)": lambda k: k.tanh_gauss_logp(u, mean, ls),
        "nav_physics": lambda k: k.nav_physics(pos, vel, act, hazards, goal, 0.95, 3.0, 2.0, 0.1, 2.0),
        "nav_observe": lambda k: k.nav_observe(pos, vel, goal, hazards, 3, out),
    }


def per_call_us(fn, repeat: int) -> float:
    number = 2000
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number * 1e6


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=3000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--algo", default="opac2")
    args = ap.parse_args(argv)

    backends = {"python": _fallback}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not available; timing the fallback only")

    cases = kernel_cases(np.random.default_rng(0))
    print(f"{'kernel':28s}" + "".join(f"{b + ' (us)':>16s}" for b in backends) + f"{'speedup':>10s}")
    for name, call in cases.items():
        t = {b: per_call_us(lambda: call(k), args.repeat) for b, k in backends.items()}
        speed = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{name:28s}" + "".join(f"{x:16.2f}" for x in t.values()) + f"{speed:10.1f}")

    print(f"\nend to end, {args.algo}, {args.steps} env steps (ms per step)")
    code = END_TO_END.format(algo=args.algo, steps=args.steps)
    for b in backends:
        env = {**os.environ, "OPACLAB_BACKEND": b}
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        name, ms = res.stdout.split()
        print(f"  {name:8s} {float(ms):8.3f}")


if __name__ == "__main__":
    main()
