"""Time the compiled and NumPy Monte Carlo kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--resolution 0.02] [--runs 20] [--repeat 3]

Random draws and field vectors are prepared once outside the timed
region, so the numbers reflect the kernels alone. End-to-end timings
(including draw generation) are reported per backend as well.
"""

import argparse
import time

import numpy as np

from magloc import core
from magloc.body import generate_phantom
from magloc.config import ScenarioConfig
from magloc.fieldmodel import field_vectors
from magloc.simharness import simulate_voxels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--resolution", type=float, default=0.02)
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--arrangements", default="W3,W6,W15,W30")
    args = ap.parse_args()

    body = generate_phantom(resolution=args.resolution)
    print(f"{len(body)} voxels x {args.runs} runs, backends: {', '.join(core.BACKENDS)}")
    print(f"{'arrangement':>11} {'backend':>8} {'kernel s':>9} {'Mvox-run/s':>11} {'end-to-end s':>13} {'rel time':>8}")
    for name in args.arrangements.split(","):
        cfg = ScenarioConfig(arrangement=name, runs_per_point=args.runs, seed=1)
        ws = cfg.build_wireset(body.bounding_box)
        plan = core.KernelPlan.build(ws, cfg.magnetometer, cfg.residual, cfg.earth_mapping)
        pos = body.voxels
        fields = field_vectors(ws, pos)
        uni = core.block_uniforms(cfg.seed, np.arange(len(pos)), args.runs, core.draws_per_run(len(ws)))
        base = ref = None
        for backend in core.BACKENDS:
            kern = core.get_kernel(backend)
            chunk = core.default_chunk(len(ws), args.runs)

            def kernel_only():
                return [kern(pos[s:s + chunk], fields[s:s + chunk], uni[s:s + chunk], plan)
                        for s in range(0, len(pos), chunk)]

            t_kernel = best_of(kernel_only, args.repeat)
            means = np.concatenate([m for m, _, _ in kernel_only()])
            if ref is None:
                ref = means
            else:
                assert np.allclose(means, ref, rtol=1e-9, atol=1e-13, equal_nan=True)
            t_e2e = best_of(lambda: simulate_voxels(pos, ws, cfg, backend=backend), 1)
            base = base or t_kernel
            rate = len(pos) * args.runs / t_kernel / 1e6
            print(f"{name:>11} {backend:>8} {t_kernel:9.3f} {rate:11.2f} {t_e2e:13.3f} {t_kernel / base:8.2f}")


if __name__ == "__main__":
    main()
