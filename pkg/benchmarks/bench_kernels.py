"""Compare the compiled and pure-Python geometry kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints the best wall time per call for each kernel and backend, the speedup,
and whether both backends returned identical results on the same inputs.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from hideseek import kernels
from hideseek.presets import preset
from hideseek.world import build_arena


def _scene(seed: int = 0):
    cfg = preset("hideseek_level4").config
    w = build_arena(4, 4, {"hiders": 2, "seekers": 4}, seed, cfg.arena, cfg.world)
    lo, hi = w.box_lo(), w.box_hi()
    return w, lo, hi


def _dirs(n: int, rng) -> np.ndarray:
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def cases(rng):
    w, lo, hi = _scene()
    origin = w.pos[w.agent_ids[0]]
    rays = _dirs(648, rng)
    flat = _dirs(16, rng) * np.array([1.0, 0.0, 1.0])
    flat /= np.linalg.norm(flat, axis=1, keepdims=True)
    p1 = rng.uniform(lo.min(0), hi.max(0), size=3)

    def overlaps(mod):
        pos, vel = w.pos.copy(), w.vel.copy()
        prio = np.where(np.isin(w.kind, [0, 1]), kernels.AGENT, kernels.STATIC).astype(np.int64)
        prio[w.ids_of(2)] = kernels.LIGHT
        is_agent = np.isin(w.kind, [0, 1]).astype(np.uint8)
        pos[w.agent_ids] += 0.3
        mod.resolve_overlaps(pos, vel, w.half, prio, is_agent, w.bounds_lo, w.bounds_hi, 4)
        return pos, vel

    return {
        "ray_boxes (648 rays)": lambda m: m.ray_boxes(origin, rays, lo, hi, 0.1, 20.0),
        "sphere_sweep (16 rays)": lambda m: m.sphere_sweep(origin, flat, 0.3, 20.0, lo, hi),
        "segment_first_hit": lambda m: m.segment_first_hit(origin, p1, lo, hi),
        "resolve_overlaps": overlaps,
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b), equal_nan=True))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=20)
    args = ap.parse_args(argv)
    backends = kernels.backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(backends)}")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}{'equal':>8}")
    for label, fn in cases(rng).items():
        times = {}
        results = {}
        for name, mod in backends.items():
            results[name] = fn(mod)
            times[name] = min(timeit.repeat(lambda: fn(mod), number=args.number, repeat=args.repeat)) / args.number
        row = f"{label:<24}" + "".join(f"{times[n] * 1e6:>11.1f} us" for n in backends)
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
            row += f"{str(_same(results['python'], results['cython'])):>8}"
        print(row)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
