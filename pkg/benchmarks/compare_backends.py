"""Time the compiled and numpy raster kernels on the same building scenes.

    python3 benchmarks/compare_backends.py --scenes 10 --size 500
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from synthbuild.config import DatasetConfig
from synthbuild.detailing import place_modules
from synthbuild.geometry import bounding_sphere
from synthbuild.massing import TypologyClass, build_massing, massing_to_mesh
from synthbuild.render import BACKENDS
from synthbuild.render.raster import screen_triangles
from synthbuild.rng import stream
from synthbuild.scene import sample_camera


def scenes(n: int, size: int, seed: int):
    cfg = DatasetConfig(samples=n, seed=seed, image_size=size)
    for i in range(n):
        cls = TypologyClass(i % 5 + 1)
        m = build_massing(cfg, cls, stream(seed + i, "massing"))
        mesh = place_modules(m, massing_to_mesh(m, 2), None, 2, stream(seed + i, "detailing"))
        cam = sample_camera(bounding_sphere(mesh), cfg.camera, stream(seed + i, "view"), size)
        yield screen_triangles(mesh, cam)[:3]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenes", type=int, default=10)
    ap.add_argument("--size", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = list(scenes(args.scenes, args.size, args.seed))
    tris = sum(len(xs) for xs, _, _ in data)
    print(f"{args.scenes} scenes, {tris} screen triangles, {args.size}x{args.size}")
    results = {}
    for name, kernel in sorted(BACKENDS.items()):
        best = float("inf")
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            out = [kernel(xs, ys, iz, args.size) for xs, ys, iz in data]
            best = min(best, time.perf_counter() - t0)
        results[name] = (best, out)
        print(f"{name:>8}: {best * 1e3 / args.scenes:8.2f} ms/scene")
    if len(results) > 1:
        (_, a), (_, b) = results["cython"], results["numpy"]
        same = all(np.array_equal(za, zb) and np.array_equal(ta, tb) for (za, ta), (zb, tb) in zip(a, b))
        print(f"speedup cython/numpy: {results['numpy'][0] / results['cython'][0]:.1f}x, "
              f"bit-identical: {same}")
    else:
        print("compiled kernel not built; only the numpy backend is available")


if __name__ == "__main__":
    main()
