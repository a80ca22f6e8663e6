"""Time the numba kernels against the pure-numpy fallback.

The backend is fixed when ``aeromap`` is imported, so each backend runs in
its own interpreter (``AEROMAP_NUMBA=1`` and ``AEROMAP_NUMBA=0``). Every
workload is called once untimed first, so numba compilation is excluded and
reported separately.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _workloads():
    import numpy as np

    from aeromap.datamodel import GridSpec, QaRaster, Raster
    from aeromap.geostat import empirical_variogram
    from aeromap.models import fit_forest, fit_gbt

    rng = np.random.default_rng(0)
    X = rng.random((4000, 12))
    y = 4 * X[:, 0] + np.sin(6 * X[:, 1]) + X[:, 2] * X[:, 3] + 0.1 * rng.standard_normal(4000)
    feats = tuple(f"x{i}" for i in range(12))
    forest = fit_forest(X, y, feats, "RandomForest", 20, 10, 0.5, seed=1)
    Xq = rng.random((50000, 12))

    spec = GridSpec(300, 300, 35.8, 51.2, 0.01)
    aod = rng.random(spec.shape)
    aod[rng.random(spec.shape) < 0.35] = np.nan
    qa = QaRaster(spec, rng.integers(0, 4, spec.shape), rng.integers(0, 3, spec.shape),
                  rng.integers(0, 4, spec.shape))
    from aeromap.preprocess import extract_windows

    pts = np.column_stack([35.6 + 0.3 * rng.random(3000), 51.2 + 0.3 * rng.random(3000),
                           rng.standard_normal(3000)])
    return {
        "random_forest_fit (4000x12, 20 trees)":
            lambda: fit_forest(X, y, feats, "RandomForest", 20, 10, 0.5, seed=1),
        "extra_trees_fit (4000x12, 20 trees)":
            lambda: fit_forest(X, y, feats, "ExtraTrees", 20, 10, 0.8, seed=1),
        "gradient_boosting_fit (4000x12, 50 stages)":
            lambda: fit_gbt(X, y, feats, 50, 0.3, 6, seed=2),
        "forest_predict (50000 rows)": lambda: forest.predict_matrix(Xq),
        "window_extraction (300x300, 3x3)": lambda: extract_windows(Raster(spec, aod), qa, 3),
        "variogram_binning (3000 points)": lambda: empirical_variogram(pts, n_bins=15),
    }


def _worker(repeat: int) -> dict:
    from aeromap import _accel

    out = {"numba": _accel.USE_NUMBA, "results": {}}
    for name, fn in _workloads().items():
        t0 = time.perf_counter()
        fn()
        first = time.perf_counter() - t0
        times = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        out["results"][name] = {"first_call_s": first, "best_s": min(times)}
    return out


def _run_backend(flag: str, repeat: int) -> dict:
    env = dict(os.environ, AEROMAP_NUMBA=flag)
    res = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3, help="timed repetitions per workload")
    p.add_argument("--json", help="also write the results to this file")
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.worker:
        json.dump(_worker(args.repeat), sys.stdout)
        return 0

    nb = _run_backend("1", args.repeat)
    npy = _run_backend("0", args.repeat)
    if not nb["numba"]:
        print("numba is not installed; only the numpy backend was timed", file=sys.stderr)
    width = max(len(k) for k in npy["results"])
    print(f"{'workload':{width}}  {'numpy s':>9}  {'numba s':>9}  {'speedup':>8}  {'jit s':>7}")
    for name, r in npy["results"].items():
        b = nb["results"][name]
        compile_s = max(b["first_call_s"] - b["best_s"], 0.0)
        print(f"{name:{width}}  {r['best_s']:9.4f}  {b['best_s']:9.4f}  "
              f"{r['best_s'] / b['best_s']:7.1f}x  {compile_s:7.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": nb, "numpy": npy}, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
