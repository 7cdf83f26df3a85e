"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Prints one row per kernel with the best-of-N wall time for each backend.
"""
import argparse
import timeit

import numpy as np

from coverlens import _kernels_py
from coverlens.audio_io import _polyphase_table
from coverlens.dsp_core import window_values

try:
    from coverlens import _kernels
except ImportError:
    _kernels = None


def cases(rng):
    x = rng.normal(size=22050 * 30)
    win = np.array(window_values("hann", 2048))
    table = _polyphase_table(147, 160)  # 48 kHz -> 44.1 kHz
    n_res = len(x) * 147 // 160
    Z = rng.normal(size=(280, 26))
    y = rng.uniform(0, 100, 280)
    order = rng.permutation(280).astype(np.intp)
    active = np.ones(26, np.uint8)
    return {
        "power_spectrum_frames (30 s, F=2048)": lambda k: k.power_spectrum_frames(x, win, 2048, 512),
        "resample_poly (30 s, 160->147)": lambda k: k.resample_poly(x, table, 147, 160, n_res),
        "sgd_epoch (280 x 26, batch 1)": lambda k: k.sgd_epoch(Z, y, order, np.zeros(26), 50.0, 0.01, 1e-4, 1, active),
        "sgd_epoch (280 x 26, batch 32)": lambda k: k.sgd_epoch(Z, y, order, np.zeros(26), 50.0, 0.01, 1e-4, 32, active),
        "zero_crossings (30 s)": lambda k: k.zero_crossings(x),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = {"numpy": _kernels_py}
    if _kernels is not None:
        backends["cython"] = _kernels
    else:
        print("compiled kernels not built; timing the numpy fallback only")
    print(f"{'kernel':40s}" + "".join(f"{b:>12s}" for b in backends) + ("   speedup" if len(backends) == 2 else ""))
    for name, fn in cases(rng).items():
        times = [min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for k in backends.values()]
        row = f"{name:40s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            row += f"   {times[0] / times[1]:6.1f}x"
        print(row)


if __name__ == "__main__":
    main()
