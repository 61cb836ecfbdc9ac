"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``.  Both backends are timed on
the same inputs and their outputs are checked for agreement.
"""

import argparse
import timeit

import numpy as np

from cslbound._kernels import _pykernels

try:
    from cslbound._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def cases(scale):
    n_lay = 23
    d = 370e-9
    centers = tuple((np.arange(2 * n_lay + 1) - n_lay) * d)
    halfwidths = (0.5 * d,) * len(centers)
    weights = tuple(np.where(np.arange(len(centers)) % 2 == 0, 7170.0, 2200.0))
    q = np.linspace(1.0, 8e7, int(200_000 * scale))
    u = np.linspace(1e-3, 40.0, int(200_000 * scale))
    mu = np.arange(0, 6.0, 0.005)
    return {
        "profile_transform (47 segments)": lambda m: m.profile_transform(q, centers, halfwidths, weights, True),
        "multilayer_bracket_sq (N=23)": lambda m: m.multilayer_bracket_sq(u, n_lay, 7170.0, 2200.0),
        "fc_acceptance (1200 mu)": lambda m: m.fc_acceptance(mu, 0.95),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="problem-size multiplier")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    print(f"{'kernel':34s} " + " ".join(f"{b:>12s}" for b in backends) + "   speedup  max diff / max")
    for name, fn in cases(args.scale).items():
        times, outs = {}, {}
        for b, mod in backends.items():
            outs[b] = fn(mod)
            times[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        line = f"{name:34s} " + " ".join(f"{times[b] * 1e3:10.2f}ms" for b in backends)
        if "cython" in backends:
            a = np.concatenate([np.ravel(x) for x in outs["python"]])
            c = np.concatenate([np.ravel(x) for x in outs["cython"]])
            ok = np.isfinite(a) & np.isfinite(c)
            diff = np.max(np.abs(a[ok] - c[ok])) / np.max(np.abs(a[ok]))
            line += f"   {times['python'] / times['cython']:7.1f}x  {diff:.1e}"
        print(line)


if __name__ == "__main__":
    main()
