"""Timing of profile, fit and kernel stages on the 150-channel wideband scenario.

Engineering targets: kernels <= 50 ms and fitting <= 20 ms single-threaded,
measured after warm-up as the best of ``--repeat`` runs.
"""

from __future__ import annotations

import argparse
import time

from pcfm import engine
from pcfm.domain import scenario_from_tree
from pcfm.polyfit import fit_spp
from pcfm.scenarios import wideband
from pcfm.spp import span_spp


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return 1e3 * min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--channels", type=int, default=150)
    parser.add_argument("--degree", type=int, default=5)
    parser.add_argument("--repeat", type=int, default=10)
    parser.add_argument("--model", default="isrs_analytic", choices=["isrs_analytic", "flat"])
    args = parser.parse_args(argv)

    sc = scenario_from_tree(wideband(n_channels=args.channels, model=args.model))
    span = sc.spans[0]
    spp = span_spp(sc, span)
    fits = fit_spp(spp, args.degree)
    engine.span_nli(sc, span, fits, spp)  # warm-up

    t_prof = best_of(lambda: span_spp(sc, span), args.repeat)
    t_fit = best_of(lambda: fit_spp(spp, args.degree), args.repeat)
    t_ker = best_of(lambda: engine.span_nli(sc, span, fits, spp), args.repeat)
    print(f"channels={args.channels} degree={args.degree}")
    print(f"profile  {t_prof:8.2f} ms")
    print(f"fit      {t_fit:8.2f} ms  (target 20 ms)  {'ok' if t_fit <= 20 else 'MISS'}")
    print(f"kernels  {t_ker:8.2f} ms  (target 50 ms)  {'ok' if t_ker <= 50 else 'MISS'}")


if __name__ == "__main__":
    main()
