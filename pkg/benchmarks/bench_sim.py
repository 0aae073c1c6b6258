#!/usr/bin/env python3
"""Benchmark the compiled simulation core against the pure-Python fallback.

Both engines must produce identical outputs; this script asserts that first
and then reports throughput.  Usage:

    python benchmarks/bench_sim.py [--slots N] [--links N]
"""

import argparse
import time

from hopbound.sim import _pycore, available_backends


def _run(engine, mode: str, slots: int, links: int):
    gbars = [3.1622776601683795, 10.0, 31.6, 5.0, 18.0][:links]
    if mode == "fluid":
        return engine.run_fluid(1234, gbars, 28.853900817779268, 20.0, 1,
                                slots, 1000, 280, 5e7)
    superframes = slots // links
    return engine.run_whart(1234, gbars, 1016, 80.0, superframes, 400, 280, 5e7)


def bench(mode: str, slots: int, links: int) -> None:
    engines = {"python": _pycore}
    if "cython" in available_backends():
        from hopbound.sim import _core

        engines["cython"] = _core

    results = {}
    timings = {}
    for name, engine in engines.items():
        t0 = time.perf_counter()
        results[name] = _run(engine, mode, slots, links)
        timings[name] = time.perf_counter() - t0

    if len(results) == 2:
        assert results["python"] == results["cython"], \
            f"{mode}: backend outputs differ; engines are out of sync"

    print(f"\n{mode} ({links} links, {slots:,} slots):")
    base = timings["python"]
    for name, dt in sorted(timings.items()):
        rate = slots / dt
        speedup = base / dt
        print(f"  {name:7s} {dt:8.3f} s   {rate:12,.0f} slots/s   {speedup:6.1f}x")
    if len(results) == 2:
        print("  outputs: identical")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--slots", type=int, default=1_000_000)
    ap.add_argument("--links", type=int, default=3)
    args = ap.parse_args()
    print(f"available backends: {', '.join(available_backends())}")
    bench("fluid", args.slots, args.links)
    bench("whart", args.slots, args.links)


if __name__ == "__main__":
    main()
