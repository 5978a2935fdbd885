"""Compare the compiled and pure-Python kernel backends.

Each backend runs in its own interpreter, because the backend is fixed at
import time (``CHAMON_PURE_PYTHON=1`` forces the fallback). Usage::

    python benchmarks/bench_kernels.py                 # d = 8, p = 0.08, 20 syndromes
    python benchmarks/bench_kernels.py --d 12 --trials 10
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _median_ms(fn, items) -> float:
    times = []
    for item in items:
        t0 = time.perf_counter()
        fn(item)
        times.append(time.perf_counter() - t0)
    return float(np.median(times)) * 1e3


def measure(d: int, p: float, trials: int, seed: int) -> dict:
    """Median per-syndrome times (ms) of each kernel stage on this interpreter's backend."""
    from chamon import _kernels
    from chamon.bp import bp_decode, depolarizing_prior, tanner_graph
    from chamon.decode import _uniform_weights, belief_weights, decode
    from chamon.lattice import build_lattice
    from chamon.matchgraph import graph_set_for, match_planes
    from chamon.noise import DepolarizingChannel
    from chamon.pauli import syndrome_of

    lattice = build_lattice(d)
    graph = tanner_graph(lattice)
    gs = graph_set_for(lattice)
    channel = DepolarizingChannel(p, seed)
    syndromes = [syndrome_of(lattice, channel.sample(lattice, t)) for t in range(trials)]
    uniform = _uniform_weights(lattice)
    soft_w = [belief_weights(lattice, bp_decode(graph, s, depolarizing_prior(p), 10 * d).soft)
              for s in syndromes]

    out = {"backend": _kernels.BACKEND}
    out["bp_flood"] = _median_ms(lambda s: bp_decode(graph, s, depolarizing_prior(p), 10 * d), syndromes)
    out["match_all (hop)"] = _median_ms(lambda s: match_planes(gs, s, uniform), syndromes)
    out["match_all (soft)"] = _median_ms(lambda sw: match_planes(gs, *sw), list(zip(syndromes, soft_w)))
    for kind in ("basic", "greedy", "belief"):
        out[f"decode {kind}"] = _median_ms(
            lambda s: decode(kind, lattice, s, p, np.random.default_rng(seed)), syndromes)
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--d", type=int, default=8)
    ap.add_argument("--p", type=float, default=0.08)
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    ns = ap.parse_args()
    if ns.worker:
        print(json.dumps(measure(ns.d, ns.p, ns.trials, ns.seed)))
        return

    results = []
    for pure in ("0", "1"):
        r = subprocess.run(
            [sys.executable, __file__, "--worker", "--d", str(ns.d), "--p", str(ns.p),
             "--trials", str(ns.trials), "--seed", str(ns.seed)],
            capture_output=True, text=True, check=True, env={**os.environ, "CHAMON_PURE_PYTHON": pure},
        )
        results.append(json.loads(r.stdout))
    fast, slow = results
    if fast["backend"] == slow["backend"]:
        print("compiled extension not built; only the Python backend ran", file=sys.stderr)
    print(f"d={ns.d} p={ns.p} syndromes={ns.trials}; median ms per syndrome")
    print(f"{'stage':20s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:20s} {fast[key]:10.2f} {slow[key]:10.2f} {slow[key] / fast[key]:7.1f}x")


if __name__ == "__main__":
    main()
