"""Monte Carlo campaigns behind the acceptance criteria, cached per point.

Each ``(decoder, d, p, trials, seed)`` point is stored as a one-row CSV under
``results/points``. The acceptance tests only read the cache when it is warm
and run missing points otherwise. Fill the cache ahead of time with::

    python tests/campaigns.py            # every campaign, cheapest first
    python tests/campaigns.py C3 C4      # selected criteria
"""

from __future__ import annotations

import os
import sys
import time
from pathlib import Path

from chamon.harness import CampaignConfig, CampaignStats, emit_results, read_csv, run_campaign

ROOT = Path(__file__).resolve().parents[1]
CACHE = Path(os.environ.get("CHAMON_RESULTS", ROOT / "results")) / "points"
SEED = 20240611


def _rates(lo: float, hi: float, step: float) -> tuple[float, ...]:
    count = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + i * step, 6) for i in range(count))


# name -> list of (decoder, distances, rates, trials)
CAMPAIGNS: dict[str, list[tuple[str, tuple[int, ...], tuple[float, ...], int]]] = {
    "C5": [("basic", (8, 12, 16), (0.03,), 20_000)],
    "C2": [
        ("greedy", (8, 12, 16), _rates(0.045, 0.075, 0.005), 20_000),
        ("greedy", (12,), (0.03,), 20_000),
        ("basic", (12,), (0.03,), 20_000),
    ],
    "C1": [("basic", (8, 12, 16), _rates(0.035, 0.065, 0.005), 20_000)],
    "C4": [
        ("basic", (22,), (0.08,), 10_000),
        ("greedy", (22,), (0.08,), 10_000),
        ("belief", (22,), (0.08,), 10_000),
    ],
    "C3": [("belief", (8, 12, 16), _rates(0.09, 0.12, 0.005), 20_000)],
    # diagnostic only: where d=12 and d=16 cross for the basic decoder
    "C1X": [("basic", (8, 12, 16), (0.07, 0.075), 20_000)],
    "MONO": [
        ("basic", (8, 16), (0.05,), 20_000),
        ("greedy", (8, 16), (0.05,), 20_000),
        ("belief", (8, 16), (0.05,), 20_000),
    ],
}


def point_path(decoder: str, d: int, p: float, trials: int, seed: int = SEED) -> Path:
    return CACHE / f"{decoder}_d{d}_p{p:.4f}_n{trials}_s{seed}.csv"


def is_cached(decoder: str, d: int, p: float, trials: int, seed: int = SEED) -> bool:
    return point_path(decoder, d, p, trials, seed).exists()


def campaign_cached(name: str) -> bool:
    return all(
        is_cached(dec, d, p, n) for dec, ds, ps, n in CAMPAIGNS[name] for d in ds for p in ps
    )


def point(decoder: str, d: int, p: float, trials: int, seed: int = SEED, verbose: bool = False):
    """Statistics of one point, from the cache or freshly simulated."""
    path = point_path(decoder, d, p, trials, seed)
    if path.exists():
        return read_csv(path)
    t0 = time.perf_counter()
    stats = run_campaign(CampaignConfig(decoder, (d,), (p,), trials, seed))
    emit_results(stats, path)
    if verbose:
        s = stats.point(d, p)
        print(f"{decoder:6s} d={d:2d} p={p:.4f} N={s.n} P_fail={s.p_fail:.5f} "
              f"({time.perf_counter() - t0:.0f} s)", flush=True)
    return stats


def collect(decoder: str, ds, ps, trials: int, seed: int = SEED, verbose: bool = False) -> CampaignStats:
    """Merge the points of a ``ds x ps`` grid into one table."""
    out = CampaignStats(decoder, seed)
    for d in ds:
        for p in ps:
            out.points.update(point(decoder, d, p, trials, seed, verbose).points)
    return out


def run(names) -> None:
    for name in names:
        for decoder, ds, ps, trials in CAMPAIGNS[name]:
            collect(decoder, ds, ps, trials, verbose=True)
        print(f"{name} done", flush=True)


def curve_summary(stats: CampaignStats) -> str:
    lines = []
    for d in stats.distances():
        p, y, se = stats.curve(d)
        cells = " ".join(f"{pp:.3f}:{yy:.4f}" for pp, yy in zip(p, y))
        lines.append(f"  d={d}: {cells}")
    return "\n".join(lines)


if __name__ == "__main__":
    run(sys.argv[1:] or list(CAMPAIGNS))
