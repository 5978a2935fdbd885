"""Acceptance criteria, each checked at its stated tolerance.

Every test appends one ``PASS``/``FAIL`` line that the terminal summary prints
under "acceptance criteria". Monte Carlo points come from the campaign cache in
``results/points`` and are simulated on demand when missing (see
``tests/campaigns.py`` to fill the cache ahead of time).
"""

from __future__ import annotations

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from campaigns import CAMPAIGNS, collect
from chamon.harness import coarse_crossing, decode_times, estimate_threshold
from chamon.lattice import build_lattice
from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.acceptance
ROOT = Path(__file__).resolve().parents[1]


def record(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    print(ACCEPTANCE_LINES[-1])


def separated(a, b, sigmas: float = 3.0) -> bool:
    """``a`` has a lower failure rate than ``b`` by ``sigmas`` combined standard errors."""
    return b.p_fail - a.p_fail > sigmas * math.hypot(a.stderr, b.stderr)


def campaign(name: str, index: int = 0):
    decoder, ds, ps, trials = CAMPAIGNS[name][index]
    return collect(decoder, ds, ps, trials)


def threshold_line(stats, lo: float, hi: float) -> tuple[bool, str]:
    est = estimate_threshold(stats)
    if not est.found:
        ds = stats.distances()
        pairs = []
        for i, a in enumerate(ds):
            for b in ds[i + 1:]:
                x = coarse_crossing(stats, a, b)
                pairs.append(f"{a}x{b}=" + (f"{x:.4f}" if x is not None else "none in grid"))
        return False, f"no crossing of the two largest sizes in the grid (coarse pairs {', '.join(pairs)})"
    pairs = ", ".join(f"{a}x{b}={x:.4f}" for a, b, x, _ in est.crossings)
    ok = lo <= est.p_star <= hi
    return ok, (f"p* = {est.p_star:.4f} +/- {est.uncertainty:.4f} in [{lo}, {hi}] "
                f"(pairs {pairs}; fit window {est.window[0]:.4f}..{est.window[1]:.4f})")


def test_c1_basic_threshold():
    ok, detail = threshold_line(campaign("C1"), 0.04, 0.06)
    record("C1 basic threshold", ok, detail)
    assert ok, detail


def test_c2_greedy_threshold_and_low_rate_advantage():
    ok_t, detail = threshold_line(campaign("C2", 0), 0.05, 0.07)
    greedy = campaign("C2", 1).point(12, 0.03)
    basic = campaign("C2", 2).point(12, 0.03)
    ok_low = separated(greedy, basic)
    margin = (basic.p_fail - greedy.p_fail) / math.hypot(basic.stderr, greedy.stderr)
    ok = ok_t and ok_low
    record("C2 greedy threshold", ok,
           f"{detail}; d=12 p=0.03 greedy {greedy.p_fail:.5f} vs basic {basic.p_fail:.5f} "
           f"({margin:+.1f} sigma)")
    assert ok


def test_c3_belief_threshold():
    ok, detail = threshold_line(campaign("C3"), 0.095, 0.115)
    record("C3 belief threshold", ok, detail)
    assert ok, detail


def test_c4_decoder_ordering_at_d22():
    basic, greedy, belief = (campaign("C4", i).point(22, 0.08) for i in range(3))
    ok = (separated(belief, greedy) and separated(belief, basic) and greedy.p_fail < 1.0
          and 1.0 - greedy.p_fail > 3 * greedy.stderr)
    detail = (f"P_fail belief {belief.p_fail:.4f}, greedy {greedy.p_fail:.4f}, "
              f"basic {basic.p_fail:.4f} (N={belief.n})")
    record("C4 ordering d=22 p=0.08", ok, detail)
    assert ok, detail


def test_c5_suppression_below_threshold():
    stats = campaign("C5")
    pts = [stats.point(d, 0.03) for d in (8, 12, 16)]
    ok = all(a.p_fail > b.p_fail for a, b in zip(pts, pts[1:])) and separated(pts[2], pts[0])
    detail = ", ".join(f"d={s.d}: {s.p_fail:.5f} +/- {s.stderr:.5f}" for s in pts)
    record("C5 basic suppression p=0.03", ok, detail)
    assert ok, detail


def test_c6_fast_property_suite():
    t0 = time.perf_counter()
    r = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-m", "c6", "-p", "no:cacheprovider", str(ROOT / "tests")],
        capture_output=True, text=True, cwd=ROOT,
    )
    elapsed = time.perf_counter() - t0
    summary = r.stdout.strip().splitlines()[-1] if r.stdout.strip() else r.stderr[-200:]
    ok = r.returncode == 0 and elapsed < 60.0
    record("C6 property suite", ok, f"{summary}; {elapsed:.1f} s (limit 60 s)")
    assert ok, r.stdout[-2000:]


def test_c7_belief_decode_time_scaling():
    ds = (8, 12, 16, 22)
    p, trials = 0.08, 25
    n = np.array([build_lattice(d).n for d in ds], dtype=float)
    med = np.array([np.median(decode_times("belief", d, p, trials, seed=7)) for d in ds])
    # upper bound: n^(7/3) anchored at the smallest size, with the factor-3 slack
    bound = 3.0 * med[0] * (n / n[0]) ** (7 / 3)
    ok = bool(np.all(med <= bound))
    slope = float(np.polyfit(np.log(n), np.log(med), 1)[0])
    cells = ", ".join(f"d={d}: {m * 1e3:.1f} ms" for d, m in zip(ds, med))
    record("C7 belief time scaling", ok,
           f"{cells}; fitted exponent {slope:.2f} (bound 7/3 = 2.33, factor 3)")
    assert ok
