"""Monte Carlo campaigns, failure statistics and threshold estimation."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from chamon.decode import CORRECTED, DECODERS, decode
from chamon.lattice import ChamonLattice, build_lattice
from chamon.noise import STREAM_DECODER, DepolarizingChannel, rate_key, trial_rng
from chamon.pauli import is_logical_failure, logical_basis, syndrome_of

CSV_COLUMNS = ("d", "p", "N", "failures", "P_fail", "stderr", "decoder", "seed", "wall_time_s")


def stderr_of(p_fail: float, n: int) -> float:
    """Binomial standard error ``sqrt((P - P^2) / N)``."""
    return math.sqrt(max(p_fail - p_fail * p_fail, 0.0) / n)


@dataclass(frozen=True)
class CampaignConfig:
    """What to simulate.

    Attributes:
        decoder: One of ``basic``, ``greedy``, ``belief``.
        d_list: Even lattice sizes.
        p_list: Physical error rates in ``[0, 1]``.
        trials: Trials per ``(d, p)`` point.
        seed: Base seed; every trial derives its own stream from it.
        out: Optional output path written by :func:`emit_results`.
        workers: Worker processes; results never depend on this.
        chunk: Trials per work item.
    """

    decoder: str
    d_list: tuple[int, ...]
    p_list: tuple[float, ...]
    trials: int
    seed: int = 0
    out: str | None = None
    workers: int = 1
    chunk: int = 200

    def __post_init__(self):
        object.__setattr__(self, "d_list", tuple(int(d) for d in self.d_list))
        object.__setattr__(self, "p_list", tuple(float(p) for p in self.p_list))
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}; expected one of {DECODERS}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.d_list or any(d < 4 or d % 2 for d in self.d_list):
            raise ValueError(f"lattice sizes must be even and at least 4, got {self.d_list}")
        if not self.p_list or any(not 0.0 <= p <= 1.0 for p in self.p_list):
            raise ValueError(f"error rates must lie in [0, 1], got {self.p_list}")
        if self.workers < 1 or self.chunk < 1:
            raise ValueError("workers and chunk must be positive")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class TrialRecord:
    d: int
    p: float
    trial: int
    status: str
    failure: bool
    t_match_ns: int = 0
    t_sweep_ns: int = 0
    t_decode_ns: int = 0


@dataclass
class PointStats:
    """Aggregated outcome of one ``(d, p)`` point."""

    d: int
    p: float
    n: int = 0
    failures: int = 0
    wall_time_s: float = 0.0
    statuses: dict[str, int] = field(default_factory=dict)

    @property
    def p_fail(self) -> float:
        return self.failures / self.n if self.n else 0.0

    @property
    def stderr(self) -> float:
        return stderr_of(self.p_fail, self.n) if self.n else 0.0

    def merge(self, other: PointStats) -> None:
        self.n += other.n
        self.failures += other.failures
        self.wall_time_s += other.wall_time_s
        for k, v in other.statuses.items():
            self.statuses[k] = self.statuses.get(k, 0) + v


@dataclass
class CampaignStats:
    decoder: str
    seed: int
    points: dict[tuple[int, float], PointStats] = field(default_factory=dict)

    def point(self, d: int, p: float) -> PointStats:
        return self.points[(int(d), float(p))]

    def rows(self) -> list[PointStats]:
        return [self.points[k] for k in sorted(self.points)]

    def distances(self) -> list[int]:
        return sorted({d for d, _ in self.points})

    def curve(self, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(p, P_fail, stderr)`` arrays of one distance, sorted by ``p``."""
        pts = [s for (dd, _), s in sorted(self.points.items()) if dd == d]
        return (
            np.array([s.p for s in pts]),
            np.array([s.p_fail for s in pts]),
            np.array([s.stderr for s in pts]),
        )


# ---------------------------------------------------------------------------
# Trials

_CONTEXT: dict[int, tuple[ChamonLattice, object]] = {}


def _context(d: int):
    if d not in _CONTEXT:
        lattice = build_lattice(d)
        _CONTEXT[d] = (lattice, logical_basis(lattice))
    return _CONTEXT[d]


def run_trial(decoder: str, d: int, p: float, seed: int, trial: int) -> TrialRecord:
    """Sample, decode and classify one trial; a pure function of its arguments."""
    lattice, basis = _context(d)
    key = (d, rate_key(p))
    error = DepolarizingChannel(p, seed).sample(lattice, trial, *key)
    syndrome = syndrome_of(lattice, error)
    rng = trial_rng(seed, *key, trial, STREAM_DECODER)
    t0 = time.perf_counter_ns()
    outcome = decode(decoder, lattice, syndrome, p, rng)
    t1 = time.perf_counter_ns()
    residual = outcome.correction * error
    if outcome.status == CORRECTED:
        failure = is_logical_failure(basis, residual, lattice)
    else:
        failure = True
    diag = outcome.diagnostics
    return TrialRecord(
        d, p, trial, outcome.status, bool(failure),
        int(diag.get("t_match_ns", 0)), int(diag.get("t_sweep_ns", 0)), t1 - t0,
    )


def _run_chunk(args) -> PointStats:
    decoder, d, p, seed, lo, hi = args
    t0 = time.perf_counter()
    stats = PointStats(d, p)
    for trial in range(lo, hi):
        rec = run_trial(decoder, d, p, seed, trial)
        stats.n += 1
        stats.failures += rec.failure
        stats.statuses[rec.status] = stats.statuses.get(rec.status, 0) + 1
    stats.wall_time_s = time.perf_counter() - t0
    return stats


def _work_items(config: CampaignConfig):
    for d in config.d_list:
        for p in config.p_list:
            for lo in range(0, config.trials, config.chunk):
                yield (config.decoder, d, p, config.seed, lo, min(lo + config.chunk, config.trials))


def run_campaign(config: CampaignConfig, progress=None) -> CampaignStats:
    """Run every ``(d, p)`` point of ``config``.

    Each trial draws from streams keyed by ``(seed, d, p, trial)`` and the
    aggregation only sums counts, so the result does not depend on
    ``config.workers`` or on scheduling order. ``progress`` is called with
    each finished chunk.
    """
    stats = CampaignStats(config.decoder, config.seed)
    for d in config.d_list:
        for p in config.p_list:
            stats.points[(d, p)] = PointStats(d, p)
    items = list(_work_items(config))
    if config.workers == 1:
        results = map(_run_chunk, items)
        _collect(stats, results, progress)
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            _collect(stats, pool.map(_run_chunk, items), progress)
    if config.out:
        emit_results(stats, config.out)
    return stats


def _collect(stats: CampaignStats, results, progress) -> None:
    for chunk in results:
        stats.points[(chunk.d, chunk.p)].merge(chunk)
        if progress is not None:
            progress(chunk)


def decode_times(decoder: str, d: int, p: float, trials: int, seed: int = 0) -> np.ndarray:
    """Per-trial decode wall times in seconds (warm lattice caches)."""
    _context(d)
    return np.array([run_trial(decoder, d, p, seed, t).t_decode_ns for t in range(trials)]) * 1e-9


# ---------------------------------------------------------------------------
# Output

def _row(stats: CampaignStats, s: PointStats, timing: bool) -> dict:
    return {
        "d": s.d,
        "p": repr(s.p),
        "N": s.n,
        "failures": s.failures,
        "P_fail": repr(s.p_fail),
        "stderr": repr(s.stderr),
        "decoder": stats.decoder,
        "seed": stats.seed,
        "wall_time_s": f"{s.wall_time_s:.3f}" if timing else "",
    }


def to_csv(stats: CampaignStats, timing: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for s in stats.rows():
        writer.writerow(_row(stats, s, timing))
    return buf.getvalue()


def to_json(stats: CampaignStats, timing: bool = True) -> str:
    rows = []
    for s in stats.rows():
        row = _row(stats, s, timing)
        row.update(p=s.p, P_fail=s.p_fail, stderr=s.stderr,
                   wall_time_s=round(s.wall_time_s, 3) if timing else None)
        rows.append(row)
    return json.dumps({"columns": list(CSV_COLUMNS), "rows": rows}, indent=1) + "\n"


def plot_data(stats: CampaignStats) -> str:
    """Whitespace-separated blocks, one per distance: ``p P_fail stderr``."""
    lines = []
    for d in stats.distances():
        lines.append(f"# decoder={stats.decoder} d={d}")
        for p, pf, se in zip(*stats.curve(d)):
            lines.append(f"{p!r} {pf!r} {se!r}")
        lines.append("")
    return "\n".join(lines)


def emit_results(stats: CampaignStats, path: str | Path, fmt: str | None = None,
                 timing: bool = True, plot: bool = False) -> list[Path]:
    """Write the campaign table; the format follows ``fmt`` or the file suffix.

    With ``plot`` a ``.dat`` file of per-distance curves is written alongside.
    ``timing=False`` leaves the wall-time column empty so that reruns are
    byte-identical.

    Raises:
        OSError: If the file cannot be written.
    """
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    text = to_csv(stats, timing) if fmt == "csv" else to_json(stats, timing)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    written = [path]
    if plot:
        dat = path.with_suffix(".dat")
        dat.write_text(plot_data(stats))
        written.append(dat)
    return written


def read_csv(path_or_text: str | Path) -> CampaignStats:
    """Parse a table written by :func:`emit_results` back into statistics."""
    text = str(path_or_text)
    if "\n" not in text:
        text = Path(path_or_text).read_text()
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected columns {reader.fieldnames}")
    stats = None
    for row in reader:
        if stats is None:
            stats = CampaignStats(row["decoder"], int(row["seed"]))
        d, p = int(row["d"]), float(row["p"])
        wall = float(row["wall_time_s"]) if row["wall_time_s"] else 0.0
        stats.points[(d, p)] = PointStats(d, p, int(row["N"]), int(row["failures"]), wall)
    return stats if stats is not None else CampaignStats("", 0)


# ---------------------------------------------------------------------------
# Threshold

@dataclass(frozen=True)
class ThresholdEstimate:
    """Crossing of the per-distance linear fits.

    ``p_star`` and ``uncertainty`` are ``nan`` when no pair crosses inside the
    window; ``crossings`` lists the individual pairwise estimates.
    """

    p_star: float
    uncertainty: float
    window: tuple[float, float]
    crossings: tuple[tuple[int, int, float, float], ...]
    message: str = ""

    @property
    def found(self) -> bool:
        return not math.isnan(self.p_star)


def _linear_fit(p, y, se):
    """Weighted least squares ``y = a + b p``; returns ``(coef, cov)``."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.stack([np.ones_like(p), p], axis=1)
    # binomial errors vanish at P=0 or 1; floor them so those points keep finite weight
    floor = max(np.max(se) if len(se) else 0.0, 1e-9) * 0.1
    sig = np.maximum(np.asarray(se, dtype=float), floor)
    W = 1.0 / sig**2
    AtW = A.T * W
    cov = np.linalg.inv(AtW @ A)
    coef = cov @ (AtW @ y)
    return coef, cov


def coarse_crossing(stats: CampaignStats, d_small: int, d_large: int) -> float | None:
    """First ``p`` where the larger distance stops doing better, by linear interpolation."""
    p1, y1, _ = stats.curve(d_small)
    p2, y2, _ = stats.curve(d_large)
    common = np.intersect1d(p1, p2)
    if common.size < 2:
        return None
    diff = np.array([y2[p2 == p][0] - y1[p1 == p][0] for p in common])
    for i in range(common.size - 1):
        if diff[i] < 0 <= diff[i + 1] or diff[i] <= 0 < diff[i + 1]:
            t = -diff[i] / (diff[i + 1] - diff[i])
            return float(common[i] + t * (common[i + 1] - common[i]))
    return None


def estimate_threshold(stats: CampaignStats, distances=None, window=None,
                       rel_window: float = 0.2) -> ThresholdEstimate:
    """Threshold from pairwise crossings of per-distance linear fits.

    Args:
        stats: Campaign results.
        distances: Distances to use (default: all, at least two).
        window: ``(p_lo, p_hi)`` fit range. Defaults to ``rel_window`` either
            side of the coarse crossing of the two largest distances.
        rel_window: Relative half-width of the default window.

    Returns:
        The averaged crossing and its uncertainty propagated from the fit
        covariances, or a "no crossing in window" estimate. Distances with
        fewer than two rates inside the window are left out.
    """
    ds = sorted(distances or stats.distances())
    if len(ds) < 2:
        raise ValueError("at least two distances are needed")
    if window is None:
        pc = coarse_crossing(stats, ds[-2], ds[-1])
        if pc is None:
            return ThresholdEstimate(math.nan, math.nan, (math.nan, math.nan), (), "no crossing in window")
        window = (pc * (1 - rel_window), pc * (1 + rel_window))
    lo, hi = float(window[0]), float(window[1])
    fits = {}
    for d in ds:
        p, y, se = stats.curve(d)
        sel = (p >= lo - 1e-12) & (p <= hi + 1e-12)
        if sel.sum() >= 2:
            fits[d] = _linear_fit(p[sel], y[sel], se[sel])
    crossings = []
    fitted = [d for d in ds if d in fits]
    for i, da in enumerate(fitted):
        for db in fitted[i + 1:]:
            (a1, b1), c1 = fits[da]
            (a2, b2), c2 = fits[db]
            db_ = b2 - b1
            if db_ == 0:
                continue
            x = (a1 - a2) / db_
            if not lo <= x <= hi:
                continue
            # gradient of x = (a1 - a2) / (b2 - b1) with respect to (a1, b1, a2, b2)
            g1 = np.array([1.0 / db_, x / db_])
            g2 = np.array([-1.0 / db_, -x / db_])
            var = g1 @ c1 @ g1 + g2 @ c2 @ g2
            crossings.append((da, db, float(x), float(math.sqrt(max(var, 0.0)))))
    if not crossings:
        return ThresholdEstimate(math.nan, math.nan, (lo, hi), (), "no crossing in window")
    xs = np.array([c[2] for c in crossings])
    sig = np.array([c[3] for c in crossings])
    p_star = float(xs.mean())
    # pairwise estimates share data, so combine their errors conservatively
    unc = float(max(sig.mean(), xs.std()))
    return ThresholdEstimate(p_star, unc, (lo, hi), tuple(crossings))


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)


def config_dict(config: CampaignConfig) -> dict:
    return asdict(config)
