"""Command line interface: ``chamon simulate | threshold | logicals | selftest``."""

from __future__ import annotations

import argparse
import math
import sys
import time
from pathlib import Path

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_SELFTEST = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_p(values: list[str]) -> list[float]:
    """Rates from a list of numbers or ``start:stop:step`` ranges (stop inclusive)."""
    out: list[float] = []
    for v in values:
        for part in v.split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                fields = part.split(":")
                if len(fields) != 3:
                    raise UsageError(f"range must be start:stop:step, got {part!r}")
                start, stop, step = map(float, fields)
                if step <= 0:
                    raise UsageError("range step must be positive")
                count = int(math.floor((stop - start) / step + 1e-9)) + 1
                out.extend(round(start + i * step, 12) for i in range(count))
            else:
                out.append(float(part))
    return out


def parse_ints(values: list[str]) -> list[int]:
    return [int(x) for v in values for x in v.split(",") if x.strip()]


def read_config(path: str) -> list[str]:
    """Turn ``key = value`` lines into ``--key value`` arguments.

    Blank lines and ``#`` comments are ignored. List values may be separated by
    commas or spaces.
    """
    args: list[str] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line is not key = value: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        args.append("--" + key.replace("_", "-"))
        args.extend(value.split())
    return args


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chamon", description="Decoders and threshold simulations for the Chamon code.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a Monte Carlo campaign")
    sim.add_argument("--config", help="key = value file supplying any flag; flags override it")
    sim.add_argument("--decoder", choices=("basic", "greedy", "belief"), default="basic")
    sim.add_argument("--d", nargs="+", default=["8"], help="lattice sizes, e.g. 8 12 16 or 8,12")
    sim.add_argument("--p", nargs="+", default=["0.05"], help="rates, or start:stop:step")
    sim.add_argument("--trials", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", default=None, help="output file (.csv or .json)")
    sim.add_argument("--format", choices=("csv", "json"), default=None)
    sim.add_argument("--plot-data", action="store_true", help="also write a .dat curve file")
    sim.add_argument("--no-timing", action="store_true", help="omit wall times for byte-stable output")
    sim.add_argument("--quiet", action="store_true")

    thr = sub.add_parser("threshold", help="estimate the threshold from an emitted CSV")
    thr.add_argument("csv")
    thr.add_argument("--window", nargs=2, type=float, metavar=("P_LO", "P_HI"), default=None)
    thr.add_argument("--d", nargs="+", default=None, help="distances to use (default all)")

    lg = sub.add_parser("logicals", help="derive and cache the logical basis of a lattice")
    lg.add_argument("--d", type=int, required=True)
    lg.add_argument("--cache-dir", default=None)
    lg.add_argument("--force", action="store_true", help="recompute even if cached")

    st = sub.add_parser("selftest", help="run the property test suite")
    st.add_argument("pytest_args", nargs=argparse.REMAINDER,
                    help="tests or pytest options to run instead of the default suite")
    return parser


def _with_config(argv: list[str]) -> list[str]:
    """Splice config-file arguments in front of the command line flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise UsageError("--config needs a path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    cmd, flags = rest[0], rest[1:]
    return [cmd, *read_config(path), *flags]


def _simulate(ns) -> int:
    from chamon.harness import CampaignConfig, emit_results, run_campaign

    try:
        config = CampaignConfig(
            decoder=ns.decoder,
            d_list=tuple(parse_ints(ns.d)),
            p_list=tuple(parse_p(ns.p)),
            trials=ns.trials,
            seed=ns.seed,
            workers=ns.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if ns.out:
        out = Path(ns.out)
        if out.parent and not out.parent.exists():
            try:
                out.parent.mkdir(parents=True)
            except OSError as exc:
                print(f"error: cannot create {out.parent}: {exc}", file=sys.stderr)
                return EXIT_IO
    t0 = time.perf_counter()

    def progress(chunk):
        if not ns.quiet:
            print(f"  d={chunk.d} p={chunk.p:g} +{chunk.n} trials", file=sys.stderr)

    stats = run_campaign(config, progress=progress)
    if ns.out:
        try:
            emit_results(stats, ns.out, ns.format, timing=not ns.no_timing, plot=ns.plot_data)
        except OSError as exc:
            print(f"error: cannot write {ns.out}: {exc}", file=sys.stderr)
            return EXIT_IO
    for s in stats.rows():
        print(f"d={s.d:3d} p={s.p:.4f} N={s.n} failures={s.failures} "
              f"P_fail={s.p_fail:.5f} +/- {s.stderr:.5f}")
    if not ns.quiet:
        print(f"done in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return EXIT_OK


def _threshold(ns) -> int:
    from chamon.harness import estimate_threshold, read_csv

    try:
        stats = read_csv(Path(ns.csv))
    except OSError as exc:
        print(f"error: cannot read {ns.csv}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{ns.csv} is not a campaign table: {exc}") from exc
    distances = parse_ints(ns.d) if ns.d else None
    try:
        est = estimate_threshold(stats, distances, window=ns.window)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if not est.found:
        print(f"no crossing in window ({est.window[0]:.4f}, {est.window[1]:.4f})")
        return EXIT_OK
    for da, db, x, sx in est.crossings:
        print(f"  d={da} x d={db}: {x:.4f} +/- {sx:.4f}")
    print(f"threshold p* = {est.p_star:.4f} +/- {est.uncertainty:.4f} "
          f"(window {est.window[0]:.4f}..{est.window[1]:.4f})")
    return EXIT_OK


def _logicals(ns) -> int:
    from chamon.lattice import LatticeError, build_lattice
    from chamon.pauli import cache_path, derive_logicals, logical_basis, save_logicals

    try:
        lattice = build_lattice(ns.d)
    except LatticeError as exc:
        raise UsageError(str(exc)) from exc
    t0 = time.perf_counter()
    path = cache_path(ns.d, ns.cache_dir)
    try:
        if ns.force:
            basis = derive_logicals(lattice)
            save_logicals(basis, path)
        else:
            basis = logical_basis(lattice, cache_dir=ns.cache_dir)
    except OSError as exc:
        print(f"error: cannot write logical cache: {exc}", file=sys.stderr)
        return EXIT_IO
    if not path.exists():
        print(f"error: cannot write logical cache {path}", file=sys.stderr)
        return EXIT_IO
    print(f"d={ns.d} n={lattice.n} k={basis.k} cache={path} ({time.perf_counter() - t0:.2f} s)")
    return EXIT_OK


def _selftest(ns) -> int:
    try:
        import pytest
    except ImportError:
        print("error: selftest needs pytest", file=sys.stderr)
        return EXIT_SELFTEST
    if ns.pytest_args:
        args = ["-q", *ns.pytest_args]
    else:
        tests = Path(__file__).resolve().parents[2] / "tests"
        if not tests.is_dir():
            print("error: the test suite is not installed next to the package", file=sys.stderr)
            return EXIT_SELFTEST
        args = [str(tests), "-q", "-m", "not slow", "--ignore-glob=*acceptance*"]
    code = pytest.main(args)
    return EXIT_OK if code == 0 else EXIT_SELFTEST


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _with_config(argv)
        ns = build_parser().parse_args(argv)
        handler = {"simulate": _simulate, "threshold": _threshold,
                   "logicals": _logicals, "selftest": _selftest}[ns.command]
        return handler(ns)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
