"""Command-line front end: ``ktune tune | stats | enumerate``."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import landscapes
from .errors import EmptySpaceAfterConstraints, ExplicitEnumerationTooLarge, KtuneError
from .jobfile import LoadedJob, load_job
from .report import (
    ExperimentStats,
    RunSummary,
    write_distribution,
    write_results,
    write_runs,
    write_stats,
)
from .space import MAX_ENUMERATION
from .tuner import make_request, run_tuning

log = logging.getLogger("ktune")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

PUBLISHED_SIZES = {"conv": landscapes.PUBLISHED_CONV_SIZE, "gemm": landscapes.PUBLISHED_GEMM_SIZE}


def _configure_logging():
    level = os.environ.get("KTUNE_LOG", "warn").lower()
    logging.basicConfig(
        level=LOG_LEVELS.get(level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _default_path(loaded: LoadedJob, key: str, job_path: Path, suffix: str) -> Path:
    return loaded.output_path(key, f"{job_path.stem}.{suffix}")


def _sibling(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}.{tag}{path.suffix or '.csv'}")


# --- tune ---------------------------------------------------------------------


def cmd_tune(job_path, out=None, seed=None) -> int:
    job_path = Path(job_path)
    loaded = load_job(job_path)
    result = run_tuning(loaded.job, seed=seed)
    path = Path(out) if out else _default_path(loaded, "results", job_path, "results.csv")
    write_results(result, path)
    best = result.best
    if best is None:
        print(f"best: none ({len(result.rows)} evaluated, all failed)")
    else:
        sizes = "x".join(map(str, best.global_size)), "x".join(map(str, best.local_size))
        print(
            f"best: {best.config.encode()} time_ms={best.time_ms!r} "
            f"global={sizes[0]} local={sizes[1]} step={best.step} of {len(result.rows)}"
        )
    log.info("results written to %s", path)
    return 0


# --- stats --------------------------------------------------------------------

# One loaded job per worker process, so the constrained space is enumerated once.
_WORKER_JOB: LoadedJob | None = None


def _init_worker(job_path: str):
    global _WORKER_JOB
    _WORKER_JOB = load_job(job_path)


def _one_run(loaded: LoadedJob, run: int, seed: int) -> RunSummary:
    result = run_tuning(loaded.job, seed=seed)
    best = result.best
    return RunSummary(
        run,
        seed,
        best.time_ms if best else math.inf,
        best.config.encode() if best else "",
        result.outcome.unique,
        result.outcome.failures,
    )


def _worker_run(args) -> RunSummary:
    return _one_run(_WORKER_JOB, *args)


def _full_space(loaded: LoadedJob) -> list[tuple[str, float]] | None:
    """Every valid configuration's time, when the backend is pure and the space enumerable."""
    job = loaded.job
    backend = job.backend
    space = job.constrained_space()
    if not getattr(backend, "pure", False) or not space.enumerable:
        return None
    out = []
    for config in space.enumerate_valid():
        result = backend.evaluate(make_request(job, config))
        out.append((config.encode(), result.time_ms if result.ok else math.inf))
    return out


def cmd_stats(job_path, runs: int, base_seed: int = 0, out=None, parallel: int = 1) -> int:
    if runs < 1:
        raise KtuneError(f"--runs must be at least 1, got {runs}")
    job_path = Path(job_path)
    loaded = load_job(job_path)
    path = Path(out) if out else _default_path(loaded, "stats", job_path, "stats.csv")
    tasks = [(k, base_seed + k) for k in range(runs)]

    # Fail on an empty space before spawning anything.
    space = loaded.job.constrained_space()
    if space.enumerable and space.count() == 0:
        raise EmptySpaceAfterConstraints("no configuration satisfies user and device constraints")

    if parallel > 1 and getattr(loaded.job.backend, "concurrency_safe", False):
        with ProcessPoolExecutor(parallel, initializer=_init_worker, initargs=(str(job_path),)) as pool:
            summaries = list(pool.map(_worker_run, tasks))
    else:
        if parallel > 1:
            log.warning("backend is not concurrency-safe; running serially")
        summaries = [_one_run(loaded, k, s) for k, s in tasks]

    write_runs(summaries, _sibling(path, "runs"))
    bests = [s.best_time for s in summaries]
    if not any(math.isfinite(b) for b in bests):
        print(f"stats: all {runs} runs failed; no statistics written", file=sys.stderr)
        return 1
    stats = ExperimentStats.from_values(bests)
    write_stats(stats, path)
    print(
        f"runs={runs} mean={stats.mean!r} std={stats.std!r} min={stats.min!r} max={stats.max!r}"
    )

    pairs = _full_space(loaded)
    if pairs is not None:
        write_distribution(pairs, _sibling(path, "space"))
        times = [t for _, t in pairs if math.isfinite(t)]
        if times:
            full = ExperimentStats.from_values(times)
            write_stats(full, _sibling(path, "space_stats"))
            print(f"space: {len(pairs)} configurations, mean={full.mean!r} min={full.min!r}")
    return 0


# --- enumerate ----------------------------------------------------------------


def cmd_enumerate(job_path, listing: bool = False) -> int:
    loaded = load_job(Path(job_path))
    job = loaded.job
    user = job.space
    print(f"raw: {user.raw_size}")
    if not user.enumerable:
        if listing:
            raise ExplicitEnumerationTooLarge(user.raw_size, MAX_ENUMERATION)
        print("constrained: not enumerable (raw size above the enumeration limit)")
        return 0
    constrained = job.constrained_space()
    n_user = user.count()
    n_full = constrained.count()
    print(f"user-constrained: {n_user}")
    print(f"constrained: {n_full}")
    print(f"device-rejected: {n_user - n_full}")
    if loaded.template in PUBLISHED_SIZES:
        published = PUBLISHED_SIZES[loaded.template]
        delta = (n_full - published) / published
        print(f"published: {published} (reconstruction differs by {delta:+.1%})")
    if listing:
        for config in constrained.enumerate_valid():
            print(config.encode())
    return 0


# --- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ktune", description="Kernel auto-tuning driver.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tune", help="run one tuning job and write a results CSV")
    t.add_argument("job")
    t.add_argument("--out")
    t.add_argument("--seed", type=int)

    s = sub.add_parser("stats", help="repeat a search K times and summarise best-of-run times")
    s.add_argument("job")
    s.add_argument("--runs", type=int, required=True)
    s.add_argument("--base-seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--parallel", type=int, default=1)

    e = sub.add_parser("enumerate", help="report search-space sizes")
    e.add_argument("job")
    e.add_argument("--list", action="store_true")
    return p


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "tune":
            return cmd_tune(args.job, args.out, args.seed)
        if args.command == "stats":
            return cmd_stats(args.job, args.runs, args.base_seed, args.out, args.parallel)
        return cmd_enumerate(args.job, args.list)
    except EmptySpaceAfterConstraints as e:
        print(f"ktune: empty search space: {e}", file=sys.stderr)
        return 2
    except ExplicitEnumerationTooLarge as e:
        print(f"ktune: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (KtuneError, OSError) as e:
        print(f"ktune: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
