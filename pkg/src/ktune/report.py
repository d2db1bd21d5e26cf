"""CSV reports: tuning results, per-run bests and violin-plot statistics."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .tuner import TuningResult

RESULTS_HEADER = ("step", "config", "status", "time_ms", "global", "local", "best_so_far", "verified")
RUNS_HEADER = ("run", "seed", "best_time_ms", "best_config", "unique", "failures")
DISTRIBUTION_HEADER = ("config", "time_ms")

KDE_POINTS = 256


def _num(x: float | None) -> str:
    if x is None or not math.isfinite(x):
        return ""
    return repr(float(x))


def _sizes(sizes: Sequence[int]) -> str:
    return "x".join(str(n) for n in sizes)


def _writer(handle):
    return csv.writer(handle, lineterminator="\r\n")


def results_rows(result: TuningResult) -> list[tuple[str, ...]]:
    out = []
    for row in result.rows:
        out.append(
            (
                str(row.step),
                row.config.encode(),
                row.status.value,
                _num(row.time_ms),
                _sizes(row.global_size),
                _sizes(row.local_size),
                _num(row.best_so_far),
                row.verified,
            )
        )
    return out


def write_results(result: TuningResult, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(RESULTS_HEADER)
        w.writerows(results_rows(result))


def silverman_bandwidth(values: np.ndarray) -> float:
    n = len(values)
    sd = float(np.std(values, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(values, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * n ** -0.2


def kde(values: Sequence[float], points: int = KDE_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian KDE sampled evenly over [min, max], scaled to unit trapezoid area.

    A single distinct value gets a narrow bump on a small window around it so
    the density stays well defined.
    """
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    h = silverman_bandwidth(v)
    if hi == lo or h == 0:
        h = h or max(abs(lo), 1.0) * 1e-3
        if hi == lo:
            lo, hi = lo - 4 * h, hi + 4 * h
    x = np.linspace(lo, hi, points)
    z = (x[:, None] - v[None, :]) / h
    y = np.exp(-0.5 * z * z).sum(axis=1) / (len(v) * h * math.sqrt(2 * math.pi))
    area = np.trapezoid(y, x) if hasattr(np, "trapezoid") else np.trapz(y, x)
    return x, y / area


@dataclass(frozen=True)
class ExperimentStats:
    values: tuple[float, ...]
    mean: float
    std: float
    min: float
    max: float
    density_x: tuple[float, ...]
    density_y: tuple[float, ...]

    @classmethod
    def from_values(cls, values: Iterable[float]) -> "ExperimentStats":
        vals = tuple(float(v) for v in values)
        finite = np.array([v for v in vals if math.isfinite(v)])
        if finite.size == 0:
            raise ValueError("no finite values to summarise")
        x, y = kde(finite)
        return cls(
            vals,
            float(finite.mean()),
            float(finite.std()),
            float(finite.min()),
            float(finite.max()),
            tuple(float(a) for a in x),
            tuple(float(b) for b in y),
        )

    @property
    def count(self) -> int:
        return len(self.values)

    def rows(self) -> list[tuple[str, str]]:
        out = [
            ("count", str(self.count)),
            ("finite", str(sum(math.isfinite(v) for v in self.values))),
            ("mean", repr(self.mean)),
            ("std", repr(self.std)),
            ("min", repr(self.min)),
            ("max", repr(self.max)),
        ]
        return out


def write_stats(stats: ExperimentStats, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(("statistic", "value"))
        w.writerows(stats.rows())
        w.writerow(("density_x", "density_y"))
        for x, y in zip(stats.density_x, stats.density_y):
            w.writerow((repr(x), repr(y)))


def read_stats(path) -> tuple[dict[str, float], np.ndarray, np.ndarray]:
    """Inverse of write_stats, used by tests and downstream plotting."""
    summary: dict[str, float] = {}
    xs, ys = [], []
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        next(reader)
        density = False
        for a, b in reader:
            if a == "density_x":
                density = True
            elif density:
                xs.append(float(a))
                ys.append(float(b))
            else:
                summary[a] = float(b)
    return summary, np.array(xs), np.array(ys)


@dataclass(frozen=True)
class RunSummary:
    run: int
    seed: int
    best_time: float
    best_config: str
    unique: int
    failures: int


def write_runs(runs: Sequence[RunSummary], path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(RUNS_HEADER)
        for r in runs:
            w.writerow((r.run, r.seed, _num(r.best_time), r.best_config, r.unique, r.failures))


def write_distribution(pairs: Iterable[tuple[str, float]], path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = _writer(f)
        w.writerow(DISTRIBUTION_HEADER)
        for config, t in pairs:
            w.writerow((config, _num(t)))
