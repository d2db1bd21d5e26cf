import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ktune.report import RESULTS_HEADER, ExperimentStats, kde, read_stats, write_results, write_stats
from ktune.search import StrategySpec
from ktune.backend import SyntheticBackend
from ktune.kernel import DeviceModel
from ktune.tuner import TuningJob, run_tuning

from conftest import copy_kernel, copy_space
from oracles import gaussian, silverman, trapezoid


def test_results_csv_layout(tmp_path):
    result = run_tuning(TuningJob(copy_kernel(), copy_space(), DeviceModel("d"), SyntheticBackend(), StrategySpec("full")))
    path = tmp_path / "r.csv"
    write_results(result, path)
    raw = path.read_bytes()
    assert raw.count(b"\r\n") == 4
    rows = list(csv.reader(raw.decode("utf-8").splitlines()))
    assert tuple(rows[0]) == RESULTS_HEADER == (
        "step", "config", "status", "time_ms", "global", "local", "best_so_far", "verified",
    )
    assert [r[1] for r in rows[1:]] == ["WPT=1", "WPT=2", "WPT=4"]
    assert [r[4] for r in rows[1:]] == ["2048", "1024", "512"]
    assert all(r[7] == "n/a" for r in rows[1:])
    assert float(rows[2][3]) == result.rows[1].time_ms


def test_kde_matches_independent_sum():
    vals = [1.0, 1.5, 1.7, 3.0, 3.2]
    x, y = kde(vals)
    h = silverman(vals)
    raw = np.array([sum(gaussian(xi, v, h) for v in vals) / len(vals) for xi in x])
    area = trapezoid(raw, x)
    assert np.allclose(y, raw / area, rtol=1e-9)
    assert x[0] == 1.0 and x[-1] == 3.2 and len(x) == 256


def test_single_run_is_degenerate():
    s = ExperimentStats.from_values([2.5])
    assert s.mean == s.min == s.max == 2.5 and s.std == 0
    assert abs(trapezoid(s.density_y, s.density_x) - 1) < 1e-3


def test_failed_runs_are_counted_but_not_summarised():
    s = ExperimentStats.from_values([1.0, math.inf, 3.0])
    assert s.count == 3 and s.mean == 2.0
    with pytest.raises(ValueError):
        ExperimentStats.from_values([math.inf])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1000, allow_nan=False), min_size=1, max_size=200))
def test_density_integrates_to_one(values):
    s = ExperimentStats.from_values(values)
    assert abs(trapezoid(s.density_y, s.density_x) - 1) < 1e-3
    assert s.std == pytest.approx(float(np.std(values)), rel=1e-9, abs=1e-12)
    assert all(y >= 0 for y in s.density_y)


def test_stats_file_roundtrip(tmp_path):
    s = ExperimentStats.from_values([1.0, 2.0, 2.5, 4.0])
    path = tmp_path / "s.csv"
    write_stats(s, path)
    summary, x, y = read_stats(path)
    assert summary["mean"] == s.mean and summary["count"] == 4
    assert np.array_equal(x, s.density_x) and np.array_equal(y, s.density_y)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "statistic,value" and "density_x,density_y" in lines
