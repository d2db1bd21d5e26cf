import sys
import time
from pathlib import Path

import pytest

from ktune import landscapes
from ktune.kernel import ArgumentSpec, DivGlobalSize, KernelSpec, device_preset
from ktune.space import SearchSpace

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent
JOBS = ROOT / "jobs"
STUB = [sys.executable, str(HERE / "stub_runner.py")]


def copy_kernel(length=2048):
    return KernelSpec(
        "copy",
        "copy.cl",
        (length,),
        (64,),
        (DivGlobalSize("WPT"),),
        (ArgumentSpec("input", length=length, fill="uniform:1"), ArgumentSpec("output", length=length)),
    )


def copy_space():
    return SearchSpace().add_parameter("WPT", [1, 2, 4])


@pytest.fixture(scope="session")
def k40m():
    return device_preset("K40m")


@pytest.fixture(scope="session")
def conv_space_k40m(k40m):
    space = landscapes.conv_space(k40m)
    space.enumerate_valid()
    return space


@pytest.fixture(scope="session")
def gemm_space_k40m(k40m):
    space = landscapes.gemm_space(k40m)
    space.enumerate_valid()
    return space


# --- acceptance report ------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}
_STARTED = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[n]
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {text}")
    elapsed = time.perf_counter() - _STARTED
    tr.write_line(f"{'PASS' if elapsed < 120 else 'FAIL'} suite runtime: {elapsed:.1f} s (limit 120 s)")
