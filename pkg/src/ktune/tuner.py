"""Tuning jobs: thread-size resolution, device limits, search, verification."""

from __future__ import annotations

import datetime as _dt
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .backend import EvaluationRequest, EvaluationResult, Oracle, Status, buffer_digest
from .errors import (
    BackendUnavailable,
    EmptySpace,
    EmptySpaceAfterConstraints,
    InexactDivision,
    ShapeMismatch,
    UnknownParameter,
    ZeroDivisor,
)
from .expr import Expression
from .kernel import DeviceModel, KernelSpec
from .search import SearchOutcome, StrategySpec, run_search
from .space import Configuration, Predicate, SearchSpace

log = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-4
DEFAULT_ABS_TOL = 1e-6


def resolve_thread_sizes(
    kernel: KernelSpec, config: Mapping[str, int]
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Apply the kernel's modifiers in order to its base global/local sizes."""
    sizes = {"global": list(kernel.global_size), "local": list(kernel.local_size)}
    for m in kernel.modifiers:
        dims = sizes[m.target]
        for d, entry in enumerate(m.by):
            factor = entry if isinstance(entry, int) else config[entry]
            if m.op == "multiply":
                dims[d] *= factor
            else:
                if factor == 0:
                    raise ZeroDivisor(f"{m.target} dimension {d} divided by zero")
                if dims[d] % factor:
                    raise InexactDivision(d, dims[d], factor)
                dims[d] //= factor
    return tuple(sizes["global"]), tuple(sizes["local"])


def device_constraints(kernel: KernelSpec, device: DeviceModel, space: SearchSpace) -> list[Predicate]:
    """Constraints implied by the device: workgroup limits and local memory.

    Configurations whose thread sizes divide inexactly, or whose global size
    is not a multiple of the local size, are rejected as well.
    """
    used = kernel.modifier_names
    if kernel.local_mem is not None:
        used |= set(Expression(kernel.local_mem).names)
    unknown = used - set(space.names)
    if unknown:
        raise UnknownParameter(sorted(unknown)[0])
    limits = device.max_local_per_dim

    def fits(config) -> bool:
        try:
            global_size, local_size = resolve_thread_sizes(kernel, config)
        except (InexactDivision, ZeroDivisor):
            return False
        if math.prod(local_size) > device.max_local_total:
            return False
        for d, n in enumerate(local_size):
            if n > limits[d] or global_size[d] % n:
                return False
        return True

    out = [Predicate(tuple(sorted(kernel.modifier_names)), fits, f"thread sizes fit {device.name}")]
    if kernel.local_mem is not None:
        expr = Expression(kernel.local_mem)
        budget = device.local_mem_bytes
        out.append(
            Predicate(
                expr.names,
                lambda config: expr.value(config) <= budget,
                f"{kernel.local_mem} <= {budget}",
            )
        )
    return out


@dataclass
class VerificationReport:
    passed: bool
    max_abs: list[float]
    max_rel: list[float]
    worst_index: list[int]
    message: str = ""


def verify_outputs(
    candidate: Sequence[np.ndarray],
    reference: Sequence[np.ndarray],
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
) -> VerificationReport:
    """Elementwise |c - r| <= abs_tol + rel_tol * |r|; integer buffers compare exactly."""
    if len(candidate) != len(reference):
        raise ShapeMismatch(f"{len(candidate)} candidate buffers vs {len(reference)} reference")
    passed = True
    max_abs, max_rel, worst = [], [], []
    messages = []
    for i, (c, r) in enumerate(zip(candidate, reference)):
        c = np.asarray(c)
        r = np.asarray(r)
        if c.shape != r.shape:
            raise ShapeMismatch(f"buffer {i}: shape {c.shape} vs {r.shape}")
        exact = np.issubdtype(r.dtype, np.integer)
        diff = np.abs(c.astype(np.float64) - r.astype(np.float64))
        scale = np.abs(r.astype(np.float64))
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(scale > 0, diff / scale, np.where(diff > 0, np.inf, 0.0))
        limit = 0.0 if exact else abs_tol + rel_tol * scale
        bad = ~(diff <= limit)  # NaN counts as a failure
        idx = int(np.argmax(diff)) if diff.size else 0
        max_abs.append(float(diff.max()) if diff.size else 0.0)
        max_rel.append(float(rel.max()) if rel.size else 0.0)
        worst.append(idx)
        if bad.any():
            passed = False
            first = int(np.argmax(bad))
            messages.append(f"buffer {i}: {int(bad.sum())} mismatches, first at index {first}")
    return VerificationReport(passed, max_abs, max_rel, worst, "; ".join(messages))


@dataclass
class TuningJob:
    kernel: KernelSpec
    space: SearchSpace
    device: DeviceModel
    backend: object = None
    strategy: StrategySpec = field(default_factory=StrategySpec)
    seed: int = 0
    repetitions: int = 1
    reference: Oracle | None = None
    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL

    _constrained: SearchSpace | None = field(default=None, init=False, repr=False, compare=False)

    def constrained_space(self) -> SearchSpace:
        """User plus device constraints; built once and shared across runs."""
        if self._constrained is None:
            extra = device_constraints(self.kernel, self.device, self.space)
            self._constrained = self.space.with_constraints(extra)
        return self._constrained


@dataclass(frozen=True)
class Row:
    step: int
    config: Configuration
    status: Status
    time_ms: float | None
    global_size: tuple[int, ...]
    local_size: tuple[int, ...]
    best_so_far: float
    verified: str  # "pass" | "fail" | "n/a"
    message: str = ""

    @property
    def usable(self) -> bool:
        return self.status is Status.SUCCESS and self.verified != "fail"


@dataclass(frozen=True)
class TuningResult:
    rows: tuple[Row, ...]
    best: Row | None
    outcome: SearchOutcome
    metadata: dict


def make_request(job: TuningJob, config: Configuration, want_outputs: bool = False) -> EvaluationRequest:
    global_size, local_size = resolve_thread_sizes(job.kernel, config)
    return EvaluationRequest(
        job.kernel.name,
        job.kernel.source_ref,
        config,
        global_size,
        local_size,
        job.kernel.arguments,
        job.device.name,
        job.repetitions,
        want_outputs,
    )


class _Verifier:
    """Reference outputs computed once, on first use."""

    def __init__(self, job: TuningJob):
        self.job = job
        self._outputs: list[np.ndarray] | None = None
        self._digests: list[str] | None = None

    @property
    def outputs(self) -> list[np.ndarray]:
        if self._outputs is None:
            args = [a.materialize() for a in self.job.kernel.arguments]
            self._outputs = [np.asarray(o) for o in self.job.reference(args)]
        return self._outputs

    @property
    def digests(self) -> list[str]:
        if self._digests is None:
            self._digests = [buffer_digest(o) for o in self.outputs]
        return self._digests

    def check(self, result: EvaluationResult) -> tuple[str, str]:
        if result.outputs is not None:
            report = verify_outputs(result.outputs, self.outputs, self.job.rel_tol, self.job.abs_tol)
            return ("pass" if report.passed else "fail"), report.message
        if result.output_digests is not None:
            if list(result.output_digests) == self.digests:
                return "pass", ""
            return "fail", "output digest mismatch"
        return "fail", "backend returned no outputs to verify"


def run_tuning(job: TuningJob, backend=None, strategy: StrategySpec | None = None, seed: int | None = None):
    backend = backend if backend is not None else job.backend
    strategy = strategy or job.strategy
    seed = job.seed if seed is None else seed
    if backend is None or not hasattr(backend, "evaluate"):
        raise BackendUnavailable("no evaluation backend configured")
    check = getattr(backend, "check_available", None)
    if check is not None:
        check()

    space = job.constrained_space()
    if space.enumerable and space.count() == 0:
        raise EmptySpaceAfterConstraints(
            f"no configuration of {space.raw_size} satisfies user and device constraints"
        )

    verifier = _Verifier(job) if job.reference is not None else None
    want_outputs = verifier is not None
    details: dict[Configuration, tuple] = {}

    def evaluator(config: Configuration) -> float:
        req = make_request(job, config, want_outputs)
        global_size, local_size = req.global_size, req.local_size
        result = backend.evaluate(req)
        verified, message = "n/a", result.message
        if result.ok and verifier is not None:
            verified, message = verifier.check(result)
        details[config] = (result, global_size, local_size, verified, message)
        log.debug("%s -> %s %s %s", config.encode(), result.status.value, result.time_ms, verified)
        if not result.ok or verified == "fail":
            return math.inf
        return result.time_ms

    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    try:
        outcome = run_search(space, evaluator, strategy, seed)
    except EmptySpace as e:
        raise EmptySpaceAfterConstraints(str(e)) from e
    rows = []
    for entry in outcome.trace:
        result, global_size, local_size, verified, message = details[entry.config]
        rows.append(
            Row(
                entry.step,
                entry.config,
                result.status,
                result.time_ms,
                global_size,
                local_size,
                entry.best_so_far,
                verified,
                message,
            )
        )
    best = None
    for row in rows:
        if row.usable and (best is None or row.time_ms < best.time_ms):
            best = row
    metadata = {
        "seed": seed,
        "strategy": strategy,
        "device": job.device.name,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "raw_size": space.raw_size,
        "valid_size": space.count() if space.enumerable else None,
    }
    return TuningResult(tuple(rows), best, outcome, metadata)
