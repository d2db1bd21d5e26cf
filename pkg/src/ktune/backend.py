"""Evaluation backends: synthetic landscapes, replayed measurements, external runners.

A backend turns an :class:`EvaluationRequest` into an :class:`EvaluationResult`.
Synthetic and replay backends are pure functions of the request and may be
called concurrently. The external backend spawns a process per request.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import math
import shutil
import subprocess
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import (
    BackendUnavailable,
    MalformedReplayFile,
    ProtocolViolation,
    SpawnFailure,
    UnknownParameterSet,
)
from .kernel import ArgumentSpec
from .space import Configuration, decode_configuration

Oracle = Callable[[list], list[np.ndarray]]


class Status(str, enum.Enum):
    SUCCESS = "success"
    COMPILE_ERROR = "compile_error"
    RUNTIME_ERROR = "runtime_error"
    MISSING = "missing"


@dataclass(frozen=True)
class EvaluationRequest:
    kernel: str
    source_ref: str
    config: Configuration
    global_size: tuple[int, ...]
    local_size: tuple[int, ...]
    arguments: tuple[ArgumentSpec, ...] = ()
    device: str = ""
    repetitions: int = 1
    want_outputs: bool = False

    @property
    def has_output_buffers(self) -> bool:
        return any(a.role == "output" for a in self.arguments)


@dataclass
class EvaluationResult:
    status: Status
    time_ms: float | None = None
    outputs: list[np.ndarray] | None = None
    output_digests: list[str] | None = None
    message: str = ""

    def __post_init__(self):
        self.status = Status(self.status)
        if self.status is Status.SUCCESS:
            if self.time_ms is None or not (math.isfinite(self.time_ms) and self.time_ms > 0):
                raise ValueError(f"successful results need a positive finite time, got {self.time_ms}")

    @property
    def ok(self) -> bool:
        return self.status is Status.SUCCESS


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def buffer_digest(buf: np.ndarray) -> str:
    """FNV-1a 64 over the little-endian bytes of ``buf``, as 16 hex digits."""
    le = buf.astype(buf.dtype.newbyteorder("<"), copy=False)
    return f"{fnv1a64(le.tobytes()):016x}"


# --- synthetic landscapes -----------------------------------------------------

# Per-parameter multiplicative time penalties. Frozen: tests depend on them.
CONV_PENALTIES: dict[str, dict[int, float]] = {
    "Xwg": {8: 2.2, 16: 1.4, 32: 1.0, 64: 1.2},
    "Ywg": {8: 1.0, 16: 1.15, 32: 1.5, 64: 2.0},
    "Xwpt": {1: 1.5, 2: 1.0, 4: 1.3, 8: 2.0},
    "Ywpt": {1: 1.8, 2: 1.3, 4: 1.0, 8: 1.1},
    "LOCAL": {0: 1.4, 1: 1.2, 2: 1.0},
    "VW": {1: 1.25, 2: 1.0, 4: 1.1, 8: 1.35},
    "PAD": {0: 1.0, 1: 1.04},
    "UNR": {0: 1.5, 1: 1.0},
}

GEMM_PENALTIES: dict[str, dict[int, float]] = {
    "Mwg": {16: 2.0, 32: 1.5, 64: 1.1, 128: 1.0},
    "Nwg": {16: 2.0, 32: 1.5, 64: 1.1, 128: 1.0},
    "Kwg": {16: 1.1, 32: 1.0, 64: 1.05, 128: 1.2},
    "MdimC": {8: 1.2, 16: 1.0, 32: 1.15},
    "NdimC": {8: 1.2, 16: 1.0, 32: 1.15},
    "LOCAL_A": {0: 1.5, 1: 1.0},
    "LOCAL_B": {0: 1.5, 1: 1.0},
    "MdimA": {8: 1.1, 16: 1.0, 32: 1.05},
    "NdimB": {8: 1.1, 16: 1.0, 32: 1.05},
    "Mstride": {0: 1.0, 1: 1.05},
    "Nstride": {0: 1.05, 1: 1.0},
    "Mvec": {1: 1.3, 2: 1.1, 4: 1.0, 8: 1.2},
    "Nvec": {1: 1.3, 2: 1.1, 4: 1.0, 8: 1.2},
    "Kwi": {2: 1.1, 8: 1.0},
}


def _conv_interactions(c: Mapping[str, int]) -> float:
    factor = 1.0
    # Register/cache cliff: large per-thread tiles without local memory.
    if c["Xwpt"] * c["Ywpt"] >= 32 and c["LOCAL"] == 0:
        factor *= 4.0
    # Low occupancy for small workgroups.
    if c["Xwg"] * c["Ywg"] < 128:
        factor *= 1.6
    return factor


def _gemm_interactions(c: Mapping[str, int]) -> float:
    factor = 1.0
    per_thread = (c["Mwg"] // c["MdimC"]) * (c["Nwg"] // c["NdimC"])
    if per_thread >= 64 and c["Mvec"] >= 4 and c["Nvec"] >= 4:
        factor *= 2.5  # register pressure
    if per_thread <= 2:
        factor *= 1.8  # too little work per thread
    return factor


def unit_hash(*parts) -> float:
    """Deterministic value in [0, 1) from a 64-bit hash of ``parts``."""
    data = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little") / 2.0**64


@dataclass(frozen=True)
class SyntheticModelSpec:
    kind: str = "hash-random"  # "conv-like" | "gemm-like" | "hash-random"
    noise_seed: int = 0
    base_time_ms: float = 1.0

    def __post_init__(self):
        if self.kind not in ("conv-like", "gemm-like", "hash-random"):
            raise UnknownParameterSet(f"unknown synthetic model {self.kind!r}")
        if not self.base_time_ms > 0:
            raise ValueError("base_time_ms must be positive")


def _table_penalty(config: Mapping[str, int], tables: dict[str, dict[int, float]], kind: str):
    missing = set(tables) - set(config)
    if missing:
        raise UnknownParameterSet(f"{kind} model needs parameters {sorted(missing)}")
    out = 1.0
    for name, table in tables.items():
        try:
            out *= table[config[name]]
        except KeyError:
            raise UnknownParameterSet(f"{kind} model has no penalty for {name}={config[name]}") from None
    return out


def synthetic_time(config: Configuration, model: SyntheticModelSpec) -> float:
    """Model time in ms: base * penalties * (1 + 0.02 u)."""
    encoded = config.encode()
    if model.kind == "conv-like":
        penalty = _table_penalty(config, CONV_PENALTIES, model.kind) * _conv_interactions(config)
    elif model.kind == "gemm-like":
        penalty = _table_penalty(config, GEMM_PENALTIES, model.kind) * _gemm_interactions(config)
    else:
        penalty = 1.0 + 9.0 * unit_hash(model.noise_seed, "landscape", encoded)
    return model.base_time_ms * penalty * (1.0 + 0.02 * unit_hash(model.noise_seed, encoded))


class SyntheticBackend:
    """Times from a closed-form landscape; outputs from an optional oracle."""

    pure = True
    concurrency_safe = True

    def __init__(self, model: SyntheticModelSpec | None = None, oracle: Oracle | None = None):
        self.model = model or SyntheticModelSpec()
        self.oracle = oracle
        self._outputs: dict[tuple, list[np.ndarray]] = {}

    def outputs_for(self, arguments: tuple[ArgumentSpec, ...]) -> list[np.ndarray]:
        if arguments not in self._outputs:
            self._outputs[arguments] = self.oracle([a.materialize() for a in arguments])
        return self._outputs[arguments]

    def evaluate(self, req: EvaluationRequest) -> EvaluationResult:
        return evaluate_synthetic(req, self.model, self)


def evaluate_synthetic(
    req: EvaluationRequest, model: SyntheticModelSpec, backend: SyntheticBackend | None = None
) -> EvaluationResult:
    time_ms = synthetic_time(req.config, model)
    outputs = None
    if backend is not None and backend.oracle is not None and req.has_output_buffers:
        outputs = [o.copy() for o in backend.outputs_for(req.arguments)]
    return EvaluationResult(Status.SUCCESS, time_ms, outputs=outputs)


# --- replay -------------------------------------------------------------------

REPLAY_HEADER = ["config", "time_ms"]


class ReplayBackend:
    """Serves previously measured times keyed by canonical configuration text."""

    pure = True
    concurrency_safe = True

    def __init__(self, table: Mapping[str, float]):
        self.table = dict(table)

    @classmethod
    def from_csv(cls, path) -> "ReplayBackend":
        return cls(load_replay(path))

    def evaluate(self, req: EvaluationRequest) -> EvaluationResult:
        return evaluate_replay(req, self.table)


def load_replay(path) -> dict[str, float]:
    table: dict[str, float] = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != REPLAY_HEADER:
            raise MalformedReplayFile(1, f"expected header {','.join(REPLAY_HEADER)}")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise MalformedReplayFile(line, f"expected 2 columns, got {len(row)}")
            try:
                key = Configuration.from_mapping(decode_configuration(row[0])).encode()
                time_ms = float(row[1])
            except ValueError as e:
                raise MalformedReplayFile(line, str(e)) from None
            if not (math.isfinite(time_ms) and time_ms > 0):
                raise MalformedReplayFile(line, f"time must be positive, got {row[1]}")
            if key in table:
                raise MalformedReplayFile(line, f"duplicate configuration {key}")
            table[key] = time_ms
    return table


def write_replay(table: Mapping[str, float], path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\r\n")
        writer.writerow(REPLAY_HEADER)
        for key in sorted(table):
            writer.writerow([key, repr(float(table[key]))])


def evaluate_replay(req: EvaluationRequest, table: Mapping[str, float]) -> EvaluationResult:
    key = req.config.encode()
    if key in table:
        return EvaluationResult(Status.SUCCESS, table[key])
    return EvaluationResult(Status.MISSING, message=f"no measurement for {key}")


# --- external command -------------------------------------------------------

REQUEST_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "kernel", "source_ref", "config", "global", "local", "args", "repetitions", "want_outputs",
    ],
    "properties": {
        "kernel": {"type": "string"},
        "source_ref": {"type": "string"},
        "config": {"type": "object", "additionalProperties": {"type": "integer"}},
        "global": {"type": "array", "items": {"type": "integer"}, "minItems": 1, "maxItems": 3},
        "local": {"type": "array", "items": {"type": "integer"}, "minItems": 1, "maxItems": 3},
        "args": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["role", "type", "fill"],
                "properties": {
                    "role": {"enum": ["input", "output", "scalar"]},
                    "type": {"enum": ["f32", "i32"]},
                    "length": {"type": "integer", "minimum": 1},
                    "value": {"type": "number"},
                    "fill": {"type": "string"},
                },
                "oneOf": [{"required": ["length"]}, {"required": ["value"]}],
            },
        },
        "repetitions": {"type": "integer", "minimum": 1},
        "want_outputs": {"type": "boolean"},
    },
}

RESPONSE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["status"],
    "properties": {
        "status": {"enum": ["ok", "compile_error", "runtime_error"]},
        "time_ms": {"type": "number", "exclusiveMinimum": 0},
        "outputs_digest": {"type": "array", "items": {"type": "string"}},
        "outputs": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "message": {"type": "string"},
    },
}

_STATUS_MAP = {
    "ok": Status.SUCCESS,
    "compile_error": Status.COMPILE_ERROR,
    "runtime_error": Status.RUNTIME_ERROR,
}


def request_to_json(req: EvaluationRequest) -> dict:
    args = []
    for a in req.arguments:
        entry = {"role": a.role, "type": a.dtype}
        if a.role == "scalar":
            entry["value"] = a.value
        else:
            entry["length"] = a.length
        entry["fill"] = a.fill
        args.append(entry)
    return {
        "kernel": req.kernel,
        "source_ref": req.source_ref,
        "config": dict(req.config),
        "global": list(req.global_size),
        "local": list(req.local_size),
        "args": args,
        "repetitions": req.repetitions,
        "want_outputs": req.want_outputs,
    }


def parse_response(doc: dict, req: EvaluationRequest, stderr: str = "") -> EvaluationResult:
    try:
        jsonschema.validate(doc, RESPONSE_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ProtocolViolation(f"invalid runner response: {e.message}", stderr) from None
    status = _STATUS_MAP[doc["status"]]
    if status is Status.SUCCESS and "time_ms" not in doc:
        raise ProtocolViolation("runner reported ok without time_ms", stderr)
    outputs = None
    if "outputs" in doc:
        dtypes = [a.dtype for a in req.arguments if a.role == "output"]
        if len(dtypes) != len(doc["outputs"]):
            raise ProtocolViolation(
                f"runner returned {len(doc['outputs'])} outputs, kernel has {len(dtypes)}", stderr
            )
        outputs = [
            np.asarray(o, dtype=np.int32 if t == "i32" else np.float32)
            for o, t in zip(doc["outputs"], dtypes)
        ]
    return EvaluationResult(
        status,
        doc.get("time_ms") if status is Status.SUCCESS else None,
        outputs=outputs,
        output_digests=doc.get("outputs_digest"),
        message=doc.get("message", ""),
    )


def _expand(command: Sequence[str], req: EvaluationRequest) -> list[str]:
    return [
        part.replace("{kernel}", req.kernel).replace("{source_ref}", req.source_ref)
        for part in command
    ]


def evaluate_external(
    req: EvaluationRequest, command: Sequence[str], timeout: float = 60.0
) -> EvaluationResult:
    """Run ``command`` with the request as JSON on stdin; read one JSON reply."""
    payload = json.dumps(request_to_json(req), sort_keys=True)
    argv = _expand(command, req)
    try:
        proc = subprocess.run(
            argv, input=payload, capture_output=True, text=True, timeout=timeout
        )
    except subprocess.TimeoutExpired:
        return EvaluationResult(Status.RUNTIME_ERROR, message="timeout")
    except OSError as e:
        raise SpawnFailure(f"cannot run {argv[0]!r}: {e}") from e
    try:
        doc = json.loads(proc.stdout)
    except json.JSONDecodeError:
        raise ProtocolViolation(
            f"runner exited with status {proc.returncode} without a JSON reply", proc.stderr
        ) from None
    if not isinstance(doc, dict):
        raise ProtocolViolation("runner reply is not a JSON object", proc.stderr)
    return parse_response(doc, req, proc.stderr)


@dataclass
class ExternalBackend:
    """Delegates each evaluation to a runner process. Not pure."""

    command: list[str]
    timeout: float = 60.0
    want_outputs: bool = False
    workers: int = 1

    pure = False

    @property
    def concurrency_safe(self) -> bool:
        return self.workers > 1

    def check_available(self):
        if not self.command or shutil.which(self.command[0]) is None and not Path(self.command[0]).is_file():
            raise BackendUnavailable(f"runner {self.command[:1]} not found")

    def evaluate(self, req: EvaluationRequest) -> EvaluationResult:
        if self.want_outputs and not req.want_outputs:
            req = dataclasses.replace(req, want_outputs=True)
        return evaluate_external(req, self.command, self.timeout)
