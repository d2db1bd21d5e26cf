"""JSON job files: schema and construction of a TuningJob."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from . import landscapes
from .backend import ExternalBackend, ReplayBackend, SyntheticBackend, SyntheticModelSpec
from .errors import KtuneError
from .kernel import ArgumentSpec, DeviceModel, KernelSpec, ThreadSizeModifier, device_preset
from .search import StrategySpec
from .space import SearchSpace
from .tuner import DEFAULT_ABS_TOL, DEFAULT_REL_TOL, TuningJob


class JobError(KtuneError):
    """The job file is unreadable or does not match the schema."""


_FRACTION = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        {"type": "string", "pattern": r"^\s*[0-9]+\s*(/\s*[0-9]+\s*)?$"},
    ]
}

_SIZES = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1, "maxItems": 3}

JOB_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "oneOf": [{"required": ["kernel", "parameters"]}, {"required": ["template"]}],
    "required": ["backend", "strategy"],
    "properties": {
        "kernel": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name", "global", "local"],
            "properties": {
                "name": {"type": "string"},
                "source": {"type": "string"},
                "global": _SIZES,
                "local": _SIZES,
                "modifiers": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["target", "op", "by"],
                        "properties": {
                            "target": {"enum": ["global", "local"]},
                            "op": {"enum": ["multiply", "divide"]},
                            "by": {
                                "type": "array",
                                "items": {"oneOf": [{"type": "string"}, {"const": 1}]},
                                "minItems": 1,
                                "maxItems": 3,
                            },
                        },
                    },
                },
                "arguments": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["role"],
                        "properties": {
                            "name": {"type": "string"},
                            "role": {"enum": ["input", "output", "scalar"]},
                            "type": {"enum": ["f32", "i32"]},
                            "length": {"type": "integer", "minimum": 1},
                            "value": {"type": "number"},
                            "fill": {"type": "string"},
                        },
                    },
                },
                "local_mem": {"type": ["string", "null"]},
            },
        },
        "template": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["conv", "gemm"]},
                "filter": {"type": "integer", "minimum": 1},
                "X": {"type": "integer", "minimum": 1},
                "Y": {"type": "integer", "minimum": 1},
                "w": {"type": "number"},
                "M": {"type": "integer", "minimum": 1},
                "N": {"type": "integer", "minimum": 1},
                "K": {"type": "integer", "minimum": 1},
                "alpha": {"type": "number"},
                "beta": {"type": "number"},
                "data_seed": {"type": "integer"},
            },
        },
        "parameters": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "values"],
                "properties": {
                    "name": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
                    "values": {
                        "type": "array",
                        "items": {"type": "integer", "minimum": 0},
                        "minItems": 1,
                        "uniqueItems": True,
                    },
                    "labels": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "constraints": {"type": "array", "items": {"type": "string", "minLength": 1}},
        "device": {
            "oneOf": [
                {"enum": ["K40m", "GTX480", "HD7970", "Iris"]},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["name"],
                    "properties": {
                        "name": {"type": "string"},
                        "max_local_total": {"type": "integer", "minimum": 1},
                        "max_local_per_dim": {
                            "type": "array",
                            "items": {"type": "integer", "minimum": 1},
                            "minItems": 3,
                            "maxItems": 3,
                        },
                        "local_mem_bytes": {"type": "integer", "minimum": 0},
                        "peak_gflops": {"type": "number"},
                        "peak_gbs": {"type": "number"},
                    },
                },
            ]
        },
        "backend": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"const": "synthetic"},
                        "model": {"enum": ["conv-like", "gemm-like", "hash-random"]},
                        "noise_seed": {"type": "integer"},
                        "base_time_ms": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "path"],
                    "properties": {"kind": {"const": "replay"}, "path": {"type": "string"}},
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind", "command"],
                    "properties": {
                        "kind": {"const": "external"},
                        "command": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                        "timeout_s": {"type": "number", "exclusiveMinimum": 0},
                        "want_outputs": {"type": "boolean"},
                        "workers": {"type": "integer", "minimum": 1},
                    },
                },
            ]
        },
        "strategy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["full", "random", "annealing", "pso"]},
                "fraction": _FRACTION,
                "temperature": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"type": "number", "minimum": 0, "maximum": 1},
                "beta": {"type": "number", "minimum": 0, "maximum": 1},
                "gamma": {"type": "number", "minimum": 0, "maximum": 1},
                "swarm_size": {"type": "integer", "minimum": 1},
            },
        },
        "seed": {"type": "integer"},
        "repetitions": {"type": "integer", "minimum": 1},
        "reference": {"type": ["boolean", "string"]},
        "rel_tol": {"type": "number", "minimum": 0},
        "abs_tol": {"type": "number", "minimum": 0},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"results": {"type": "string"}, "stats": {"type": "string"}},
        },
    },
}


@dataclass
class LoadedJob:
    job: TuningJob
    doc: dict
    base_dir: Path
    template: str | None = None

    def output_path(self, key: str, default: str) -> Path:
        path = Path(self.doc.get("output", {}).get(key, default))
        return path if path.is_absolute() else self.base_dir / path


def validate(doc: dict):
    try:
        jsonschema.validate(doc, JOB_SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise JobError(f"job schema violation at {where}: {e.message}") from None


def _device(spec) -> DeviceModel:
    if spec is None:
        return device_preset("K40m")
    if isinstance(spec, str):
        return device_preset(spec)
    fields = dict(spec)
    if "max_local_per_dim" in fields:
        fields["max_local_per_dim"] = tuple(fields["max_local_per_dim"])
    return DeviceModel(**fields)


def _template(doc: dict, device: DeviceModel):
    t = doc["template"]
    seed = t.get("data_seed", 0)
    if t["name"] == "conv":
        size = t.get("filter", 7)
        problem = landscapes.ConvProblem(t.get("X", 8192), t.get("Y", 4096), size, size, t.get("w", 1.0))
        kernel = landscapes.conv_kernel(problem, seed)
        space = landscapes.conv_user_space(problem, device)
        return kernel, space, landscapes.conv_oracle(problem), "conv-like"
    problem = landscapes.GemmProblem(
        t.get("M", 2048), t.get("N", 2048), t.get("K", 2048), t.get("alpha", 1.0), t.get("beta", 0.0)
    )
    kernel = landscapes.gemm_kernel(problem, seed)
    space = landscapes.gemm_user_space()
    return kernel, space, landscapes.gemm_oracle(problem), "gemm-like"


def _kernel(doc: dict) -> KernelSpec:
    k = doc["kernel"]
    return KernelSpec(
        name=k["name"],
        source_ref=k.get("source", k["name"]),
        global_size=tuple(k["global"]),
        local_size=tuple(k["local"]),
        modifiers=tuple(
            ThreadSizeModifier(m["target"], m["op"], tuple(m["by"])) for m in k.get("modifiers", [])
        ),
        arguments=tuple(
            ArgumentSpec(
                a["role"],
                a.get("type", "f32"),
                a.get("length"),
                a.get("value"),
                a.get("fill", "constant:0"),
                a.get("name", ""),
            )
            for a in k.get("arguments", [])
        ),
        local_mem=k.get("local_mem"),
    )


def build_job(doc: dict, base_dir: Path = Path(".")) -> LoadedJob:
    validate(doc)
    device = _device(doc.get("device"))
    template = None
    if "template" in doc:
        template = doc["template"]["name"]
        kernel, space, oracle, default_model = _template(doc, device)
        reference = oracle if doc.get("reference", False) is True else None
    else:
        kernel = _kernel(doc)
        space = SearchSpace()
        default_model = "hash-random"
        for p in doc["parameters"]:
            space.add_parameter(p["name"], p["values"], p.get("labels"))
        ref = doc.get("reference", False)
        if ref is True:
            ref = kernel.name
        reference = None
        if ref:
            if ref not in landscapes.ORACLES:
                raise JobError(f"no built-in reference named {ref!r}; known: {sorted(landscapes.ORACLES)}")
            reference = landscapes.ORACLES[ref]
    if isinstance(doc.get("reference"), str) and template is not None:
        raise JobError("templates take reference: true/false")
    for text in doc.get("constraints", []):
        space.add_constraint(text)

    b = doc["backend"]
    if b["kind"] == "synthetic":
        model = SyntheticModelSpec(b.get("model", default_model), b.get("noise_seed", 0), b.get("base_time_ms", 1.0))
        backend = SyntheticBackend(model, oracle=reference)
        default_reps = 1
    elif b["kind"] == "replay":
        path = Path(b["path"])
        backend = ReplayBackend.from_csv(path if path.is_absolute() else base_dir / path)
        default_reps = 1
    else:
        backend = ExternalBackend(
            list(b["command"]), b.get("timeout_s", 60.0), b.get("want_outputs", False), b.get("workers", 1)
        )
        default_reps = 3

    s = doc["strategy"]
    strategy = StrategySpec(
        kind=s["kind"],
        fraction=s.get("fraction", 1),
        temperature=s.get("temperature", 4.0),
        alpha=s.get("alpha", 0.4),
        beta=s.get("beta", 0.0),
        gamma=s.get("gamma", 0.4),
        swarm_size=s.get("swarm_size", 3),
    )
    job = TuningJob(
        kernel=kernel,
        space=space,
        device=device,
        backend=backend,
        strategy=strategy,
        seed=doc.get("seed", 0),
        repetitions=doc.get("repetitions", default_reps),
        reference=reference,
        rel_tol=doc.get("rel_tol", DEFAULT_REL_TOL),
        abs_tol=doc.get("abs_tol", DEFAULT_ABS_TOL),
    )
    return LoadedJob(job, doc, base_dir, template)


def load_job(path) -> LoadedJob:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise JobError(f"cannot read job file {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise JobError(f"{path}: invalid JSON: {e}") from None
    return build_job(doc, path.parent)
