import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ktune.backend import (
    REQUEST_SCHEMA,
    RESPONSE_SCHEMA,
    EvaluationRequest,
    EvaluationResult,
    ExternalBackend,
    ReplayBackend,
    Status,
    SyntheticBackend,
    SyntheticModelSpec,
    buffer_digest,
    evaluate_external,
    evaluate_replay,
    evaluate_synthetic,
    fnv1a64,
    load_replay,
    parse_response,
    request_to_json,
    write_replay,
)
from ktune.errors import (
    BackendUnavailable,
    MalformedReplayFile,
    ProtocolViolation,
    SpawnFailure,
    UnknownParameterSet,
)
from ktune.kernel import ArgumentSpec
from ktune.space import Configuration

from conftest import STUB
import oracles


def req(config, args=(), want=False, reps=1):
    c = Configuration.from_mapping(config)
    return EvaluationRequest("copy", "copy.cl", c, (2048,), (64,), tuple(args), "K40m", reps, want)


def test_fnv_matches_independent_oracle():
    for data in (b"", b"a", b"foobar", bytes(range(256))):
        assert fnv1a64(data) == oracles.fnv1a64(data)
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C


def test_digest_is_little_endian():
    a = np.arange(4, dtype=np.float32)
    assert buffer_digest(a) == buffer_digest(a.astype(">f4"))
    assert buffer_digest(a) == f"{oracles.fnv1a64(a.astype('<f4').tobytes()):016x}"


def test_success_needs_positive_time():
    with pytest.raises(ValueError):
        EvaluationResult(Status.SUCCESS, 0.0)
    with pytest.raises(ValueError):
        EvaluationResult(Status.SUCCESS, math.inf)


# --- synthetic ----------------------------------------------------------------


def test_synthetic_is_pure():
    m = SyntheticModelSpec("hash-random", 5)
    r = req({"WPT": 2})
    assert evaluate_synthetic(r, m).time_ms == evaluate_synthetic(r, m).time_ms
    assert evaluate_synthetic(r, m).time_ms != evaluate_synthetic(r, SyntheticModelSpec("hash-random", 6)).time_ms


def test_synthetic_unknown_parameter_set():
    with pytest.raises(UnknownParameterSet):
        evaluate_synthetic(req({"WPT": 2}), SyntheticModelSpec("conv-like"))


def test_synthetic_outputs_from_oracle():
    from ktune.landscapes import copy_oracle

    args = (ArgumentSpec("input", length=8, fill="ramp"), ArgumentSpec("output", length=8))
    res = SyntheticBackend(oracle=copy_oracle).evaluate(req({"WPT": 1}, args, want=True))
    assert res.outputs[0].tolist() == list(range(8))
    assert SyntheticBackend().evaluate(req({"WPT": 1}, args)).outputs is None


@given(st.dictionaries(st.sampled_from("abcdef"), st.integers(0, 64), min_size=1))
def test_hash_random_positive_finite(config):
    t = evaluate_synthetic(req(config), SyntheticModelSpec("hash-random")).time_ms
    assert 0 < t < 10.3 and math.isfinite(t)


def test_conv_like_positive_on_space(conv_space_k40m):
    m = SyntheticModelSpec("conv-like")
    times = [evaluate_synthetic(req(c), m).time_ms for c in conv_space_k40m.enumerate_valid()]
    assert min(times) > 0 and all(map(math.isfinite, times))


def test_conv_like_interaction_cliff():
    base = {"Xwg": 32, "Ywg": 8, "Xwpt": 8, "Ywpt": 4, "VW": 2, "PAD": 0, "UNR": 1}
    m = SyntheticModelSpec("conv-like")
    t0 = evaluate_synthetic(req({**base, "LOCAL": 0}), m).time_ms
    t1 = evaluate_synthetic(req({**base, "LOCAL": 1}), m).time_ms
    assert t0 / t1 > 4 * 1.4 / 1.2 * 0.97


# --- replay -------------------------------------------------------------------


def test_replay_lookup():
    table = {"WPT=1": 5.0, "WPT=2": 3.0}
    assert evaluate_replay(req({"WPT": 2}), table).time_ms == 3.0
    assert evaluate_replay(req({"WPT": 4}), table).status is Status.MISSING


def test_replay_roundtrip(tmp_path):
    table = {"A=1;B=2": 1.25, "A=2;B=2": 0.1 + 0.2, "A=3;B=1": 7e-5}
    path = tmp_path / "t.csv"
    write_replay(table, path)
    assert load_replay(path) == table
    back = ReplayBackend.from_csv(path)
    for key, t in table.items():
        c = {k: int(v) for k, v in (p.split("=") for p in key.split(";"))}
        assert back.evaluate(req(c)).time_ms == t


def test_replay_normalises_key_order(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("config,time_ms\nB=2;A=1,4.5\n", encoding="utf-8")
    assert load_replay(path) == {"A=1;B=2": 4.5}


@pytest.mark.parametrize(
    "body, line",
    [
        ("cfg,time\nA=1,1\n", 1),
        ("config,time_ms\nA=1,1\nA=1,2\n", 3),
        ("config,time_ms\nA=1,abc\n", 2),
        ("config,time_ms\nA=1,-1\n", 2),
        ("config,time_ms\nA=1,1,2\n", 2),
    ],
)
def test_replay_malformed(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(MalformedReplayFile) as e:
        load_replay(path)
    assert e.value.line == line


# --- external -----------------------------------------------------------------

ARGS = (ArgumentSpec("input", length=16, fill="uniform:2"), ArgumentSpec("output", length=16))


def test_request_json_is_schema_exact():
    doc = request_to_json(req({"WPT": 2, "MODE": 0}, ARGS + (ArgumentSpec("scalar", value=2.0),), reps=3))
    jsonschema.validate(doc, REQUEST_SCHEMA)
    assert json.loads(json.dumps(doc)) == doc
    assert set(doc) == {"kernel", "source_ref", "config", "global", "local", "args", "repetitions", "want_outputs"}
    assert doc["args"][2] == {"role": "scalar", "type": "f32", "value": 2.0, "fill": "constant:0"}


def test_response_parsing():
    r = req({"WPT": 1}, ARGS)
    ok = {"status": "ok", "time_ms": 1.5, "outputs_digest": ["00"], "message": "fine"}
    jsonschema.validate(ok, RESPONSE_SCHEMA)
    res = parse_response(ok, r)
    assert res.ok and res.time_ms == 1.5 and res.output_digests == ["00"]
    res = parse_response({"status": "ok", "time_ms": 2, "outputs": [[1, 2]]}, r)
    assert res.outputs[0].dtype == np.float32
    with pytest.raises(ProtocolViolation):
        parse_response({"status": "ok"}, r)
    with pytest.raises(ProtocolViolation):
        parse_response({"status": "great", "time_ms": 1}, r)
    with pytest.raises(ProtocolViolation):
        parse_response({"status": "ok", "time_ms": 1, "outputs": [[1], [2]]}, r)


def test_stub_ok():
    res = evaluate_external(req({"MODE": 0, "WPT": 2}, ARGS, reps=3), STUB, timeout=20)
    assert res.status is Status.SUCCESS and res.time_ms == pytest.approx(1.5 + 0.5 + 0.003)


def test_stub_compile_and_runtime_errors():
    res = evaluate_external(req({"MODE": 1}, ARGS), STUB, timeout=20)
    assert res.status is Status.COMPILE_ERROR and "float9" in res.message
    res = evaluate_external(req({"MODE": 2}, ARGS), STUB, timeout=20)
    assert res.status is Status.RUNTIME_ERROR and res.time_ms is None


def test_stub_timeout():
    res = evaluate_external(req({"MODE": 3}, ARGS), STUB, timeout=0.5)
    assert res.status is Status.RUNTIME_ERROR and res.message == "timeout"


def test_stub_crash_is_protocol_violation():
    with pytest.raises(ProtocolViolation) as e:
        evaluate_external(req({"MODE": 4}, ARGS), STUB, timeout=20)
    assert "segfault" in e.value.stderr
    with pytest.raises(ProtocolViolation):
        evaluate_external(req({"MODE": 5}, ARGS), STUB, timeout=20)


def test_spawn_failure_and_unavailable():
    with pytest.raises(SpawnFailure):
        evaluate_external(req({"MODE": 0}), ["/nonexistent/runner"], timeout=5)
    with pytest.raises(BackendUnavailable):
        ExternalBackend(["/nonexistent/runner"]).check_available()


def test_external_backend_properties():
    b = ExternalBackend(STUB)
    assert not b.pure and not b.concurrency_safe
    assert ExternalBackend(STUB, workers=4).concurrency_safe
    b.check_available()
