import json
import threading

import httpx
import pytest

from daqsynth.errors import (
    ConfigurationError,
    ScriptParseError,
    ScriptUnderrunError,
    TransportError,
    UsageError,
)
from daqsynth.gateway import (
    ChatMessage,
    ChatResponse,
    LiveBackend,
    ModelConfig,
    ScriptedBackend,
    Usage,
    complete,
    designer_config,
    emulator_config,
    load_script,
    record_wrap,
    serialize_request,
)

from conftest import FIXTURES, write_script


SYSTEM = ChatMessage("system", "You are a designer.")
USER = ChatMessage("user", "Design a measurement chain limited to ±7 V.")


class TestMessageTypes:
    def test_rejects_unknown_role(self):
        with pytest.raises(UsageError):
            ChatMessage("tool", "x")

    def test_temperature_range_enforced(self):
        with pytest.raises(UsageError):
            ModelConfig(temperature=2.5)
        ModelConfig(temperature=0.0)
        ModelConfig(temperature=2.0)

    def test_default_temperatures(self):
        assert designer_config().temperature == 0.8
        assert emulator_config().temperature == 0.2

    def test_usage_non_negative(self):
        with pytest.raises(UsageError):
            Usage(prompt_tokens=-1)

    def test_finish_reason_values(self):
        with pytest.raises(UsageError):
            ChatResponse(content="x", finish_reason="censored")


class TestSerializeRequest:
    def test_two_message_golden_fixture(self):
        got = serialize_request(designer_config(), [SYSTEM, USER])
        expected = (FIXTURES / "chat_request_2msg.golden.json").read_bytes()
        assert got == expected

    def test_temperature_serialized_exactly(self):
        designer_body = serialize_request(designer_config(), [SYSTEM]).decode("utf-8")
        emulator_body = serialize_request(emulator_config(), [SYSTEM]).decode("utf-8")
        assert '"temperature": 0.8' in designer_body
        assert '"temperature": 0.2' in emulator_body

    def test_message_order_and_roles_preserved(self):
        messages = [
            ChatMessage("system", "s"),
            ChatMessage("user", "u1"),
            ChatMessage("assistant", "a1"),
            ChatMessage("user", "u2"),
        ]
        body = json.loads(serialize_request(designer_config(), messages))
        assert [m["role"] for m in body["messages"]] == ["system", "user", "assistant", "user"]
        assert [m["content"] for m in body["messages"]] == ["s", "u1", "a1", "u2"]


class TestScriptedBackend:
    def test_returns_queue_head(self):
        backend = ScriptedBackend(["Q1…Q5 text"])
        response = complete(designer_config(), [SYSTEM, USER], backend)
        assert response.content == "Q1…Q5 text"

    def test_exhausts_after_n_calls(self):
        backend = ScriptedBackend(["a", "b", "c"])
        for expected in "abc":
            assert complete(designer_config(), [USER], backend).content == expected
        with pytest.raises(ScriptUnderrunError):
            complete(designer_config(), [USER], backend)

    def test_empty_script_underruns_first_call(self):
        backend = ScriptedBackend([])
        with pytest.raises(ScriptUnderrunError):
            complete(designer_config(), [USER], backend)

    def test_empty_message_list_is_usage_error(self):
        with pytest.raises(UsageError):
            complete(designer_config(), [], ScriptedBackend(["a"]))

    def test_statelessness_identical_inputs_identical_outputs(self):
        config = designer_config()
        first = complete(config, [SYSTEM, USER], ScriptedBackend(["reply"]))
        second = complete(config, [SYSTEM, USER], ScriptedBackend(["reply"]))
        assert first == second

    def test_scripted_usage_flagged_missing(self):
        response = complete(designer_config(), [USER], ScriptedBackend(["a"]))
        assert response.usage == Usage(0, 0)
        assert response.usage_missing


class TestScriptFiles:
    def test_load_script_round_trip(self, tmp_path):
        path = write_script(tmp_path / "s.jsonl", ["one", "two"])
        backend = load_script(path)
        assert backend.remaining == 2
        assert complete(designer_config(), [USER], backend).content == "one"

    def test_load_script_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"response": "ok"}\n{nope\n', encoding="utf-8")
        with pytest.raises(ScriptParseError) as err:
            load_script(path)
        assert err.value.line == 2

    def test_load_script_rejects_non_string_response(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"response": 3}\n', encoding="utf-8")
        with pytest.raises(ScriptParseError):
            load_script(path)

    def test_empty_script_file_is_valid(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        backend = load_script(path)
        with pytest.raises(ScriptUnderrunError):
            complete(designer_config(), [USER], backend)


class TestRecordWrap:
    def test_records_each_call(self, tmp_path):
        sink = tmp_path / "rec.jsonl"
        backend = record_wrap(ScriptedBackend(["a", "b"]), sink)
        complete(designer_config(), [USER], backend)
        complete(designer_config(), [SYSTEM, USER], backend)
        lines = sink.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        assert all("digest" in json.loads(line) for line in lines)

    def test_sink_reloads_identically(self, tmp_path):
        sink = tmp_path / "rec.jsonl"
        backend = record_wrap(ScriptedBackend(["x", "y", "z"]), sink)
        outputs = [complete(designer_config(), [USER], backend).content for _ in range(3)]
        replayed = load_script(sink)
        assert [
            complete(designer_config(), [USER], replayed).content for _ in range(3)
        ] == outputs

    def test_failed_calls_record_nothing(self, tmp_path):
        sink = tmp_path / "rec.jsonl"
        backend = record_wrap(ScriptedBackend([]), sink)
        with pytest.raises(ScriptUnderrunError):
            complete(designer_config(), [USER], backend)
        assert sink.read_text(encoding="utf-8") == ""


class _StubTransport(httpx.BaseTransport):
    """Drives LiveBackend without a network: scripted HTTP responses."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.requests: list[httpx.Request] = []

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        status, body = self.responses.pop(0)
        return httpx.Response(status, json=body)


def _ok_completion(content="hello"):
    return {
        "choices": [{"message": {"content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 7},
    }


def _live_backend(transport) -> LiveBackend:
    backend = LiveBackend(backoff_base=0.0)
    backend._client = httpx.Client(transport=transport)
    return backend


class TestLiveBackend:
    def test_missing_api_key_is_configuration_error(self, monkeypatch):
        monkeypatch.delenv("OPENAI_API_KEY", raising=False)
        backend = _live_backend(_StubTransport([(200, _ok_completion())]))
        with pytest.raises(ConfigurationError):
            complete(designer_config(), [USER], backend)

    def test_sends_serialized_body_and_bearer_auth(self, monkeypatch):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        transport = _StubTransport([(200, _ok_completion())])
        backend = _live_backend(transport)
        response = complete(designer_config(), [SYSTEM, USER], backend)
        assert response.content == "hello"
        assert response.usage == Usage(11, 7)
        request = transport.requests[0]
        assert request.url.path.endswith("/chat/completions")
        assert request.headers["authorization"] == "Bearer sk-test"
        assert request.content == serialize_request(designer_config(), [SYSTEM, USER])

    def test_non_retryable_http_error_raises_with_status(self, monkeypatch):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        backend = _live_backend(_StubTransport([(400, {"error": "bad"})]))
        with pytest.raises(TransportError) as err:
            complete(designer_config(), [USER], backend)
        assert err.value.status == 400

    def test_retries_transient_failures(self, monkeypatch):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        transport = _StubTransport(
            [(429, {}), (503, {}), (200, _ok_completion("recovered"))]
        )
        backend = _live_backend(transport)
        assert complete(designer_config(), [USER], backend).content == "recovered"
        assert len(transport.requests) == 3

    def test_gives_up_after_max_attempts(self, monkeypatch):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        transport = _StubTransport([(503, {}), (503, {}), (503, {})])
        backend = _live_backend(transport)
        with pytest.raises(TransportError) as err:
            complete(designer_config(), [USER], backend)
        assert err.value.status == 503

    def test_missing_usage_flagged(self, monkeypatch):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        body = {"choices": [{"message": {"content": "x"}, "finish_reason": "stop"}]}
        backend = _live_backend(_StubTransport([(200, body)]))
        response = complete(designer_config(), [USER], backend)
        assert response.usage_missing
        assert response.usage == Usage(0, 0)

    def test_concurrent_calls_are_safe(self, monkeypatch):
        monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
        transport = _StubTransport([(200, _ok_completion(str(i))) for i in range(8)])
        lock = threading.Lock()
        original = transport.handle_request

        def locked(request):
            with lock:
                return original(request)

        transport.handle_request = locked
        backend = _live_backend(transport)
        results = []

        def worker():
            results.append(complete(designer_config(), [USER], backend).content)

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(results) == [str(i) for i in range(8)]
