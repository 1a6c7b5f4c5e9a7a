import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from aamatrix.backend import (
    AlreadyAugmented,
    BackendConfig,
    BackendKind,
    BackendUnavailable,
    HttpChatBackend,
    HttpStatus,
    Matcher,
    NoAuthToken,
    Script,
    ScriptedBackend,
    SectionKind,
    UnboundPlaceholder,
    augment_prompt,
    make_backend,
    make_template,
)
from aamatrix.ontology import ActionKind, AgentType


def test_augment_base_only_is_identity():
    record = augment_prompt("do the task")
    assert record.augmented == "do the task"
    assert [kind for kind, _ in record.sections] == [SectionKind.INSTRUCTION]


def test_augment_section_order():
    record = augment_prompt(
        "do the task",
        role="QA engineer",
        memory_excerpt="prior failure x",
        context_info="db says y",
    )
    kinds = [kind for kind, _ in record.sections]
    assert kinds == [
        SectionKind.ROLE_SPEC,
        SectionKind.MEMORY_EXCERPT,
        SectionKind.CONTEXT_INFO,
        SectionKind.INSTRUCTION,
    ]
    text = record.augmented
    assert text.index("QA engineer") < text.index("prior failure x") < text.index("do the task")
    for _, content in record.sections:
        assert content in text


def test_augment_with_template():
    template = make_template("t", "work on {task} toward {goal}")
    record = augment_prompt(
        "go", template=template, bindings={"task": "t1", "goal": "ship it"}
    )
    assert "work on t1 toward ship it" in record.augmented
    kinds = [kind for kind, _ in record.sections]
    assert kinds == [SectionKind.TEMPLATE_BODY, SectionKind.INSTRUCTION]


def test_augment_unbound_placeholder():
    template = make_template("t", "work on {task}")
    with pytest.raises(UnboundPlaceholder) as exc:
        augment_prompt("go", template=template, bindings={})
    assert exc.value.name == "task"


def test_template_placeholder_declaration_must_match_body():
    from aamatrix.backend import PromptTemplate

    with pytest.raises(ValueError):
        PromptTemplate(id="bad", body="{a} and {b}", placeholders=frozenset({"a"}))


def test_reaugmenting_a_record_is_rejected():
    record = augment_prompt("base")
    with pytest.raises(AlreadyAugmented):
        augment_prompt(record)


# --- scripted backend ---


def script_fixture():
    return Script(
        rules=(
            (Matcher(action_kind=ActionKind.DECOMPOSE_TASK), "1. A\n2. B"),
            (Matcher(agent_type=AgentType.TASK_EXECUTION), "executed"),
            (Matcher(step_range=(5, 6)), "late call"),
            (Matcher(prompt_substring="magic"), "substring hit"),
        ),
        default_response="fallback",
    )


def test_scripted_rule_match_on_action_kind():
    backend = ScriptedBackend(script_fixture())
    response = backend.complete(
        augment_prompt("split"), action_kind=ActionKind.DECOMPOSE_TASK
    )
    assert response == "1. A\n2. B"


def test_scripted_first_matching_rule_wins():
    backend = ScriptedBackend(script_fixture())
    response = backend.complete(
        augment_prompt("magic word"),
        agent_type=AgentType.TASK_EXECUTION,
        action_kind=ActionKind.EXECUTE_TASK,
    )
    assert response == "executed"


def test_scripted_default_when_nothing_matches():
    backend = ScriptedBackend(script_fixture())
    assert backend.complete(augment_prompt("nothing")) == "fallback"


def test_scripted_step_range_matching():
    backend = ScriptedBackend(script_fixture())
    responses = [backend.complete(augment_prompt("x")) for _ in range(6)]
    assert responses == ["fallback"] * 4 + ["late call", "late call"]


def test_scripted_sets_response_on_record():
    backend = ScriptedBackend(script_fixture())
    record = augment_prompt("magic")
    backend.complete(record)
    assert record.response == "substring hit"


def test_scripted_two_runs_are_byte_identical():
    prompts = ["alpha", "magic", "beta", "gamma", "delta", "epsilon"]

    def transcript():
        backend = ScriptedBackend(script_fixture(), seed=7)
        return [
            backend.complete(augment_prompt(p), action_kind=ActionKind.EXECUTE_TASK)
            for p in prompts
        ]

    assert transcript() == transcript()


def test_make_backend_dispatch():
    scripted = make_backend(
        BackendConfig(kind=BackendKind.SCRIPTED, script=Script(default_response="hi"))
    )
    assert isinstance(scripted, ScriptedBackend)
    http = make_backend(
        BackendConfig(
            kind=BackendKind.HTTP_CHAT, base_url="http://example", model_name="m"
        )
    )
    assert isinstance(http, HttpChatBackend)


def test_http_config_requires_url_and_model():
    with pytest.raises(ValueError):
        BackendConfig(kind=BackendKind.HTTP_CHAT, base_url=None, model_name="m")


def test_backend_config_never_stores_a_token():
    # The credential lives only in the environment variable the config names.
    fields = set(BackendConfig.__dataclass_fields__)
    assert "auth_token_env_name" in fields
    assert not any("token" in f and f != "auth_token_env_name" for f in fields)
    import inspect

    from aamatrix import backend as backend_module

    source = inspect.getsource(backend_module.HttpChatBackend)
    assert "os.environ.get(self.config.auth_token_env_name)" in source


# --- live HTTP round trip against a local stub server ---


class _StubHandler(BaseHTTPRequestHandler):
    requests_seen = []

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        _StubHandler.requests_seen.append(
            {"path": self.path, "auth": self.headers.get("Authorization"), "body": body}
        )
        if self.server.behaviour == "ok":
            payload = {"choices": [{"message": {"content": "stub says hi"}}]}
            data = json.dumps(payload).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)
        else:
            self.send_response(self.server.behaviour)
            self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    server.behaviour = "ok"
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.requests_seen.clear()
    yield server
    server.shutdown()


def _http_config(server, **kw):
    return BackendConfig(
        kind=BackendKind.HTTP_CHAT,
        base_url=f"http://127.0.0.1:{server.server_address[1]}",
        model_name="test-model",
        auth_token_env_name="TEST_WORKBENCH_TOKEN",
        timeout_ms=2000,
        max_retries=kw.pop("max_retries", 1),
        **kw,
    )


def test_http_chat_round_trip(stub_server, monkeypatch):
    monkeypatch.setenv("TEST_WORKBENCH_TOKEN", "sekrit")
    backend = HttpChatBackend(_http_config(stub_server))
    record = augment_prompt("hello", role="system role")
    assert backend.complete(record) == "stub says hi"
    seen = _StubHandler.requests_seen[0]
    assert seen["path"] == "/chat/completions"
    assert seen["auth"] == "Bearer sekrit"
    assert seen["body"]["model"] == "test-model"
    assert seen["body"]["temperature"] == 0.0
    roles = [m["role"] for m in seen["body"]["messages"]]
    assert roles == ["system", "user"]
    assert record.response == "stub says hi"


def test_http_chat_requires_env_token(stub_server, monkeypatch):
    monkeypatch.delenv("TEST_WORKBENCH_TOKEN", raising=False)
    backend = HttpChatBackend(_http_config(stub_server))
    with pytest.raises(NoAuthToken):
        backend.complete(augment_prompt("hello"))


def test_http_chat_client_error_is_not_retried(stub_server, monkeypatch):
    monkeypatch.setenv("TEST_WORKBENCH_TOKEN", "sekrit")
    stub_server.behaviour = 403
    backend = HttpChatBackend(_http_config(stub_server))
    with pytest.raises(HttpStatus) as exc:
        backend.complete(augment_prompt("hello"))
    assert exc.value.code == 403
    assert len(_StubHandler.requests_seen) == 1


def test_http_chat_retries_then_unavailable(stub_server, monkeypatch):
    monkeypatch.setenv("TEST_WORKBENCH_TOKEN", "sekrit")
    stub_server.behaviour = 503
    backend = HttpChatBackend(_http_config(stub_server, max_retries=2))
    with pytest.raises(BackendUnavailable):
        backend.complete(augment_prompt("hello"))
    assert len(_StubHandler.requests_seen) == 3  # initial try plus two retries
