"""HTTP API tests over the in-process test client: status codes, event
polling, long-poll, and the SSE stream."""

from __future__ import annotations

import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from decomp.api import create_app
from decomp.gateway import Gateway, ScriptedBackend, ScriptedExchange
from decomp.model import AgentSpec, Registry, ToolSpec
from decomp.orchestrator import Orchestrator, OrchestratorConfig
from decomp.scheduler import ExecutionConfig
from decomp.session import SessionLog, SessionService
from decomp.toolbox import Toolbox

PLAN_REPLY = json.dumps(
    {
        "problem_id": "p",
        "rationale": "direct",
        "subproblems": [
            {
                "id": "solve",
                "description": "task solve",
                "domain_tags": ["general"],
                "depends_on": [],
                "inputs": {},
            }
        ],
    }
)
READY_REPLY = json.dumps({"status": "ready", "constraints": ["exact total"]})


def make_client(tmp_path, orc_exchanges=None):
    if orc_exchanges is None:
        orc_exchanges = [
            ScriptedExchange("shopping list", "How many items are we adding up?"),
            ScriptedExchange("apples", READY_REPLY),
            ScriptedExchange("plan JSON only", PLAN_REPLY),
            ScriptedExchange("Subproblem solutions", "Your total is 5."),
        ]
    gateway = Gateway()
    gateway.register_backend("orc", ScriptedBackend(list(orc_exchanges)))
    gateway.register_backend(
        "spec", ScriptedBackend([ScriptedExchange("task solve", "5")])
    )
    service = SessionService(
        store=SessionLog(tmp_path),
        orchestrator=Orchestrator(gateway, OrchestratorConfig(backend_id="orc")),
        registry=Registry(
            agents=[
                AgentSpec(
                    id="helper",
                    display_name="Helper",
                    domain_tags=("general",),
                    persona="You help.",
                    backend_id="spec",
                )
            ],
            tools=[
                ToolSpec(id="calculator", domain_tags=("arithmetic",), description="m")
            ],
        ),
        gateway=gateway,
        toolbox=Toolbox(),
        exec_config=ExecutionConfig(max_parallel=2),
    )
    return TestClient(create_app(service)), service


def open_session(client):
    response = client.post(
        "/sessions", json={"problem": "Please add up my shopping list"}
    )
    assert response.status_code == 201
    return response.json()


def test_healthz(tmp_path):
    client, _ = make_client(tmp_path)
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_create_session_returns_first_question(tmp_path):
    client, _ = make_client(tmp_path)
    view = open_session(client)
    assert view["phase"] == "gathering"
    assert view["last_seq"] == 2  # user_msg + the orchestrator's question
    assert view["plan"] is None
    assert view["final_answer"] is None


def test_create_session_empty_problem_is_400(tmp_path):
    client, _ = make_client(tmp_path)
    response = client.post("/sessions", json={"problem": "  "})
    assert response.status_code == 400
    assert response.json()["code"] == "bad_input"


def test_create_session_wrong_type_is_400(tmp_path):
    client, _ = make_client(tmp_path)
    response = client.post("/sessions", json={"problem": 7})
    assert response.status_code == 400


def test_create_session_bad_json_body_is_400(tmp_path):
    client, _ = make_client(tmp_path)
    response = client.post(
        "/sessions", content=b"{oops", headers={"Content-Type": "application/json"}
    )
    assert response.status_code == 400


def test_unknown_session_is_404(tmp_path):
    client, _ = make_client(tmp_path)
    assert client.get("/sessions/ghost").status_code == 404
    assert client.get("/sessions/ghost/events").status_code == 404
    response = client.post("/sessions/ghost/messages", json={"text": "hi"})
    assert response.status_code == 404
    assert response.json()["code"] == "not_found"


def test_full_flow_over_http(tmp_path):
    client, service = make_client(tmp_path)
    sid = open_session(client)["id"]

    response = client.post(
        f"/sessions/{sid}/messages", json={"text": "2 apples and 3 pears"}
    )
    assert response.status_code == 200
    view = response.json()
    assert view["phase"] == "awaiting_approval"
    assert view["plan"]["subproblems"][0]["assignee"]["id"] == "helper"

    response = client.post(f"/sessions/{sid}/messages", json={"text": "yes"})
    assert response.status_code == 200
    service.wait_until_settled(sid, timeout_s=10)

    view = client.get(f"/sessions/{sid}").json()
    assert view["phase"] == "done"
    assert view["final_answer"]["text"] == "Your total is 5."

    events = client.get(f"/sessions/{sid}/events").json()
    kinds = [e["kind"] for e in events["events"]]
    assert kinds[0] == "user_msg"
    assert kinds[-1] == "final_answer"
    assert events["phase"] == "done"
    assert events["last_seq"] == events["events"][-1]["seq"]


def test_post_after_done_is_409(tmp_path):
    client, service = make_client(tmp_path)
    sid = open_session(client)["id"]
    client.post(f"/sessions/{sid}/messages", json={"text": "2 apples and 3 pears"})
    client.post(f"/sessions/{sid}/messages", json={"text": "yes"})
    service.wait_until_settled(sid, timeout_s=10)
    response = client.post(f"/sessions/{sid}/messages", json={"text": "more"})
    assert response.status_code == 409
    assert response.json()["code"] == "wrong_phase"


def test_events_since_filters(tmp_path):
    client, _ = make_client(tmp_path)
    sid = open_session(client)["id"]
    body = client.get(f"/sessions/{sid}/events", params={"since": 1}).json()
    assert [e["seq"] for e in body["events"]] == [2]
    body = client.get(f"/sessions/{sid}/events", params={"since": 2}).json()
    assert body["events"] == []
    assert body["last_seq"] == 2


def test_events_long_poll_wakes(tmp_path):
    client, service = make_client(tmp_path)
    sid = open_session(client)["id"]
    results = {}

    def wait_for_next():
        results["body"] = client.get(
            f"/sessions/{sid}/events", params={"since": 2, "wait_ms": 5000}
        ).json()

    thread = threading.Thread(target=wait_for_next)
    thread.start()
    time.sleep(0.05)
    service.post_message(sid, "2 apples and 3 pears")
    thread.join(5)
    assert not thread.is_alive()
    seqs = [e["seq"] for e in results["body"]["events"]]
    assert seqs[0] == 3


def test_sse_stream_ends_with_end_event(tmp_path):
    client, service = make_client(tmp_path)
    sid = open_session(client)["id"]
    client.post(f"/sessions/{sid}/messages", json={"text": "2 apples and 3 pears"})
    client.post(f"/sessions/{sid}/messages", json={"text": "yes"})
    service.wait_until_settled(sid, timeout_s=10)

    collected = []
    with client.stream("GET", f"/sessions/{sid}/events/stream") as response:
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/event-stream")
        for line in response.iter_lines():
            collected.append(line)
            if line.startswith("event: end"):
                break

    data_lines = [l for l in collected if l.startswith("data: ")]
    payloads = [json.loads(l[len("data: ") :]) for l in data_lines]
    kinds = [p["kind"] for p in payloads if "kind" in p]
    assert kinds[0] == "user_msg"
    assert "final_answer" in kinds
    assert any(l.startswith("event: end") for l in collected)


def test_sse_stream_resumes_from_since(tmp_path):
    client, service = make_client(tmp_path)
    sid = open_session(client)["id"]
    client.post(f"/sessions/{sid}/messages", json={"text": "2 apples and 3 pears"})
    client.post(f"/sessions/{sid}/messages", json={"text": "yes"})
    service.wait_until_settled(sid, timeout_s=10)
    last = client.get(f"/sessions/{sid}").json()["last_seq"]

    with client.stream(
        "GET", f"/sessions/{sid}/events/stream", params={"since": last - 1}
    ) as response:
        for line in response.iter_lines():
            if line.startswith("data: ") and "final_answer" in line:
                payload = json.loads(line[len("data: ") :])
                assert payload["seq"] == last
                break
        else:
            pytest.fail("final_answer event not streamed")


def test_sse_stream_unknown_session_404s_before_streaming(tmp_path):
    client, _ = make_client(tmp_path)
    assert client.get("/sessions/ghost/events/stream").status_code == 404
