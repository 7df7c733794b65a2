"""HTTP API tests: CRUD, state machine, live progress, reports."""

from __future__ import annotations

import json
import time

import pytest
from fastapi.testclient import TestClient

from wordprobe.providers import MockProvider
from wordprobe.service import create_app

WORDS = "\n".join(f"word{i:03d}" for i in range(10)) + "\n"


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "api.db", poll_interval=0.02)
    with TestClient(app) as c:
        c.store_path = tmp_path / "api.db"
        yield c


@pytest.fixture
def slow_client(tmp_path):
    def factory(spec, store):
        return MockProvider(battery=store.get_battery(spec.battery_id), latency=0.02)

    app = create_app(tmp_path / "slow.db", provider_factory=factory, poll_interval=0.02)
    with TestClient(app) as c:
        yield c


def create_experiment(client, name="exp", values=None, dispatch=None) -> dict:
    response = client.post(
        "/api/experiments",
        json={
            "name": name,
            "values": values or {"model": "ChatGPT 3.5", "temperature": 0},
            "dispatch": dispatch or {"max_requests_per_second": 100000},
        },
    )
    assert response.status_code == 201, response.text
    return response.json()


def upload_words(client, experiment_id, body=WORDS):
    return client.post(
        f"/api/experiments/{experiment_id}/words",
        content=body.encode("utf-8") if isinstance(body, str) else body,
        headers={"Content-Type": "text/plain"},
    )


def wait_for_state(client, experiment_id, states, timeout=10.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        doc = client.get(f"/api/experiments/{experiment_id}/progress").json()
        if doc["state"] in states:
            return doc
        time.sleep(0.02)
    raise AssertionError(f"experiment never reached {states}")


def test_templates_endpoint_shape(client):
    docs = client.get("/api/experiment-templates").json()
    assert len(docs) == 1
    config = docs[0]["configuration"]
    model = config["model"]
    assert model["type"] == "select"
    assert model["options"] == [{"ChatGPT 3.5": "ChatGPT 3.5"}, {"ChatGPT 4": "ChatGPT 4"}]
    temperature = config["temperature"]
    assert temperature["type"] == "number"
    assert (temperature["min"], temperature["max"], temperature["step"]) == (0, 1, 0.1)


def test_create_experiment_draft(client):
    doc = create_experiment(client)
    assert doc["state"] == "Draft"
    assert doc["model"] == "ChatGPT 3.5"
    fetched = client.get(f"/api/experiments/{doc['id']}").json()
    assert fetched["config"] == {"model": "ChatGPT 3.5", "temperature": 0.0}


def test_create_experiment_validation_errors(client):
    response = client.post(
        "/api/experiments",
        json={"name": "bad", "values": {"model": "ChatGPT 3.5", "temperature": 1.5}},
    )
    assert response.status_code == 400
    response = client.post(
        "/api/experiments",
        json={"name": "bad", "values": {"model": "no-such-model", "temperature": 0}},
    )
    assert response.status_code == 400
    response = client.post("/api/experiments", json={"values": {}})
    assert response.status_code == 400  # missing name


def test_unknown_experiment_is_404(client):
    for path in ("", "/progress", "/histogram", "/results"):
        assert client.get(f"/api/experiments/ghost{path}").status_code == 404
    for action in ("start", "pause", "stop", "words"):
        assert client.post(f"/api/experiments/ghost/{action}").status_code == 404


def test_word_upload_reports_ingest_counts(client):
    doc = create_experiment(client)
    response = upload_words(client, doc["id"], "Perro\nperro\n# c\n\ngato\n")
    assert response.status_code == 200
    body = response.json()
    assert body["words"] == 2
    assert body["report"]["dropped_duplicates"] == 1
    assert body["report"]["skipped_comments"] == 1


def test_word_upload_rejects_bad_utf8(client):
    doc = create_experiment(client)
    response = upload_words(client, doc["id"], b"\xff\xfe")
    assert response.status_code == 400


def test_word_upload_rejects_empty(client):
    doc = create_experiment(client)
    assert upload_words(client, doc["id"], "# none\n").status_code == 400


def test_start_requires_words(client):
    doc = create_experiment(client)
    assert client.post(f"/api/experiments/{doc['id']}/start").status_code == 400


def test_start_runs_to_complete(client):
    doc = create_experiment(client)
    upload_words(client, doc["id"])
    response = client.post(f"/api/experiments/{doc['id']}/start")
    assert response.status_code == 200
    assert response.json()["state"] == "Running"
    progress = wait_for_state(client, doc["id"], {"Complete"})
    assert progress["answered"] == progress["total"] == 40
    assert progress["yes"] + progress["no"] + progress["unparseable"] == 40


def test_start_on_complete_is_conflict(client):
    doc = create_experiment(client)
    upload_words(client, doc["id"])
    client.post(f"/api/experiments/{doc['id']}/start")
    wait_for_state(client, doc["id"], {"Complete"})
    assert client.post(f"/api/experiments/{doc['id']}/start").status_code == 409


def test_word_upload_after_start_is_conflict(client):
    doc = create_experiment(client)
    upload_words(client, doc["id"])
    client.post(f"/api/experiments/{doc['id']}/start")
    wait_for_state(client, doc["id"], {"Complete"})
    assert upload_words(client, doc["id"]).status_code == 409


def test_stop_is_idempotent(slow_client):
    doc = create_experiment(slow_client)
    upload_words(slow_client, doc["id"])
    slow_client.post(f"/api/experiments/{doc['id']}/start")
    first = slow_client.post(f"/api/experiments/{doc['id']}/stop")
    assert first.status_code == 200
    again = slow_client.post(f"/api/experiments/{doc['id']}/stop")
    assert again.status_code == 200
    assert again.json()["state"] in ("Stopped", "Complete")


def test_stop_on_draft_is_conflict(client):
    doc = create_experiment(client)
    assert client.post(f"/api/experiments/{doc['id']}/stop").status_code == 409


def test_pause_resume_cycle(slow_client):
    doc = create_experiment(slow_client)
    upload_words(slow_client, doc["id"])
    slow_client.post(f"/api/experiments/{doc['id']}/start")
    paused = slow_client.post(f"/api/experiments/{doc['id']}/pause")
    assert paused.status_code == 200
    assert paused.json()["state"] == "Paused"
    # pause again: no-op
    assert slow_client.post(f"/api/experiments/{doc['id']}/pause").json()["state"] == "Paused"
    resumed = slow_client.post(f"/api/experiments/{doc['id']}/start")
    assert resumed.status_code == 200
    assert resumed.json()["state"] == "Running"
    wait_for_state(slow_client, doc["id"], {"Complete"})


def test_pause_on_draft_is_conflict(client):
    doc = create_experiment(client)
    assert client.post(f"/api/experiments/{doc['id']}/pause").status_code == 409


def test_stopped_run_resumes_exactly_once(slow_client):
    doc = create_experiment(slow_client)
    upload_words(slow_client, doc["id"])
    slow_client.post(f"/api/experiments/{doc['id']}/start")
    time.sleep(0.08)
    slow_client.post(f"/api/experiments/{doc['id']}/stop")
    partial = wait_for_state(slow_client, doc["id"], {"Stopped", "Complete"})
    restarted = slow_client.post(f"/api/experiments/{doc['id']}/start")
    if partial["state"] == "Stopped":
        assert restarted.status_code == 200
        final = wait_for_state(slow_client, doc["id"], {"Complete"})
        assert final["answered"] == 40


def test_histogram_endpoint_satisfies_invariants(client):
    doc = create_experiment(client)
    upload_words(client, doc["id"])
    client.post(f"/api/experiments/{doc['id']}/start")
    wait_for_state(client, doc["id"], {"Complete"})
    hist = client.get(f"/api/experiments/{doc['id']}/histogram").json()
    assert sum(b["count"] for b in hist["bins"]) == hist["total_complete"]
    assert hist["total_complete"] + hist["total_excluded"] == 10


def test_results_filter_and_formats(client):
    doc = create_experiment(client)
    upload_words(client, doc["id"])
    client.post(f"/api/experiments/{doc['id']}/start")
    wait_for_state(client, doc["id"], {"Complete"})

    rows = client.get(f"/api/experiments/{doc['id']}/results").json()
    assert len(rows) == 40

    hist = client.get(f"/api/experiments/{doc['id']}/histogram").json()
    some_code = hist["bins"][0]["code"]
    some_count = hist["bins"][0]["count"]
    filtered = client.get(
        f"/api/experiments/{doc['id']}/results", params={"combination": some_code}
    ).json()
    assert len(filtered) == some_count * 4

    csv_response = client.get(
        f"/api/experiments/{doc['id']}/results", params={"format": "csv"}
    )
    assert csv_response.headers["content-type"].startswith("text/csv")
    assert len(csv_response.text.splitlines()) == 41

    bad = client.get(f"/api/experiments/{doc['id']}/results", params={"combination": "01x1"})
    assert bad.status_code == 400


def test_event_stream_is_monotone_and_terminates(client):
    doc = create_experiment(client)
    upload_words(client, doc["id"])
    client.post(f"/api/experiments/{doc['id']}/start")

    events = []
    with client.stream("GET", f"/api/experiments/{doc['id']}/events") as response:
        assert response.headers["content-type"].startswith("text/event-stream")
        for line in response.iter_lines():
            if line.startswith("data: "):
                events.append(json.loads(line[len("data: "):]))

    assert events, "no events received"
    answered = [e["answered"] for e in events]
    assert answered == sorted(answered)
    assert events[-1]["state"] in ("Complete", "Stopped")
    assert events[-1]["answered"] == 40


def test_experiments_listing(client):
    create_experiment(client, name="one")
    create_experiment(client, name="two")
    names = [e["name"] for e in client.get("/api/experiments").json()]
    assert names == ["one", "two"]
