import threading

import pytest
from fastapi.testclient import TestClient

from synth import benchmark_corpus, benchmark_dataset, write_jsonl
from uniqa.pipeline import PipelineConfig, ingest_and_index
from uniqa.retrieval import load_index
from uniqa.service import create_app


@pytest.fixture(scope="module")
def service(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    corpus = write_jsonl(root / "corpus.jsonl", benchmark_corpus(10))
    config = PipelineConfig(k=5, n=3, index_path=str(root / "idx"),
                            sessions_db=str(root / "sessions.db"))
    ingest_and_index(corpus, config)
    index = load_index(config.index_path)
    app = create_app(config, index=index)
    return TestClient(app), config, index


def test_healthz(service):
    client, _, index = service
    body = client.get("/healthz").json()
    assert body == {"status": "ok", "clues": len(index)}


def test_create_session_and_ask(service):
    client, _, _ = service
    sid = client.post("/v1/sessions").json()["session_id"]
    assert sid
    question = benchmark_dataset(1, 10)[0]["question"]
    reply = client.post(f"/v1/sessions/{sid}/ask", json={"question": question})
    assert reply.status_code == 200
    body = reply.json()
    assert set(body) == {"answer", "clues", "contextual_question", "timings"}
    assert body["clues"][0]["id"] == "text000"
    assert {"id", "modality", "score", "text"} <= set(body["clues"][0])
    assert body["contextual_question"]["turn_count"] == 0


def test_ask_builds_conversational_context(service):
    client, _, _ = service
    sid = client.post("/v1/sessions").json()["session_id"]
    first = benchmark_dataset(2, 10)[0]
    client.post(f"/v1/sessions/{sid}/ask", json={"question": first["question"]})
    body = client.post(f"/v1/sessions/{sid}/ask",
                       json={"question": "And where is that?"}).json()
    cq = body["contextual_question"]
    assert cq["turn_count"] == 1
    assert f"Q: {first['question']}" in cq["text"]
    assert cq["text"].endswith("Q: And where is that?")


def test_get_session_returns_transcript(service):
    client, _, _ = service
    sid = client.post("/v1/sessions").json()["session_id"]
    question = benchmark_dataset(1, 10)[0]["question"]
    answer = client.post(f"/v1/sessions/{sid}/ask",
                         json={"question": question}).json()["answer"]["text"]
    transcript = client.get(f"/v1/sessions/{sid}").json()
    assert transcript["turns"] == [{"question": question, "answer": answer}]


def test_ask_unknown_session_is_404_with_error_body(service):
    client, _, _ = service
    reply = client.post("/v1/sessions/nope/ask", json={"question": "hi"})
    assert reply.status_code == 404
    body = reply.json()
    assert body["error"]["stage"] == "lookup"
    assert "nope" in body["error"]["message"]


def test_ask_empty_question_is_400(service):
    client, _, _ = service
    sid = client.post("/v1/sessions").json()["session_id"]
    reply = client.post(f"/v1/sessions/{sid}/ask", json={"question": "   "})
    assert reply.status_code == 400
    assert reply.json()["error"]["stage"] == "validate"


def test_get_clue(service):
    client, _, _ = service
    body = client.get("/v1/clues/table010").json()
    assert body["modality"] == "table"
    assert body["text"].startswith("Row one's")
    assert client.get("/v1/clues/absent").status_code == 404


def test_sessions_survive_restart(service, tmp_path):
    client, config, index = service
    sid = client.post("/v1/sessions").json()["session_id"]
    question = benchmark_dataset(1, 10)[0]["question"]
    client.post(f"/v1/sessions/{sid}/ask", json={"question": question})

    restarted = TestClient(create_app(config, index=index))
    transcript = restarted.get(f"/v1/sessions/{sid}").json()
    assert len(transcript["turns"]) == 1
    assert transcript["turns"][0]["question"] == question


def test_concurrent_asks_match_sequential_replay(tmp_path):
    corpus = write_jsonl(tmp_path / "corpus.jsonl", benchmark_corpus(10))
    questions = [ex["question"] for ex in benchmark_dataset(10, 10)]
    per_session = {f"s{i}": questions[2 * i: 2 * i + 2] for i in range(5)}

    def collect(db_name):
        config = PipelineConfig(k=5, n=3, index_path=str(tmp_path / "idx"),
                                sessions_db=str(tmp_path / db_name))
        if not (tmp_path / "idx").exists():
            ingest_and_index(corpus, config)
        client = TestClient(create_app(config, index=load_index(config.index_path)))
        sids = {name: client.post("/v1/sessions").json()["session_id"]
                for name in per_session}
        return client, sids

    client, sids = collect("a.db")
    results: dict[str, list[dict]] = {name: [] for name in per_session}

    def worker(name):
        for q in per_session[name]:
            body = client.post(f"/v1/sessions/{sids[name]}/ask",
                               json={"question": q}).json()
            body.pop("timings")
            results[name].append(body)

    threads = [threading.Thread(target=worker, args=(name,)) for name in per_session]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    client2, sids2 = collect("b.db")
    for name, qs in per_session.items():
        for i, q in enumerate(qs):
            body = client2.post(f"/v1/sessions/{sids2[name]}/ask",
                                json={"question": q}).json()
            body.pop("timings")
            assert body == results[name][i], f"{name} turn {i} diverged"
