#!/usr/bin/env python3
"""Exercise the HTTP service end to end in-process: ingest a note, chat,
leave feedback, poll alerts, then rebuild the whole state from the command
log alone and show it matches."""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from alleviate.service import AppState, bundled_config, read_events, replay_events
from alleviate.service.api import create_app

workdir = Path(tempfile.mkdtemp(prefix="alleviate-demo-"))
config = bundled_config(str(workdir / "data"))
state = AppState.resume(config)

with TestClient(create_app(state)) as client:
    client.post("/v1/notes", json={
        "patient_id": "p1",
        "note_id": "n1",
        "text": "Patient is taking sertraline 50 mg daily. Recommend exercise 5 times per week.",
    })
    sid = client.post("/v1/sessions", json={"patient_id": "p1"}).json()["session_id"]

    for text in ["I exercised 5 days this week", "I feel dizzy"]:
        out = client.post(f"/v1/sessions/{sid}/messages", json={"text": text}).json()
        print(f"patient: {text}")
        print(f"bot [{out['action_type']}]: {out['reply']}\n")

    q = client.post(
        f"/v1/sessions/{sid}/feedback",
        json={"message_id": out["message_id"], "source": "patient", "signal": "positive"},
    ).json()["q_after"]
    print(f"feedback applied, updated template value: {q}")

    out = client.post(f"/v1/sessions/{sid}/messages", json={"text": "I have a plan to kill myself tonight"}).json()
    alerts = client.get("/v1/alerts", params={"since_seq": 0}).json()["alerts"]
    print(f"alert feed: {[(a['seq'], a['level']) for a in alerts]}")

    live_tsv = client.get("/v1/patients/p1/graph").text

# every request above appended commands to the event log; replaying them
# alone reproduces the graphs, sessions, and learned policy
events = read_events(Path(config.data_dir) / "events.jsonl")
replayed = replay_events(events, config)
print(f"\nreplayed {len(events)} events from {config.data_dir}")
print(f"graph identical after replay: {replayed.graph_tsv('p1') == live_tsv}")
print(f"policy cells after replay: {len(replayed.policy.q)}")
