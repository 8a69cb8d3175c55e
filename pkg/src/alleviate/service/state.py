"""Application state: patient graphs, sessions, policy, alerts, and the event
log that makes all of it reconstructible.

Commands (note ingested, session opened, message received, feedback received)
are recorded with their inputs; everything else is re-derived on replay, which
works because the whole pipeline is seeded and deterministic.
"""

from __future__ import annotations

import datetime as _dt
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from alleviate.dialogue import DialogueContext, DialogueSession, step
from alleviate.kg import EntityId, KnowledgeGraph, entity, merge_into, to_tsv, union
from alleviate.linking import link_entities, resolve_conflicts
from alleviate.notes import ProviderNote, extract_recommendations, extract_triples
from alleviate.policy import FeedbackEvent, ResponsePolicy, policy_to_json, update_policy
from alleviate.screeners import TreeState
from alleviate.service.config import Artifacts, ServiceConfig, load_artifacts
from alleviate.service.events import CorruptLog, EventLog, EventRecord, read_events
from alleviate.service.webhooks import WebhookDeliverer

POLICY_SNAPSHOT_EVERY = 100


class StateError(Exception):
    http_status = 500


class UnknownResource(StateError):
    http_status = 404


class ValidationFailure(StateError):
    http_status = 422


class DuplicateFeedback(StateError):
    http_status = 409


class LogicalClock:
    """Deterministic timestamps: a fixed epoch advanced one second per call.

    Wall time would leak into alert payloads and break byte-for-byte
    reproducibility of two identically seeded runs.
    """

    def __init__(self, start: str = "2025-01-01T00:00:00+00:00"):
        self._t = _dt.datetime.fromisoformat(start)

    def __call__(self) -> str:
        self._t += _dt.timedelta(seconds=1)
        return self._t.isoformat().replace("+00:00", "Z")


@dataclass
class PatientState:
    graph: KnowledgeGraph
    merged: KnowledgeGraph | None = None  # cache, dropped on every write
    note_ids: set = field(default_factory=set)


def path_json(path) -> dict:
    return path.to_json()


class AppState:
    def __init__(self, config: ServiceConfig, artifacts: Artifacts | None = None):
        self.config = config
        self.art = artifacts or load_artifacts(config)
        self.clock = LogicalClock()
        self.lock = threading.RLock()
        self.log: EventLog | None = None

        self.patients: dict[EntityId, PatientState] = {}
        self.sessions: dict[str, DialogueSession] = {}
        self.session_counter = 0
        self.policy = ResponsePolicy(epsilon=config.rl.epsilon, alpha=config.rl.alpha)
        self.alerts: list[tuple[int, object]] = []  # (event seq, Alert)
        self.feedback_seen: set[tuple[str, str]] = set()
        self.message_meta: dict[str, tuple] = {}  # message_id -> (session_id, PolicyState|None, template_id)
        self.session_explanations: dict[str, list[dict]] = {}
        self.updates_since_snapshot = 0
        self.started_at = time.monotonic()

        self.webhooks: WebhookDeliverer | None = None
        if config.webhook_url:
            data_dir = Path(config.data_dir)
            self.webhooks = WebhookDeliverer(
                config.webhook_url,
                data_dir / "webhook-deliveries.jsonl",
                data_dir / "webhook-dead-letter.jsonl",
            )
        self._webhook_threads: list[threading.Thread] = []

    @classmethod
    def resume(cls, config: ServiceConfig, artifacts: Artifacts | None = None) -> "AppState":
        """Rebuild from the data directory's event log, then keep appending to it."""
        log_path = Path(config.data_dir) / "events.jsonl"
        state = cls(config, artifacts)
        state._apply_events(read_events(log_path))
        state.log = EventLog(log_path)
        return state

    # -- event plumbing -------------------------------------------------

    def _record(self, kind: str, payload: dict) -> int:
        # tick the clock even when not recording, so a replayed run sees the
        # same timestamp sequence as the live one did
        at = self.clock()
        if self.log is None:
            return 0
        return self.log.append(kind, payload, at).seq

    def _apply_events(self, events: list[EventRecord]):
        """Replay commands; derived events are consistency-checked by id."""
        for ev in events:
            if ev.kind == "SessionOpened":
                sid = self.open_session(ev.payload["patient_id"])
                if sid != ev.payload["session_id"]:
                    raise CorruptLog(ev.seq, f"session id drift: {sid} != {ev.payload['session_id']}")
            elif ev.kind == "NoteIngested":
                self.ingest_note(
                    ev.payload["patient_id"], ev.payload["note_id"], ev.payload["text"]
                )
            elif ev.kind == "MessageIn":
                reply = self.post_message(ev.payload["session_id"], ev.payload["text"])
                if reply["in_reply_to"] != ev.payload["message_id"]:
                    raise CorruptLog(ev.seq, "message id drift during replay")
            elif ev.kind == "FeedbackReceived":
                self.apply_feedback(
                    ev.payload["session_id"],
                    ev.payload["message_id"],
                    ev.payload["source"],
                    ev.payload["signal"],
                )
            # TripleAdded/LinkResolved/MessageOut/AlertRaised/PolicyUpdated are
            # derived from the commands above and re-emerge on their own

    # -- helpers ---------------------------------------------------------

    def _patient_entity(self, raw: str) -> EntityId:
        text = raw.strip()
        if ":" not in text:
            text = f"patient:{text}"
        try:
            pid = entity(text)
        except Exception as err:
            raise ValidationFailure(f"bad patient id {raw!r}: {err}") from err
        if pid.namespace != "patient":
            raise ValidationFailure(f"patient id must use the patient namespace, got {raw!r}")
        return pid

    def _patient_state(self, pid: EntityId) -> PatientState:
        if pid not in self.patients:
            self.patients[pid] = PatientState(graph=KnowledgeGraph(str(pid)))
        return self.patients[pid]

    def merged_graph(self, pid: EntityId) -> KnowledgeGraph:
        ps = self._patient_state(pid)
        if ps.merged is None:
            ps.merged = union(f"merged:{pid}", ps.graph, *self.art.kbs)
        return ps.merged

    def _ctx_for(self, pid: EntityId) -> DialogueContext:
        th = self.config.thresholds
        return DialogueContext(
            graph=self.merged_graph(pid),
            constraints=self.art.constraints,
            tree=self.art.tree,
            policy=self.policy,
            templates=self.art.templates,
            lexicon=self.art.lexicon,
            link_threshold=th.link,
            match_threshold=th.match,
            screener_thresholds={"flag_at": th.flag_at, "emergency_at": th.emergency_at},
            rng_seed=self.config.seed,
            clock=self.clock,
        )

    # -- commands ---------------------------------------------------------

    def ingest_note(self, patient_raw: str, note_id: str, text: str) -> tuple[int, list[str]]:
        with self.lock:
            pid = self._patient_entity(patient_raw)
            if not note_id or not str(note_id).strip():
                raise ValidationFailure("note_id must be non-empty")
            try:
                note = ProviderNote(str(note_id), pid, text, authored_at=self.clock())
            except ValueError as err:
                raise ValidationFailure(str(err)) from err

            self._record(
                "NoteIngested", {"patient_id": str(pid), "note_id": note.note_id, "text": text}
            )
            ps = self._patient_state(pid)
            ps.note_ids.add(note.note_id)

            added = [
                t for t in extract_triples(note, self.art.patterns) if ps.graph.add_triple(t)
            ]
            for t in added:
                self._record("TripleAdded", {"patient_id": str(pid), "triple": t.to_json()})

            candidates = []
            for kb in self.art.kbs:
                candidates.extend(
                    link_entities(ps.graph, kb, threshold=self.config.thresholds.link)
                )
            resolved = resolve_conflicts(candidates, list(self.art.guidelines))
            by_kb: dict[str, list] = {}
            for link in resolved:
                self._record(
                    "LinkResolved",
                    {
                        "patient_id": str(pid),
                        "link_id": link.link_id,
                        "source": str(link.source),
                        "target": str(link.target),
                        "kb_id": link.kb_id,
                        "score": link.score,
                        "status": link.status,
                        "rejected_by": link.rejected_by,
                    },
                )
                if link.status == "accepted":
                    by_kb.setdefault(link.kb_id, []).append(link)
            for kb in self.art.kbs:
                merge_into(ps.graph, kb, by_kb.get(kb.graph_id, []))
            ps.merged = None

            _, warnings = extract_recommendations(ps.graph, pid)
            return len(added), warnings

    def open_session(self, patient_raw: str) -> str:
        with self.lock:
            pid = self._patient_entity(patient_raw)
            self._patient_state(pid)
            self.session_counter += 1
            session_id = f"s{self.session_counter:04d}"
            self.sessions[session_id] = DialogueSession(
                session_id=session_id,
                patient_id=pid,
                tree_state=TreeState(self.art.tree.tree_id, session_id),
            )
            self.session_explanations[session_id] = []
            self._record("SessionOpened", {"session_id": session_id, "patient_id": str(pid)})
            return session_id

    def post_message(self, session_id: str, text: str) -> dict:
        with self.lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise UnknownResource(f"unknown session {session_id!r}")
            if not isinstance(text, str):
                raise ValidationFailure("message text must be a string")

            in_id = session.next_message_id()
            self._record("MessageIn", {"session_id": session_id, "message_id": in_id, "text": text})

            result = step(session, text, self._ctx_for(session.patient_id))
            out_id = session.turn_log[-1][0]

            alert_payloads = []
            for alert in result.alerts:
                # alert seq is its own counter, not the event seq, so polling
                # clients keep a stable cursor across restarts
                seq = len(self.alerts) + 1
                self.alerts.append((seq, alert))
                payload = dict(alert.to_json(), seq=seq)
                alert_payloads.append(payload)
                self._record("AlertRaised", payload)
                if alert.level == "emergency" and self.webhooks:
                    self._webhook_threads.append(
                        self.webhooks.deliver_async(payload, at=alert.created_at)
                    )

            explanation = [path_json(p) for p in result.explanation]
            selection = result.selection.to_json() if result.selection else None
            state_key = result.policy_state.key if result.policy_state else None

            self.message_meta[out_id] = (
                session_id,
                result.policy_state,
                result.reply.template_id,
            )
            self.session_explanations[session_id].append(
                {
                    "message_id": out_id,
                    "in_reply_to": in_id,
                    "selection": selection,
                    "explanation": explanation,
                }
            )
            self._record(
                "MessageOut",
                {
                    "session_id": session_id,
                    "message_id": out_id,
                    "in_reply_to": in_id,
                    "template_id": result.reply.template_id,
                    "action_type": result.reply.action_type,
                    "text": result.reply.text,
                    "state": state_key,
                    "alert_ids": [a.alert_id for a in result.alerts],
                },
            )
            return {
                "message_id": out_id,
                "in_reply_to": in_id,
                "reply": result.reply.text,
                "action_type": result.reply.action_type,
                "explanation": explanation,
                "alerts": alert_payloads,
            }

    def apply_feedback(self, session_id: str, message_id: str, source: str, signal: str) -> float:
        with self.lock:
            if session_id not in self.sessions:
                raise UnknownResource(f"unknown session {session_id!r}")
            meta = self.message_meta.get(message_id)
            if meta is None or meta[0] != session_id:
                raise UnknownResource(f"unknown message {message_id!r} in session {session_id!r}")
            try:
                event = FeedbackEvent(session_id, message_id, source, signal)
            except ValueError as err:
                raise ValidationFailure(str(err)) from err
            key = (message_id, source)
            if key in self.feedback_seen:
                raise DuplicateFeedback(f"feedback for {message_id} from {source} already recorded")
            _, policy_state, template_id = meta
            if policy_state is None:
                raise ValidationFailure("emergency replies do not take feedback")

            self.feedback_seen.add(key)
            self.policy = update_policy(self.policy, policy_state, template_id, event.reward)
            q_after = self.policy.value(policy_state, template_id)
            self._record(
                "FeedbackReceived",
                {
                    "session_id": session_id,
                    "message_id": message_id,
                    "source": source,
                    "signal": signal,
                },
            )
            self._record(
                "PolicyUpdated",
                {
                    "state": policy_state.key,
                    "template_id": template_id,
                    "reward": event.reward,
                    "q_after": q_after,
                    "count": self.policy.counts.get((policy_state, template_id), 0),
                },
            )
            self.updates_since_snapshot += 1
            if self.updates_since_snapshot >= POLICY_SNAPSHOT_EVERY:
                self.snapshot_policy()
            return q_after

    # -- queries ----------------------------------------------------------

    def alerts_since(self, since_seq: int = 0) -> list[dict]:
        with self.lock:
            return [
                dict(alert.to_json(), seq=seq)
                for seq, alert in self.alerts
                if seq > since_seq
            ]

    def graph_tsv(self, patient_raw: str) -> str:
        with self.lock:
            pid = self._patient_entity(patient_raw)
            if pid not in self.patients:
                raise UnknownResource(f"unknown patient {patient_raw!r}")
            return to_tsv(self.patients[pid].graph)

    def explanations(self, session_id: str) -> list[dict]:
        with self.lock:
            if session_id not in self.sessions:
                raise UnknownResource(f"unknown session {session_id!r}")
            return list(self.session_explanations[session_id])

    def uptime_s(self) -> float:
        return time.monotonic() - self.started_at

    # -- persistence ------------------------------------------------------

    def snapshot_policy(self):
        path = Path(self.config.data_dir) / "policy.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(policy_to_json(self.policy))
        self.updates_since_snapshot = 0

    def snapshot_graphs(self):
        out_dir = Path(self.config.data_dir) / "snapshots"
        out_dir.mkdir(parents=True, exist_ok=True)
        for pid, ps in self.patients.items():
            (out_dir / f"{pid.local}.tsv").write_text(to_tsv(ps.graph))

    def close(self):
        with self.lock:
            self.snapshot_policy()
            self.snapshot_graphs()
        for thread in self._webhook_threads:
            thread.join(timeout=5)
        if self.log is not None:
            self.log.close()


def replay_events(
    events: list[EventRecord], config: ServiceConfig, artifacts: Artifacts | None = None
) -> AppState:
    """State implied by a command log; nothing is written anywhere."""
    state = AppState(config, artifacts)
    state._apply_events(events)
    return state
