"""Command line entry points: serve, ingest-note, check-constraints, replay,
eval-screener."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from alleviate.kg import KnowledgeGraphError, entity, from_tsv
from alleviate.safety import ParseError, check_action, parse_constraints
from alleviate.screeners import TreeState, advance, load_tree, match_concepts
from alleviate.service.config import ConfigError, bundled_config, load_config
from alleviate.service.events import CorruptLog, read_events
from alleviate.service.state import AppState, StateError, replay_events


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _config_or_bundled(path: str | None, data_dir: str):
    if path or os.environ.get("ALLEVIATE_CONFIG"):
        return load_config(path)
    return bundled_config(data_dir)


def cmd_serve(args) -> int:
    import uvicorn

    from alleviate.service.api import create_app

    try:
        config = load_config(args.config)
    except ConfigError as err:
        return _fail(str(err))
    state = AppState.resume(config)
    uvicorn.run(create_app(state), host=config.host, port=config.port, log_level="warning")
    return 0


def cmd_ingest_note(args) -> int:
    try:
        text = Path(args.file).read_text()
    except OSError as err:
        return _fail(f"{args.file}: {err.strerror or err}")
    try:
        config = load_config(args.config)
    except ConfigError as err:
        return _fail(str(err))
    state = AppState.resume(config)
    note_id = args.note_id or Path(args.file).stem
    try:
        added, warnings = state.ingest_note(args.patient, note_id, text)
    except StateError as err:
        state.close()
        return _fail(str(err))
    state.close()
    print(f"note {note_id}: {added} triples added")
    for warning in warnings:
        print(f"warning: {warning}")
    return 0


def cmd_check_constraints(args) -> int:
    try:
        constraints = parse_constraints(Path(args.rules).read_text())
        graph = from_tsv(Path(args.graph).read_text(), Path(args.graph).stem)
        bindings_raw = json.loads(Path(args.bindings).read_text())
        bindings = {name: entity(value) for name, value in bindings_raw.items()}
        verdict = check_action(args.action, bindings, graph, constraints)
    except OSError as err:
        return _fail(f"{err.filename}: {err.strerror}")
    except (ParseError, KnowledgeGraphError, ValueError, KeyError) as err:
        return _fail(str(err))
    # a Denied verdict is still a successful check
    print(json.dumps(verdict.to_json(), indent=2))
    return 0


def cmd_replay(args) -> int:
    log_path = Path(args.log_dir) / "events.jsonl"
    try:
        events = read_events(log_path)
        config = _config_or_bundled(args.config, args.log_dir)
        state = replay_events(events, config)
    except (CorruptLog, ConfigError, StateError) as err:
        return _fail(str(err))
    messages = sum(1 for e in events if e.kind == "MessageIn")
    print(f"events: {len(events)}")
    print(f"patients: {len(state.patients)}")
    print(f"sessions: {len(state.sessions)}")
    print(f"messages: {messages}")
    print(f"alerts: {len(state.alerts)}")
    print(f"policy cells: {len(state.policy.q)}")
    return 0


def cmd_eval_screener(args) -> int:
    try:
        tree = load_tree(Path(args.tree).read_text())
        corpus = json.loads(Path(args.corpus).read_text())
    except OSError as err:
        return _fail(f"{err.filename}: {err.strerror}")
    except (ValueError, KeyError) as err:
        return _fail(str(err))

    state = TreeState(tree.tree_id, "eval")
    confusion: dict[tuple[int, int], int] = {}
    exact = 0
    for index, item in enumerate(corpus, start=1):
        matches = match_concepts(item["text"], tree)
        matched = max((tree.node(m.node_id).severity for m in matches), default=0)
        state, alert = advance(state, tree, matches, f"u{index}")
        label = int(item["label"])
        confusion[(label, matched)] = confusion.get((label, matched), 0) + 1
        exact += matched == label
        print(
            f"step={index} label={label} matched={matched} "
            f"confirmed={state.confirmed_level} escalation={state.escalation} "
            f"alert={alert.level if alert else '-'}"
        )
    print(f"confusion ({exact}/{len(corpus)} exact):")
    for (label, matched), count in sorted(confusion.items()):
        print(f"  label {label} -> matched {matched}: {count}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="alleviate")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help="config file (or set ALLEVIATE_CONFIG)")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("ingest-note", help="add one provider note to a patient graph")
    p.add_argument("patient")
    p.add_argument("file")
    p.add_argument("--config", help="config file (or set ALLEVIATE_CONFIG)")
    p.add_argument("--note-id", help="note id (default: file stem)")
    p.set_defaults(fn=cmd_ingest_note)

    p = sub.add_parser("check-constraints", help="evaluate one action against a rules file")
    p.add_argument("rules")
    p.add_argument("graph")
    p.add_argument("action")
    p.add_argument("bindings")
    p.set_defaults(fn=cmd_check_constraints)

    p = sub.add_parser("replay", help="rebuild state from an event log and summarize")
    p.add_argument("log_dir")
    p.add_argument("--config", help="config file (or set ALLEVIATE_CONFIG)")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("eval-screener", help="trace a labeled corpus through a tree")
    p.add_argument("tree")
    p.add_argument("corpus")
    p.set_defaults(fn=cmd_eval_screener)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
