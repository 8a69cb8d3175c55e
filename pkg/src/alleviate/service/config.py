"""Service configuration: file paths, thresholds, and fail-fast validation.

Every artifact referenced by the config is parsed at load time so a bad rules
file stops the process before it takes patient traffic.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from alleviate.dialogue import load_lexicon, load_templates
from alleviate.kg import KnowledgeGraphError, from_tsv
from alleviate.linking import GuidelineRule
from alleviate.notes import PatternCompileError, load_pattern_pack
from alleviate.safety import ParseError, parse_constraints
from alleviate.screeners import load_tree

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8080
CONFIG_ENV_VAR = "ALLEVIATE_CONFIG"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class Thresholds:
    link: float = 0.75
    match: float = 0.70
    flag_at: int = 1
    emergency_at: int = 4

    def __post_init__(self):
        if not 0 < self.link <= 1:
            raise ConfigError(f"thresholds.link {self.link} outside (0, 1]")
        if not 0 < self.match <= 1:
            raise ConfigError(f"thresholds.match {self.match} outside (0, 1]")
        if not 1 <= self.flag_at <= self.emergency_at:
            raise ConfigError(
                f"need 1 <= flag_at <= emergency_at, got {self.flag_at}/{self.emergency_at}"
            )


@dataclass(frozen=True)
class RLParams:
    epsilon: float = 0.1
    alpha: float = 0.1

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ConfigError(f"rl.epsilon {self.epsilon} outside [0, 1]")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"rl.alpha {self.alpha} outside (0, 1]")


@dataclass(frozen=True)
class ServiceConfig:
    patterns_path: str
    rules_path: str
    tree_path: str
    templates_path: str
    lexicon_path: str
    kb_paths: tuple[str, ...]
    data_dir: str
    guidelines_path: str | None = None
    webhook_url: str | None = None
    bearer_token: str | None = None
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    thresholds: Thresholds = field(default_factory=Thresholds)
    rl: RLParams = field(default_factory=RLParams)
    seed: int = 0


@dataclass(frozen=True)
class Artifacts:
    """Parsed clinician-authored inputs, loaded once at startup."""

    patterns: list
    constraints: list
    tree: object
    templates: dict
    lexicon: dict
    kbs: tuple
    guidelines: tuple


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"{what} file {path}: {err.strerror or err}") from err


def load_artifacts(config: ServiceConfig) -> Artifacts:
    """Parse every referenced file; ConfigError names the offending path."""
    try:
        patterns = load_pattern_pack(_read(config.patterns_path, "pattern pack"))
    except (PatternCompileError, ValueError, KeyError) as err:
        raise ConfigError(f"pattern pack {config.patterns_path}: {err}") from err
    try:
        constraints = parse_constraints(_read(config.rules_path, "safety rules"))
    except ParseError as err:
        raise ConfigError(f"safety rules {config.rules_path}: {err}") from err
    try:
        tree = load_tree(_read(config.tree_path, "questionnaire tree"))
    except (ValueError, KeyError) as err:
        raise ConfigError(f"questionnaire tree {config.tree_path}: {err}") from err
    try:
        templates = load_templates(_read(config.templates_path, "template table"))
    except (ValueError, KeyError) as err:
        raise ConfigError(f"template table {config.templates_path}: {err}") from err
    try:
        lexicon = load_lexicon(_read(config.lexicon_path, "intent lexicon"))
    except (ValueError, KeyError) as err:
        raise ConfigError(f"intent lexicon {config.lexicon_path}: {err}") from err

    kbs = []
    for path in config.kb_paths:
        kb_id = Path(path).stem
        try:
            kbs.append(from_tsv(_read(path, "knowledge base"), kb_id))
        except KnowledgeGraphError as err:
            raise ConfigError(f"knowledge base {path}: {err}") from err

    guidelines: list[GuidelineRule] = []
    if config.guidelines_path:
        try:
            items = json.loads(_read(config.guidelines_path, "guideline rules"))
            guidelines = [GuidelineRule.from_json(item) for item in items]
        except (ValueError, KeyError) as err:
            raise ConfigError(f"guideline rules {config.guidelines_path}: {err}") from err

    return Artifacts(
        patterns=patterns,
        constraints=constraints,
        tree=tree,
        templates=templates,
        lexicon=lexicon,
        kbs=tuple(kbs),
        guidelines=tuple(guidelines),
    )


def load_config(path: str | None = None) -> ServiceConfig:
    """Read a JSON config file; the ALLEVIATE_CONFIG env var overrides `path`.

    Relative paths inside the file resolve against the file's directory.
    """
    path = os.environ.get(CONFIG_ENV_VAR) or path
    if not path:
        raise ConfigError(f"no config path given and {CONFIG_ENV_VAR} is unset")
    try:
        raw = json.loads(_read(path, "config"))
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path}: {err}") from err

    base = Path(path).resolve().parent

    def resolved(p):
        return str(base / p) if p else p

    listen = raw.get("listen", {})
    try:
        config = ServiceConfig(
            patterns_path=resolved(raw["patterns"]),
            rules_path=resolved(raw["safety_rules"]),
            tree_path=resolved(raw["tree"]),
            templates_path=resolved(raw["templates"]),
            lexicon_path=resolved(raw["lexicon"]),
            kb_paths=tuple(resolved(p) for p in raw["kb"]),
            data_dir=resolved(raw["data_dir"]),
            guidelines_path=resolved(raw.get("guidelines")),
            webhook_url=raw.get("webhook_url"),
            bearer_token=raw.get("bearer_token"),
            host=listen.get("host", DEFAULT_HOST),
            port=int(listen.get("port", DEFAULT_PORT)),
            thresholds=Thresholds(**raw.get("thresholds", {})),
            rl=RLParams(**raw.get("rl", {})),
            seed=int(raw.get("seed", 0)),
        )
    except KeyError as err:
        raise ConfigError(f"config {path}: missing key {err}") from err
    except TypeError as err:
        raise ConfigError(f"config {path}: {err}") from err

    load_artifacts(config)  # fail fast on any broken artifact
    Path(config.data_dir).mkdir(parents=True, exist_ok=True)
    return config


def bundled_config(data_dir: str, **overrides) -> ServiceConfig:
    """Config wired to the data files shipped inside the package."""
    data = resources.files("alleviate.data")

    def shipped(name):
        return str(data.joinpath(name))

    Path(data_dir).mkdir(parents=True, exist_ok=True)
    defaults = dict(
        patterns_path=shipped("patterns.json"),
        rules_path=shipped("safety.rules"),
        tree_path=shipped("severity_tree.json"),
        templates_path=shipped("templates.json"),
        lexicon_path=shipped("intent_lexicon.json"),
        kb_paths=(shipped("kb/mayo-fixture.tsv"), shipped("kb/umls-fixture.tsv")),
        data_dir=data_dir,
    )
    defaults.update(overrides)
    return ServiceConfig(**defaults)
