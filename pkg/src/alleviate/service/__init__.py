from alleviate.service.config import ConfigError, ServiceConfig, bundled_config, load_config
from alleviate.service.events import EVENT_KINDS, CorruptLog, EventLog, EventRecord, read_events
from alleviate.service.state import AppState, replay_events

__all__ = [
    "AppState",
    "ConfigError",
    "CorruptLog",
    "EVENT_KINDS",
    "EventLog",
    "EventRecord",
    "ServiceConfig",
    "bundled_config",
    "load_config",
    "read_events",
    "replay_events",
]
