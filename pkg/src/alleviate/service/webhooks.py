"""Alert webhook delivery with retry and a dead-letter file.

Every emergency alert ends up either in the delivery log or the dead-letter
file, so an auditor can always account for it.
"""

from __future__ import annotations

import json
import threading
import time
import urllib.error
import urllib.request
from pathlib import Path


def _http_post(url: str, body: bytes, timeout: float) -> int:
    request = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    with urllib.request.urlopen(request, timeout=timeout) as response:
        return response.status


class WebhookDeliverer:
    """POSTs alert JSON to one URL; `retries` attempts with doubling delays.

    `transport` is swappable for tests: callable(url, body, timeout) -> status,
    anything outside 2xx or an exception counting as a failed attempt.
    """

    def __init__(
        self,
        url: str,
        delivery_log: "str | Path",
        dead_letter: "str | Path",
        retries: int = 3,
        base_delay: float = 0.25,
        timeout: float = 2.0,
        transport=None,
    ):
        if retries < 1:
            raise ValueError("retries must be at least 1")
        self.url = url
        self.delivery_log = Path(delivery_log)
        self.dead_letter = Path(dead_letter)
        self.retries = retries
        self.base_delay = base_delay
        self.timeout = timeout
        self.transport = transport or _http_post
        self._write_lock = threading.Lock()

    def _append(self, path: Path, record: dict):
        path.parent.mkdir(parents=True, exist_ok=True)
        with self._write_lock, open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")

    def deliver(self, payload: dict, at: str = "") -> bool:
        body = json.dumps(payload).encode("utf-8")
        last_error = ""
        for attempt in range(1, self.retries + 1):
            try:
                status = self.transport(self.url, body, self.timeout)
                if 200 <= status < 300:
                    self._append(
                        self.delivery_log,
                        {"at": at, "url": self.url, "attempts": attempt, "status": status, "payload": payload},
                    )
                    return True
                last_error = f"status {status}"
            except (urllib.error.URLError, OSError, ValueError) as err:
                last_error = str(err)
            if attempt < self.retries:
                time.sleep(self.base_delay * (2 ** (attempt - 1)))
        self._append(
            self.dead_letter,
            {"at": at, "url": self.url, "attempts": self.retries, "error": last_error, "payload": payload},
        )
        return False

    def deliver_async(self, payload: dict, at: str = "") -> threading.Thread:
        thread = threading.Thread(target=self.deliver, args=(payload, at), daemon=True)
        thread.start()
        return thread
