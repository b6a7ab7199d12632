"""Machine-readable diagnostics: JSON log records and error payloads on stderr."""

import json
import logging
from typing import Any

# Attributes every LogRecord has; anything else came in through `extra=`.
_RESERVED = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JsonFormatter(logging.Formatter):
    """Render a record as one JSON object per line."""

    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, Any] = {
            "time": self.formatTime(record, "%Y-%m-%dT%H:%M:%S"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RESERVED and not key.startswith("_"):
                payload[key] = value
        if record.exc_info:
            payload["exception"] = self.formatException(record.exc_info)
        return json.dumps(payload, default=str, sort_keys=True)


def emit_diagnostic(payload: dict[str, Any], stream: Any) -> None:
    """Write one error diagnostic as a JSON line."""
    stream.write(json.dumps(payload, default=str, sort_keys=True) + "\n")
    stream.flush()
