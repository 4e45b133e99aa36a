"""Shared diagnostic type used by the parser, model loader, and graph builder.

A diagnostic points at a byte span of the source text it was raised for.
Only severity, message, and the span serialize; the `rule` tag is internal
so callers can filter by failure class without string-matching messages.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

ERROR = "error"
WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    start: int = 0
    end: int = 0
    rule: str = ""

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)

    def to_json_obj(self) -> dict:
        return {
            "severity": self.severity,
            "message": self.message,
            "start": self.start,
            "end": self.end,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_obj(), ensure_ascii=False)


def error(message: str, start: int = 0, end: int = 0, rule: str = "") -> Diagnostic:
    return Diagnostic(ERROR, message, start, end, rule)


def warning(message: str, start: int = 0, end: int = 0, rule: str = "") -> Diagnostic:
    return Diagnostic(WARNING, message, start, end, rule)


def has_errors(diagnostics) -> bool:
    return any(d.severity == ERROR for d in diagnostics)


def to_json_lines(diagnostics) -> str:
    return "\n".join(d.to_json_line() for d in diagnostics)
