"""Service configuration: flags over PF_* environment variables over defaults."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    data_dir: str = "./data"
    default_lab: str = "demo_lab"
    default_project: str = "demo_project"
    session_ttl_seconds: int = 86400
    max_steps: int = 64
    allow_null_checks: bool = False


_ENV_KEYS = {
    "host": "PF_HOST",
    "port": "PF_PORT",
    "data_dir": "PF_DATA_DIR",
    "default_lab": "PF_DEFAULT_LAB",
    "default_project": "PF_DEFAULT_PROJECT",
    "session_ttl_seconds": "PF_SESSION_TTL",
    "max_steps": "PF_MAX_STEPS",
    "allow_null_checks": "PF_ALLOW_NULL_CHECKS",
}

_TRUE = {"1", "true", "yes", "on"}


def load_config(overrides: dict | None = None, env: dict | None = None) -> ServiceConfig:
    """Build a config; `overrides` (CLI flags) win over env vars over defaults.

    Override values of None mean "not given on the command line".
    """
    env = os.environ if env is None else env
    values: dict = {}
    for f in fields(ServiceConfig):
        key = _ENV_KEYS[f.name]
        if key in env:
            raw = env[key]
            if f.type == "int":
                values[f.name] = int(raw)
            elif f.type == "bool":
                values[f.name] = raw.strip().lower() in _TRUE
            else:
                values[f.name] = raw
    for name, value in (overrides or {}).items():
        if value is not None:
            values[name] = value
    return ServiceConfig(**values)
