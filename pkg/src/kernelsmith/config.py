"""Key-value config files for the service and CLI.

Format: one `key = value` per line, '#' comments, blank lines ignored.
The config path comes from --config or the KERNELSMITH_CONFIG environment
variable (the flag wins).

Recognized keys: lm (ARPA path), checkpoint (expansion-model path), host,
port, static_dir (directory served at /), blocklist (one token per line).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

ENV_VAR = "KERNELSMITH_CONFIG"


@dataclass
class AppConfig:
    lm: str | None = None
    checkpoint: str | None = None
    host: str = "127.0.0.1"
    port: int = 8765
    static_dir: str | None = None
    blocklist: str | None = None

    @classmethod
    def from_file(cls, path: str) -> "AppConfig":
        values = parse_config_file(path)
        known = set(cls.__dataclass_fields__)
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "port" in values:
            values["port"] = int(values["port"])
        return cls(**values)


def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def resolve_config_path(cli_value: str | None) -> str | None:
    if cli_value:
        return cli_value
    return os.environ.get(ENV_VAR) or None
