"""Flat `key = value` config files with dotted keys.

Same texture as the other versioned text formats in this project: lines,
`#` comments, no nesting. Keys are dotted paths like `fog.listen_addr` or
`pose.remote_url`.
"""

from __future__ import annotations

from .errors import ParseError


def load_config(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("config line needs `key = value`", line=lineno)
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def parse_addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise ParseError(f"bad address {value!r}, expected host:port")
    return host, int(port)
