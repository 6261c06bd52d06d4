"""Plain-text ``key = value`` run configuration.

Lines starting with ``#`` are comments. Lists are comma separated. Each command
declares its keys with a type and default; unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from ..errors import HireDivError


class ConfigError(HireDivError, ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _strs(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


PARSERS: dict[str, Callable[[str], Any]] = {
    "float": float,
    "int": int,
    "bool": _bool,
    "str": str.strip,
    "floats": _floats,
    "strs": _strs,
}


@dataclass(frozen=True)
class Key:
    kind: str
    default: Any
    help: str = ""


def parse_lines(lines, source: str = "config") -> dict[str, str]:
    out: dict[str, str] = {}
    for no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source} line {no}: empty key")
        out[key] = value
    return out


def load_file(path: str | Path) -> dict[str, str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
    return parse_lines(text.splitlines(), source=str(p))


def resolve(schema: dict[str, Key], raw: dict[str, str]) -> dict[str, Any]:
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {k: spec.default for k, spec in schema.items()}
    for k, text in raw.items():
        try:
            cfg[k] = PARSERS[schema[k].kind](text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {k!r}: {exc}") from exc
    return cfg


def config_hash(command: str, cfg: dict[str, Any], seed: int) -> str:
    blob = json.dumps({"command": command, "config": cfg, "seed": seed}, sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def render(schema: dict[str, Key], cfg: dict[str, Any]) -> str:
    """Config file text reproducing ``cfg``."""
    lines = []
    for k in schema:
        v = cfg[k]
        if isinstance(v, (tuple, list)):
            v = ",".join(str(x) for x in v)
        if schema[k].help:
            lines.append(f"# {schema[k].help}")
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
