"""Versioned CSV writing/reading, metadata sidecars and the output lock."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .. import __version__
from ..errors import HireDivError, SchemaError

CSV_MAJOR = 1
CSV_MINOR = 0
MAGIC = "# hirediv-csv"
LOCK_NAME = ".hirediv.lock"


class LockError(HireDivError, RuntimeError):
    pass


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if value != value:
            return ""
        return format(value, ".12g")
    return str(value)


@dataclass
class RunOutput:
    """Collects the files a command writes so the sidecar can list them."""

    out_dir: Path
    command: str
    config: dict[str, Any]
    config_hash: str
    seed: int
    files: list[dict[str, str]] = field(default_factory=list)

    def _record(self, path: Path, schema: str, data: bytes) -> None:
        path.write_bytes(data)
        self.files.append(
            {"file": path.name, "schema": schema, "sha256": hashlib.sha256(data).hexdigest()}
        )

    def write_csv(self, name: str, schema: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        buf = io.StringIO()
        buf.write(
            f"{MAGIC} {CSV_MAJOR}.{CSV_MINOR} schema={schema} config={self.config_hash} seed={self.seed}\n"
        )
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
        path = self.out_dir / name
        self._record(path, schema, buf.getvalue().encode("utf-8"))
        return path

    def write_bytes(self, name: str, schema: str, data: bytes) -> Path:
        path = self.out_dir / name
        self._record(path, schema, data)
        return path

    def write_text(self, name: str, schema: str, text: str) -> Path:
        path = self.out_dir / name
        self._record(path, schema, text.encode("utf-8"))
        return path

    def write_meta(self) -> Path:
        meta = {
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": __version__,
            "csv_schema_version": f"{CSV_MAJOR}.{CSV_MINOR}",
            "outputs": self.files,
        }
        path = self.out_dir / f"{self.command}.meta.json"
        path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=list) + "\n", encoding="utf-8")
        return path


def read_csv(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Read a file written by :meth:`RunOutput.write_csv`.

    Returns (header tags, rows). Files from an unknown major version are
    rejected.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        tags = parse_magic(first)
        if tags is None:
            raise SchemaError("missing hirediv-csv version line", line=1)
        rows = list(csv.DictReader(fh))
    return tags, rows


def parse_magic(line: str) -> dict[str, str] | None:
    if not line.startswith(MAGIC):
        return None
    parts = line[len(MAGIC):].split()
    if not parts:
        raise SchemaError("version line has no version", line=1)
    try:
        major = int(parts[0].split(".")[0])
    except ValueError:
        raise SchemaError(f"bad version {parts[0]!r}", line=1) from None
    if major != CSV_MAJOR:
        raise SchemaError(f"unsupported CSV major version {major} (expected {CSV_MAJOR})", line=1)
    tags = {"version": parts[0]}
    for p in parts[1:]:
        k, _, v = p.partition("=")
        tags[k] = v
    return tags


@contextmanager
def locked_dir(out_dir: str | Path):
    """Create ``out_dir`` and hold an exclusive lockfile in it."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(f"{out} is in use by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield out
    finally:
        lock.unlink(missing_ok=True)
