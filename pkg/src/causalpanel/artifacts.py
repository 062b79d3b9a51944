"""Deterministic CSV/JSON writers shared by the report producers."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

DIGEST_PREFIX = "# config_digest: "


def fmt(x: float) -> str:
    """Report float: six significant digits, no negative zero."""
    s = f"{float(x):.6g}"
    return "0" if s == "-0" else s


def digest(obj: Any) -> str:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]], config_digest: str | None = None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if config_digest:
            fh.write(f"{DIGEST_PREFIX}{config_digest}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, float) else v for v in row])


def read_csv(path: str | Path) -> list[dict[str, str]]:
    """Read a report CSV, skipping ``#`` provenance lines."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def write_json(path: str | Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
