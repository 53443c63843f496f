"""Run records, configuration files and serialization.

A record holds everything needed to rerun a command. The ``timestamp`` and
``wall_time`` fields are the only volatile ones; :func:`payload_json` drops
them so reruns can be compared byte for byte.
"""

from __future__ import annotations

import ast
import configparser
import csv
import io
import json
import math
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from hardylab import __version__

VOLATILE_FIELDS = ("timestamp", "wall_time")
STATUS_PASS, STATUS_VIOLATED, STATUS_INCONCLUSIVE, STATUS_ERROR = "pass", "violated", "inconclusive", "error"


class ConfigError(ValueError):
    """Malformed configuration file; the message names the offending line."""


# ----------------------------------------------------------------------------
# JSON conversion


def jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays, fractions, tuples and non-finite floats into plain JSON values.

    Non-finite floats become the strings "nan", "inf" and "-inf".
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return jsonable(obj.as_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@dataclass
class Table:
    """A CSV sweep table with optional comment lines written above the header."""

    header: list
    rows: list
    comments: dict = field(default_factory=dict)


@dataclass
class RunRecord:
    command: str
    parameters: dict
    result: dict
    status: str
    exit_code: int
    warnings: list = field(default_factory=list)
    version: str = __version__
    wall_time: float = 0.0
    timestamp: str = ""
    table: Table | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "version": self.version,
            "parameters": jsonable(self.parameters),
            "status": self.status,
            "exit_code": self.exit_code,
            "warnings": list(self.warnings),
            "result": jsonable(self.result),
            "wall_time": self.wall_time,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunRecord":
        return cls(
            command=data["command"], parameters=data["parameters"], result=data["result"],
            status=data["status"], exit_code=data["exit_code"], warnings=list(data.get("warnings", [])),
            version=data.get("version", __version__), wall_time=data.get("wall_time", 0.0),
            timestamp=data.get("timestamp", ""),
        )


def now_timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Stopwatch:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


def record_json(record: RunRecord) -> str:
    return json.dumps(record.as_dict(), indent=2, allow_nan=False)


def payload_json(record: RunRecord | dict) -> str:
    """Record JSON without the volatile fields."""
    data = record.as_dict() if isinstance(record, RunRecord) else dict(record)
    for key in VOLATILE_FIELDS:
        data.pop(key, None)
    return json.dumps(data, indent=2, allow_nan=False)


def table_csv(record: RunRecord) -> str:
    table = record.table
    buf = io.StringIO()
    comments = {"command": record.command, "seed": record.parameters.get("seed")}
    if table is not None:
        comments.update(table.comments)
    for key, value in comments.items():
        text = value if isinstance(value, str) else json.dumps(jsonable(value))
        buf.write(f"# {key}: {text}\n")
    writer = csv.writer(buf, lineterminator="\n")
    if table is None:
        writer.writerow(["key", "value"])
        for key, value in record.result.items():
            writer.writerow([key, json.dumps(jsonable(value))])
    else:
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def read_csv_table(text: str) -> tuple[list, list]:
    """Header and rows of a CSV emitted by :func:`table_csv`, skipping comment lines."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    reader = csv.reader(lines)
    rows = list(reader)
    return rows[0], rows[1:]


def emit(records: Sequence[RunRecord] | RunRecord, fmt: str = "json", out: str | Path | None = None,
         stream=None) -> str:
    """Serialize records as JSON (one object, or a list for several) or CSV tables.

    Writes to ``out`` when given, otherwise to ``stream`` when given; returns the text.
    """
    if isinstance(records, RunRecord):
        records = [records]
    if fmt == "json":
        objs = [r.as_dict() for r in records]
        text = json.dumps(objs[0] if len(objs) == 1 else objs, indent=2, allow_nan=False) + "\n"
    elif fmt == "csv":
        text = "\n".join(table_csv(r) for r in records)
    else:
        raise ValueError(f"unknown format {fmt!r}; expected json or csv")
    if out is not None:
        Path(out).write_text(text)
    elif stream is not None:
        stream.write(text)
    return text


# ----------------------------------------------------------------------------
# configuration


_HEADERLESS = "__top__"


def _parse_value(raw: str) -> Any:
    text = raw.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if "," in text:
        return [_parse_value(part) for part in text.split(",") if part.strip()]
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _has_headerless_keys(text: str) -> bool:
    for line in text.splitlines():
        s = line.strip()
        if not s or s.startswith(("#", ";")):
            continue
        return not s.startswith("[")
    return False


def _key_lines(text: str) -> dict:
    out = {}
    section = _HEADERLESS
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            out[(section, "")] = i
            continue
        m = re.match(r"^([A-Za-z0-9_.\-]+)\s*[=:]", s)
        if m:
            out[(section, m.group(1).lower())] = i
    return out


def load_config(path: str | Path, known_keys: Iterable[str] | None = None,
                command: str | None = None, sections: Iterable[str] = ()) -> tuple[dict, list]:
    """Parse an INI-style file into (parameters, warnings).

    Keys may sit before any section header, in ``[hardylab]``, or in a
    section named after the command; the command section wins. Values are
    booleans, integers, floats, comma lists or strings. Unknown keys are
    reported as warnings, as are sections outside ``sections`` (the names
    of other commands, which are skipped silently). Parse errors raise :class:`ConfigError` with the
    line number.
    """
    path = Path(path)
    text = path.read_text()
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused_default__")
    offset = 0
    body = text
    if _has_headerless_keys(text):
        body = f"[{_HEADERLESS}]\n" + text
        offset = 1
    try:
        parser.read_string(body, source=str(path))
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        try:
            line = ast.literal_eval(line)
        except (ValueError, SyntaxError):
            pass
        raise ConfigError(f"{path}:{lineno - offset}: cannot parse line {str(line).strip()!r}") from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}:{exc.lineno - offset}: key outside any section") from exc
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        where = f"{path}:{lineno - offset}" if lineno else str(path)
        raise ConfigError(f"{where}: {exc.message if hasattr(exc, 'message') else exc}") from exc

    lines = _key_lines(body)
    quiet = set(sections)
    params: dict = {}
    warnings: list = []
    known = None if known_keys is None else {k.replace("-", "_") for k in known_keys}
    order = [s for s in parser.sections() if s != command] + ([command] if command in parser.sections() else [])
    for section in order:
        if section not in (_HEADERLESS, "hardylab", command):
            if section not in quiet:
                warnings.append(f"{path}:{lines.get((section, ''), 0) - offset}: unknown section [{section}] ignored")
            continue
        for key, raw in parser.items(section):
            norm = key.replace("-", "_")
            lineno = lines.get((section, key), 0) - offset
            if known is not None and norm not in known:
                warnings.append(f"{path}:{lineno}: unknown key {key!r} ignored")
                continue
            params[norm] = _parse_value(raw)
    return params, warnings

