"""Deterministic CSV / JSON reports and their run manifests.

Report files hold only seed-determined content.  Timestamps and the worker
count live in a separate ``<out>.manifest.json`` so that reruns with the
same seed produce byte-identical report files.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .separation import to_jsonable

FORMATS = ("csv", "json")


@dataclass
class Report:
    subcommand: str
    columns: list
    rows: list = field(default_factory=list)  # dicts keyed by column
    summary: dict = field(default_factory=dict)


def _finite(x):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    x = to_jsonable(x)
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {str(k): _finite(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_finite(v) for v in x]
    return x


def format_cell(v) -> str:
    v = to_jsonable(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)  # shortest round-trip form, always '.' as separator
    if isinstance(v, str):
        return v
    return json.dumps(_finite(v), separators=(",", ":"), sort_keys=True)


def render(report: Report, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        w.writerow(report.columns)
        for row in report.rows:
            w.writerow([format_cell(row.get(c)) for c in report.columns])
        return buf.getvalue()
    if fmt == "json":
        doc = {
            "subcommand": report.subcommand,
            "columns": list(report.columns),
            "rows": [{c: _finite(r.get(c)) for c in report.columns} for r in report.rows],
            "summary": _finite(report.summary),
        }
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def check_writable(path) -> None:
    """Raise OSError early when ``path`` cannot be created or overwritten."""
    p = Path(path)
    parent = p.parent if str(p.parent) else Path(".")
    if p.is_dir():
        raise IsADirectoryError(f"{p} is a directory")
    if not parent.is_dir():
        raise FileNotFoundError(f"directory {parent} does not exist")
    if p.exists() and not os.access(p, os.W_OK) or not p.exists() and not os.access(parent, os.W_OK):
        raise PermissionError(f"cannot write {p}")


def emit_report(report: Report, fmt: str = "csv", path=None) -> None:
    text = render(report, fmt)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    check_writable(path)
    # newline="" keeps CSV's CRLF record separators untouched on every platform
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.json")


def write_manifest(manifest: dict, path=None) -> None:
    text = json.dumps(_finite(manifest), sort_keys=True, indent=2) + "\n"
    if path is None or str(path) == "-":
        sys.stderr.write(text)
        return
    with open(manifest_path(path), "w", encoding="utf-8") as fh:
        fh.write(text)
