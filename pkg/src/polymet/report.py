"""Suite reports and their JSON, CSV and text renderings.

JSON is canonical: keys sorted, two-space indent, floats written with
``%.17g`` (non-finite floats as the strings ``"nan"``, ``"inf"``,
``"-inf"``).  The only field that differs between two runs of the same
configuration is ``timestamp``.
"""

import csv
import datetime as _dt
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import IoFailure

SCHEMA_VERSION = 1


@dataclass
class Check:
    suite: str
    name: str
    value: float
    tolerance: float
    passed: bool
    comparison: str = "<="
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "suite": self.suite,
            "name": self.name,
            "value": self.value,
            "tolerance": self.tolerance,
            "comparison": self.comparison,
            "pass": bool(self.passed),
            "details": self.details,
        }


def check_le(suite, name, value, tolerance, **details):
    value = float(value)
    return Check(suite, name, value, float(tolerance), bool(value <= tolerance), "<=", details)


def check_equal(suite, name, value, expected, **details):
    """Exact integer (or structure) agreement; tolerance records the expectation."""
    ok = value == expected
    return Check(suite, name, _plain(value), _plain(expected), bool(ok), "==", details)


@dataclass
class SuiteReport:
    suite: str
    checks: list
    provenance: dict
    tables: dict = field(default_factory=dict)
    timestamp: str = ""

    @property
    def overall_pass(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return _plain(
            {
                "schema_version": SCHEMA_VERSION,
                "suite": self.suite,
                "checks": [c.to_dict() for c in self.checks],
                "provenance": self.provenance,
                "tables": self.tables,
                "overall_pass": self.overall_pass,
                "timestamp": self.timestamp,
            }
        )


def now_stamp():
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def _plain(obj):
    """Convert numpy containers and scalars to JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"nan"'
        if math.isinf(obj):
            return '"inf"' if obj > 0 else '"-inf"'
        text = "%.17g" % obj
        if not any(ch in text for ch in ".eE"):
            text += ".0"
        return text
    return json.dumps(obj)


def to_json(report):
    data = report.to_dict() if isinstance(report, SuiteReport) else _plain(report)
    return _encode(data, 2, 0) + "\n"


def to_csv(report):
    data = report.to_dict() if isinstance(report, SuiteReport) else report
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["suite", "name", "value", "comparison", "tolerance", "pass"])
    for c in data["checks"]:
        fmt = lambda v: ("%.17g" % v) if isinstance(v, float) else json.dumps(v) if isinstance(v, list) else v  # noqa: E731
        writer.writerow([c["suite"], c["name"], fmt(c["value"]), c["comparison"], fmt(c["tolerance"]), c["pass"]])
    return buf.getvalue()


def to_text(report):
    data = report.to_dict() if isinstance(report, SuiteReport) else report
    lines = [f"polymet report: suite={data['suite']} seed={data['provenance'].get('seed')}"]
    width = max([len(f"{c['suite']}.{c['name']}") for c in data["checks"]] + [10])
    for c in data["checks"]:
        label = f"{c['suite']}.{c['name']}".ljust(width)
        status = "pass" if c["pass"] else "FAIL"
        val, tol = c["value"], c["tolerance"]
        vs = f"{val:.3e}" if isinstance(val, float) else str(val)
        ts = f"{tol:.1e}" if isinstance(tol, float) else str(tol)
        lines.append(f"  {status}  {label}  {vs} {c['comparison']} {ts}")
    n_fail = sum(not c["pass"] for c in data["checks"])
    lines.append(f"{'PASS' if data['overall_pass'] else 'FAIL'}: {len(data['checks']) - n_fail}/{len(data['checks'])} checks passed")
    return "\n".join(lines) + "\n"


RENDERERS = {"json": to_json, "csv": to_csv, "text": to_text}


def emit_report(report, path, fmt="json"):
    if fmt not in RENDERERS:
        raise ValueError(f"unknown report format {fmt!r}")
    text = RENDERERS[fmt](report)
    if path in (None, "", "-"):
        return text
    try:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write report {path}: {exc}") from exc
    return text


def load_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"{path} is not valid JSON: {exc}") from exc
