"""Bit-stable JSON/CSV serialization and the flat key=value config format.

Floats are written with ``%.17g`` so every double round-trips exactly.
Reports carry no timestamps or host data; identical inputs give identical
bytes.
"""

from dataclasses import fields
import json
import math
import numbers
import os
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidParameters
from .pipeline import PipelineConfig

ENV_OUTPUT_DIR = "OVERDET_OUTPUT_DIR"


def format_float(x):
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = "%.17g" % x
    # keep floats recognizable as floats after a round trip
    if all(c not in s for c in ".eEn"):
        s += ".0"
    return s


def _encode(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, numbers.Integral):
        out.append(str(int(obj)))
    elif isinstance(obj, numbers.Real):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            parts = []
            for v in seq:
                buf = []
                _encode(v, indent, level + 1, buf)
                parts.append("".join(buf))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(seq):
            out.append(pad)
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(end + "]")
    elif hasattr(obj, "to_dict"):
        _encode(obj.to_dict(), indent, level, out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2):
    """JSON text with 17-significant-digit floats and a trailing newline."""
    out = []
    _encode(obj, indent, 0, out)
    return "".join(out) + "\n"


def loads(text):
    return json.loads(text)


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return loads(Path(path).read_text())


def _csv_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, numbers.Integral):
        return str(int(v))
    if isinstance(v, numbers.Real):
        return format_float(v)
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_csv_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows))
    return path


def read_csv(path):
    """Header and rows; numeric cells become floats, empty cells None."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            parsed = []
            for cell in row:
                if cell == "":
                    parsed.append(None)
                    continue
                try:
                    parsed.append(float(cell))
                except ValueError:
                    parsed.append(cell)
            rows.append(parsed)
    return header, rows


# config -----------------------------------------------------------------

_SEQUENCE_TYPES = {"s_sweep": float, "backends": str, "kernel_resolutions": int}


def config_schema():
    """Key -> (type, element type or None) for every PipelineConfig field."""
    schema = {}
    for f in fields(PipelineConfig):
        if f.name in _SEQUENCE_TYPES:
            schema[f.name] = (tuple, _SEQUENCE_TYPES[f.name])
        else:
            schema[f.name] = ({"int": int, "float": float, "bool": bool, "str": str}
                              [f.type if isinstance(f.type, str) else f.type.__name__],
                              None)
    return schema


def _convert(kind, elem, raw):
    raw = raw.strip()
    if kind is bool:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is tuple:
        items = [s for s in (t.strip() for t in raw.split(",")) if s]
        return tuple(_convert(elem, None, s) for s in items)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def parse_assignment(text, source="--set", lineno=None):
    """``key = value`` -> (key, typed value); raises ConfigError."""
    where = f"{source}:{lineno}" if lineno is not None else source
    if "=" not in text:
        raise ConfigError(f"{where}: expected key=value, got {text.strip()!r}")
    key, raw = (s.strip() for s in text.split("=", 1))
    schema = config_schema()
    if key not in schema:
        raise ConfigError(f"{where}: unknown key {key!r}")
    kind, elem = schema[key]
    try:
        return key, _convert(kind, elem, raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: key {key!r}: {exc}") from exc


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, val = parse_assignment(line, source, lineno)
        values[key] = val
    return values


def load_config(path=None, overrides=(), flags=None):
    """File values, then ``--set`` overrides, then explicit flags."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
        values.update(parse_config_text(text, str(path)))
    for item in overrides:
        key, val = parse_assignment(item)
        values[key] = val
    values.update({k: v for k, v in (flags or {}).items() if v is not None})
    values.setdefault("output_dir", os.environ.get(ENV_OUTPUT_DIR, "."))
    try:
        return PipelineConfig(**values)
    except InvalidParameters as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def config_text(config):
    """Inverse of :func:`parse_config_text` for a PipelineConfig."""
    lines = []
    for key, val in config.to_dict().items():
        if isinstance(val, list):
            val = ", ".join(_csv_cell(v) for v in val)
        else:
            val = _csv_cell(val)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"
