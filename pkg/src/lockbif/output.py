"""Deterministic serialization: 17-significant-digit floats, fixed ordering.

The stdlib json module formats floats with repr (shortest round-trip), which
is run-stable but not format-pinned; outputs here go through a small explicit
serializer so identical runs produce byte-identical artifacts.
"""
from __future__ import annotations

from pathlib import Path

SCHEMA_VERSION = 1


def fmt_float(x: float) -> str:
    return f"{float(x):.17g}"


def _json_value(obj, indent: int, out: list) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (key, val) in enumerate(items):
            out.append(f'{pad}  "{key}": ')
            _json_value(val, indent + 1, out)
            out.append(",\n" if i + 1 < len(items) else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        out.append("[\n")
        for i, val in enumerate(seq):
            out.append(pad + "  ")
            _json_value(val, indent + 1, out)
            out.append(",\n" if i + 1 < len(seq) else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(fmt_float(obj))
    elif isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        out.append(f'"{escaped}"')
    else:
        raise TypeError(f"cannot serialize {type(obj)}")


def dumps_json(obj) -> str:
    out: list[str] = []
    _json_value(obj, 0, out)
    out.append("\n")
    return "".join(out)


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def format_cell(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return fmt_float(x)
    if x is None:
        return ""
    return str(x)


def write_csv(path: str | Path, header: list[str], rows, config=None, comment: str = "#") -> Path:
    """CSV with the resolved config echoed as leading comment lines."""
    path = Path(path)
    lines = []
    if config is not None:
        for section, keys in config.items():
            for key, value in keys.items():
                lines.append(f"{comment} {section}.{key} = {value}\n")
    lines.append(",".join(header) + "\n")
    for row in rows:
        lines.append(",".join(format_cell(x) for x in row) + "\n")
    path.write_text("".join(lines))
    return path


def write_dat(path: str | Path, columns: list[str], rows, config=None) -> Path:
    """Whitespace-separated table for gnuplot, config echoed in comments."""
    path = Path(path)
    lines = []
    if config is not None:
        for section, keys in config.items():
            for key, value in keys.items():
                lines.append(f"# {section}.{key} = {value}\n")
    lines.append("# " + " ".join(columns) + "\n")
    for row in rows:
        lines.append(" ".join(format_cell(x) for x in row) + "\n")
    path.write_text("".join(lines))
    return path
