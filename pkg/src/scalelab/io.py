"""Report serialization: 17-significant-digit JSON, plain CSV, atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import tempfile
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import InputError


def _plain(obj: Any) -> Any:
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, range)):
        return [_plain(v) for v in obj]
    return obj


def format_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    text = format(x, ".17g")
    return text if any(c in text for c in ".en") else text + ".0"


def _encode(obj: Any, out: list[str], indent: int, level: int) -> None:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj) if math.isfinite(obj) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{" + pad)
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(sep)
            out.append(json.dumps(str(k), ensure_ascii=False) + ": ")
            _encode(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[")
            for i, v in enumerate(obj):
                if i:
                    out.append(", ")
                _encode(v, out, 0, 0)
            out.append("]")
            return
        out.append("[" + pad)
        for i, v in enumerate(obj):
            if i:
                out.append(sep)
            _encode(v, out, indent, level + 1)
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    out: list[str] = []
    _encode(_plain(obj), out, indent, 0)
    return "".join(out) + "\n"


def csv_text(header: str, fields: Sequence[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([_csv_cell(r.get(f)) for f in fields])
    return buf.getvalue()


def _csv_cell(v: Any) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, bool):
        return str(int(v))
    return "" if v is None else str(v)


def write_text(text: str, path: str | None) -> None:
    """Write to ``path`` through a temporary file and a rename; ``None`` means stdout."""
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".scalelab-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e.msg} at line {e.lineno}") from None


def read_payload(path: str) -> Any:
    """JSON input; a scalelab report is unwrapped to its ``result``."""
    d = read_json(path)
    if isinstance(d, dict) and "scalelab_version" in d and "result" in d:
        return d["result"]
    return d
