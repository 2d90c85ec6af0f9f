"""JSON documents with fixed 17-significant-digit floats.

The stdlib encoder writes the shortest round-trip repr of a float, which is
not stable across formatting choices we want to freeze in regression files.
Here every float is written as ``format(x, ".17g")``.
"""

import json
import math
from pathlib import Path

import numpy as np


def format_float(x):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    # keep floats recognisable as floats after a round trip
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _emit(obj, indent, level, out):
    pad = " " * (indent * (level + 1)) if indent else ""
    close = " " * (indent * level) if indent else ""
    sep = ",\n" if indent else ", "
    nl = "\n" if indent else ""

    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{" + nl)
        for n, (k, v) in enumerate(obj.items()):
            if n:
                out.append(sep)
            out.append(pad + json.dumps(str(k)) + ": ")
            _emit(v, indent, level + 1, out)
        out.append(nl + close + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        # rows of scalars stay on one line
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            out.append("[")
            for n, v in enumerate(obj):
                if n:
                    out.append(", ")
                _emit(v, indent, level + 1, out)
            out.append("]")
            return
        out.append("[" + nl)
        for n, v in enumerate(obj):
            if n:
                out.append(sep)
            out.append(pad)
            _emit(v, indent, level + 1, out)
        out.append(nl + close + "]")
    else:
        raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def dumps(obj, indent=2):
    out = []
    _emit(obj, indent, 0, out)
    return "".join(out)


def loads(text):
    return json.loads(text)


def write_document(path, obj):
    path = Path(path)
    path.write_text(dumps(obj) + "\n")
    return path


def read_document(path):
    return loads(Path(path).read_text())
