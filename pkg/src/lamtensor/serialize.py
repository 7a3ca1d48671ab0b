"""JSON codecs: complex entries as [re, im], matrices as row-major nested lists."""

from __future__ import annotations

import json
import os
import tempfile
from typing import Any

import numpy as np

from . import matcore as mc

SCHEMA = "lt-report/1"


def _num(x: float) -> float:
    # normalise -0.0 so reports are byte-stable
    x = float(x)
    return 0.0 if x == 0.0 else x


def encode_matrix(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=mc.DTYPE)
    return [[[_num(z.real), _num(z.imag)] for z in row] for row in a]


def decode_matrix(obj: Any, *, name: str = "matrix") -> np.ndarray:
    """Inverse of :func:`encode_matrix`; bare real numbers are accepted too."""
    if isinstance(obj, (int, float)):
        return np.array([[obj]], dtype=mc.DTYPE)
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ValueError(f"{name}: expected a non-empty list of rows")
    width = len(obj[0])
    rows = []
    for i, row in enumerate(obj):
        if len(row) != width:
            raise ValueError(f"{name}: row {i} has length {len(row)}, expected {width}")
        vals = []
        for j, z in enumerate(row):
            if isinstance(z, (int, float)):
                vals.append(complex(z))
            elif isinstance(z, list) and len(z) == 2 and all(isinstance(c, (int, float)) for c in z):
                vals.append(complex(z[0], z[1]))
            else:
                raise ValueError(f"{name}[{i}][{j}]: expected [re, im]")
        rows.append(vals)
    return mc.as_cmatrix(np.array(rows, dtype=mc.DTYPE), name=name)


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".lt-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
