"""JSON matrix/state files and CSV tables.

Matrix file: ``{"dim": n, "re": [[...]], "im": [[...]]}`` (row-major).
State file: ``{"dims": [A, B] or [a, A, B, b], "re": [...], "im": [...]}``
with flat amplitudes in row-major order over ``dims``.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ratelab import linalg
from ratelab.entangling import BipartitePureState
from ratelab.errors import RatelabError


class FileFormatError(RatelabError, ValueError):
    pass


def matrix_to_dict(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def _load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines() or [""]
        line = lines[min(exc.lineno, len(lines)) - 1]
        raise FileFormatError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}\n    {line}") from exc


def matrix_from_dict(d: dict, source: str = "<dict>") -> np.ndarray:
    try:
        n = int(d["dim"])
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d.get("im", np.zeros((n, n))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"{source}: malformed matrix object ({exc})") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise FileFormatError(f"{source}: expected {n}x{n} 're'/'im' arrays, got {re.shape} and {im.shape}")
    return linalg.hermitian(re + 1j * im)


def load_matrix(path) -> np.ndarray:
    """Load and validate a Hermitian matrix file."""
    return matrix_from_dict(_load_json(path), str(path))


def save_matrix(path, m) -> None:
    Path(path).write_text(json.dumps(matrix_to_dict(m)) + "\n")


def load_state(path) -> BipartitePureState:
    d = _load_json(path)
    try:
        dims = [int(v) for v in d["dims"]]
        amps = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d.get("im", 0.0), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: malformed state object ({exc})") from exc
    return BipartitePureState(amps.ravel(), tuple(dims))


def save_state(path, state: BipartitePureState) -> None:
    amps = state.amplitudes
    Path(path).write_text(json.dumps({"dims": list(state.dims), "re": amps.real.tolist(),
                                      "im": amps.imag.tolist()}) + "\n")


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()
