"""Deterministic JSON/CSV emission and the on-disk formats for ensembles, states and reports.

Floats are written with 17 significant digits so every double round-trips
exactly, and keys keep insertion order, so identical inputs give
byte-identical files.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from . import linalg
from .errors import ParameterError
from .expanders import UnitaryEnsemble

PRNG = "numpy.random.PCG64"


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def plain(obj):
    """Convert numpy scalars/arrays and tuples into plain JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _emit(obj, out: list, indent: int, level: int):
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            out.append(("," if i else "") + pad + json.dumps(k) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, list):
        # numeric leaves stay on one line to keep matrices readable
        if all(not isinstance(v, (dict, list)) for v in obj):
            out.append("[" + ", ".join(_scalar(v) for v in obj) + "]")
            return
        out.append("[")
        for i, v in enumerate(obj):
            out.append(("," if i else "") + pad)
            _emit(v, out, indent, level + 1)
        out.append(end + "]")
    else:
        out.append(_scalar(obj))


def _scalar(v) -> str:
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return _fmt_float(v)
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list = []
    _emit(plain(obj), out, indent, 0)
    return "".join(out) + "\n"


def atomic_write(path, text: str):
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _csv_cell(v):
    v = plain(v)
    if isinstance(v, float):
        return _fmt_float(v) if math.isfinite(v) else ""
    if v is None:
        return ""
    return v


# -- schemas ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    text = resources.files("qexlab").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate(doc, name: str):
    try:
        jsonschema.validate(plain(doc), schema(name))
    except jsonschema.ValidationError as exc:
        raise ParameterError(f"document does not match {name} schema: {exc.message}") from exc


# -- complex arrays ----------------------------------------------------------------------

def complex_to_pairs(a) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def pairs_to_complex(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    if a.shape[-1:] != (2,):
        raise ParameterError("complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def ensemble_to_json(ens: UnitaryEnsemble) -> dict:
    return {
        "kind": ens.kind,
        "D": ens.D,
        "d": ens.d,
        "seed": ens.seed,
        "unitaries": complex_to_pairs(ens.unitaries),
    }


def ensemble_from_json(doc) -> UnitaryEnsemble:
    if isinstance(doc, str):
        doc = json.loads(doc)
    validate(doc, "ensemble")
    return UnitaryEnsemble(int(doc["D"]), int(doc["d"]), pairs_to_complex(doc["unitaries"]),
                           kind=doc["kind"], seed=doc.get("seed"))


def state_to_json(state: linalg.RegisteredState) -> dict:
    return {
        "registers": [[n, d] for n, d in state.registers],
        "amplitudes": complex_to_pairs(state.amplitudes),
    }


def state_from_json(doc, normalize: bool = False) -> linalg.RegisteredState:
    if isinstance(doc, str):
        doc = json.loads(doc)
    validate(doc, "state")
    regs = tuple((str(n), int(d)) for n, d in doc["registers"])
    amps = pairs_to_complex(doc["amplitudes"])
    if normalize:
        return linalg.RegisteredState.normalized(regs, amps)
    return linalg.RegisteredState(regs, amps)


def load_state(path, normalize: bool = False) -> linalg.RegisteredState:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read state file {path}: {exc}") from exc
    return state_from_json(doc, normalize=normalize)
