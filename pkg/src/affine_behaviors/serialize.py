"""JSON forms of systems, controllers and certificates.

System files::

    {"name": "example", "q": 1, "k": 0, "R": [[[9, 18, 10]]], "c": [20]}

``R`` is rows x cols x coefficients, ascending in degree.  Floats are
written with 17 significant digits so a dump/parse/dump cycle is
byte-stable.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import behavior as bh
from . import qdf
from .errors import InputError
from .polymat import PolyMatrix


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if s in ("-0", "0"):
        return "0.0" if s == "0" else "-0.0"
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def to_jsonable(obj):
    """Plain Python structure with numpy values converted; complex as ``[re, im]``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(np.real(obj)), float(np.imag(obj))]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, qdf.Verdict):
        return {"passed": obj.passed, "checks": to_jsonable(obj.checks)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2) -> str:
    return _dump(to_jsonable(obj), indent, 0) + "\n"


def _dump(o, indent, level) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(o, dict):
        if not o:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(v, indent, level + 1)}" for k, v in o.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(o, list):
        if not o:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in o):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in o) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in o]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(o, bool) or o is None:
        return json.dumps(o)
    if isinstance(o, int):
        return str(o)
    if isinstance(o, float):
        return _fmt_float(o)
    return json.dumps(o, ensure_ascii=False)


def loads(text: str, source="<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}:{exc.colno}: malformed JSON: {exc.msg}") from exc


def load_file(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(text, str(path))


def _int_field(d, key, default=None):
    v = d.get(key, default)
    if v is None:
        raise InputError(f"missing field {key!r}")
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise InputError(f"field {key!r} must be a nonnegative integer")
    return v


def _real(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise InputError(f"{where}: expected a number, got {x!r}")
    return float(x)


def system_from_dict(d) -> bh.OffsetKernelRep:
    if not isinstance(d, dict):
        raise InputError("system must be a JSON object")
    q = _int_field(d, "q")
    k = _int_field(d, "k", 0)
    R = d.get("R")
    if not isinstance(R, list):
        raise InputError("field 'R' must be a list of rows")
    cols = q + k
    entries = []
    for i, row in enumerate(R):
        if not isinstance(row, list) or len(row) != cols:
            raise InputError(f"row {i} of R must have {cols} entries (q + k)")
        er = []
        for j, e in enumerate(row):
            if not isinstance(e, list):
                e = [e]
            er.append([_real(x, f"R[{i}][{j}]") for x in e])
        entries.append(er)
    c = d.get("c", [0.0] * len(R))
    if not isinstance(c, list) or len(c) != len(R):
        raise InputError(f"field 'c' must list {len(R)} offsets, one per row of R")
    c = [_real(x, "c") for x in c]
    Rm = PolyMatrix.from_entries(entries, cols=cols) if entries else PolyMatrix.zeros(0, cols)
    return bh.OffsetKernelRep(Rm, np.array(c), q, k)


def system_to_dict(B: bh.OffsetKernelRep, name=None) -> dict:
    out = {}
    if name is not None:
        out["name"] = name
    out["q"] = B.q
    out["k"] = B.k
    out["R"] = [
        [B.R.entry(i, j).coeffs.tolist() for j in range(B.R.cols)] for i in range(B.R.rows)
    ]
    out["c"] = [float(x) + 0.0 for x in B.c]
    return out


def load_system(path) -> tuple[bh.OffsetKernelRep, str | None]:
    d = load_file(path)
    B = system_from_dict(d)
    return B, d.get("name") if isinstance(d, dict) else None


def certificate_to_dict(cert: qdf.ContractionCertificate) -> dict:
    diag = cert.diagnostics
    return {
        "q": cert.phi.q,
        "W": cert.phi.W,
        "phi": cert.phi.phi,
        "wbar": cert.wbar,
        "psi": cert.psi,
        "diagnostics": {
            "P": diag.get("P"),
            "det_roots": diag.get("det_roots"),
            "contraction_form": diag.get("contraction_form"),
            "psi_certificate": diag.get("psi_certificate"),
            "lyapunov": diag.get("lyapunov"),
        },
    }


def certificate_from_dict(d) -> tuple[qdf.Qdf, np.ndarray, np.ndarray]:
    try:
        q, W = int(d["q"]), int(d["W"])
        phi = np.array(d["phi"], dtype=float).reshape(q * W, q * W)
        wbar = np.array(d["wbar"], dtype=float).reshape(q)
        n = q * (W + 1) + 1
        psi = np.array(d["psi"], dtype=float).reshape(n, n)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed certificate: {exc}") from exc
    return qdf.Qdf(phi, q, W), wbar, psi
