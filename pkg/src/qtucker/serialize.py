"""File formats: amplitude inputs, plan JSON, trace CSV."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path
from typing import Optional

import numpy as np

from .corrgraph import Partition
from .engine import CircuitPlan, EngineConfig, IterationRecord, IterationTrace, Layer
from .statevec import StateVector, normalize
from .tucker import BlockFactor

FORMATS = ("csv_complex", "json_complex", "raw_f64le_pairs", "image_pgm")
_EXTENSIONS = {
    ".csv": "csv_complex",
    ".txt": "csv_complex",
    ".json": "json_complex",
    ".bin": "raw_f64le_pairs",
    ".f64": "raw_f64le_pairs",
    ".raw": "raw_f64le_pairs",
    ".pgm": "image_pgm",
}


class InputError(ValueError):
    """Unreadable or unparsable input file."""


def guess_format(path) -> str:
    fmt = _EXTENSIONS.get(Path(path).suffix.lower())
    if fmt is None:
        raise InputError(f"cannot infer input format from {path!s}; pass --format")
    return fmt


def parse_csv_complex(text: str) -> np.ndarray:
    """One ``re,im`` pair per line (``;`` also separates entries)."""
    values = []
    for entry in text.replace(";", "\n").splitlines():
        entry = entry.strip()
        if not entry or entry.startswith("#"):
            continue
        parts = [p.strip() for p in entry.split(",")]
        if len(parts) == 1:
            values.append(complex(float(parts[0]), 0.0))
        elif len(parts) == 2:
            values.append(complex(float(parts[0]), float(parts[1])))
        else:
            raise InputError(f"expected 're,im', got {entry!r}")
    return np.array(values, dtype=np.complex128)


def parse_json_complex(text: str) -> np.ndarray:
    """A list of ``[re, im]`` pairs or plain numbers, or ``{"re": [...], "im": [...]}``."""
    data = json.loads(text)
    if isinstance(data, dict):
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
        return re + 1j * im
    out = []
    for v in data:
        if isinstance(v, (list, tuple)):
            out.append(complex(float(v[0]), float(v[1])))
        else:
            out.append(complex(float(v), 0.0))
    return np.array(out, dtype=np.complex128)


def parse_raw_pairs(blob: bytes) -> np.ndarray:
    if len(blob) % 16:
        raise InputError("raw input length is not a multiple of 16 bytes")
    return np.frombuffer(blob, dtype="<f8").view("<c16").astype(np.complex128)


def parse_pgm(blob: bytes) -> np.ndarray:
    """P2 (ASCII) or P5 (binary) greymap, flattened row-major."""
    tokens = []
    pos = 0
    # header: magic, width, height, maxval; '#' starts a comment
    while len(tokens) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(blob):
            raise InputError("truncated PGM header")
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos].decode("ascii"))
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    count = width * height
    if magic == "P5":
        data = blob[pos + 1 :]
        dtype = np.uint8 if maxval < 256 else ">u2"
        pixels = np.frombuffer(data, dtype=dtype, count=count)
    elif magic == "P2":
        pixels = np.array(blob[pos:].split()[:count], dtype=float)
    else:
        raise InputError(f"unsupported PGM magic {magic!r}")
    if pixels.size != count:
        raise InputError("PGM pixel data is truncated")
    return pixels.astype(float).astype(np.complex128)


def pad_amplitudes(v: np.ndarray, target_qubits: Optional[int] = None) -> np.ndarray:
    """Zero-pad to ``2**target_qubits`` (default: next power of two)."""
    size = v.size
    if target_qubits is None:
        target = 1 << max(1, (size - 1).bit_length())
    else:
        target = 1 << target_qubits
        if size > target:
            raise InputError(f"{size} amplitudes do not fit into {target_qubits} qubits")
    if target == size:
        return v
    out = np.zeros(target, dtype=np.complex128)
    out[:size] = v
    return out


def read_state(path, fmt: Optional[str] = None, target_qubits: Optional[int] = None) -> StateVector:
    """Load and normalize an amplitude vector; raises InputError on any failure."""
    fmt = fmt or guess_format(path)
    if fmt not in FORMATS:
        raise InputError(f"unknown format {fmt!r}")
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        if fmt == "csv_complex":
            v = parse_csv_complex(blob.decode("utf-8"))
        elif fmt == "json_complex":
            v = parse_json_complex(blob.decode("utf-8"))
        elif fmt == "raw_f64le_pairs":
            v = parse_raw_pairs(blob)
        else:
            v = parse_pgm(blob)
        if not np.all(np.isfinite(v)):
            raise InputError("input contains non-finite values")
        # images are always padded; other formats must already be 2**n long
        if fmt == "image_pgm" or target_qubits is not None:
            v = pad_amplitudes(v, target_qubits)
        return normalize(v)
    except InputError:
        raise
    except (ValueError, KeyError, TypeError, UnicodeDecodeError, IndexError) as exc:
        raise InputError(f"cannot parse {path} as {fmt}: {exc}") from exc


# ---------------------------------------------------------------------------
# Plans


def _cmat(m: np.ndarray) -> dict:
    m = np.asarray(m)
    return {"re": m.real.tolist(), "im": m.imag.tolist()}


def _from_cmat(d: dict) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def plan_to_dict(plan: CircuitPlan) -> dict:
    return {
        "format": "qtucker-plan/1",
        "n": plan.n,
        "config": plan.config.to_dict() if plan.config else None,
        "initial_fidelity": plan.trace.initial_fidelity,
        "layers": [
            {
                "partition": layer.partition.as_lists(),
                "factors": [
                    {"qubits": list(f.qubits), "rank": f.rank, "matrix": _cmat(f.matrix)} for f in layer.factors
                ],
            }
            for layer in plan.layers
        ],
        "trace": [
            {
                "j": r.j,
                "k": r.k,
                "partition": r.partition.as_lists(),
                "phi": r.phi,
                "alpha": r.alpha,
                "fidelity": r.fidelity,
                "seconds": r.seconds,
            }
            for r in plan.trace.records
        ],
        "residual_core": None if plan.residual_core is None else _cmat(plan.residual_core.amps),
    }


def plan_from_dict(d: dict) -> CircuitPlan:
    n = int(d["n"])
    layers = []
    for layer in d["layers"]:
        part = Partition(tuple(tuple(b) for b in layer["partition"]), n)
        factors = [BlockFactor(tuple(f["qubits"]), _from_cmat(f["matrix"]), f.get("rank")) for f in layer["factors"]]
        layers.append(Layer(part, factors))
    trace = IterationTrace(float(d["initial_fidelity"]))
    for r in d["trace"]:
        trace.records.append(
            IterationRecord(
                j=int(r["j"]),
                k=int(r["k"]),
                partition=Partition(tuple(tuple(b) for b in r["partition"]), n),
                phi=float(r["phi"]),
                alpha=float(r["alpha"]),
                fidelity=float(r["fidelity"]),
                seconds=float(r.get("seconds", 0.0)),
            )
        )
    residual = d.get("residual_core")
    config = None
    if d.get("config"):
        cfg = dict(d["config"])
        if cfg.get("constraint") is not None:
            cfg["constraint"] = [tuple(e) for e in cfg["constraint"]]
        config = EngineConfig(**cfg)
    return CircuitPlan(n, layers, trace, None if residual is None else StateVector(n, _from_cmat(residual)), config)


def write_plan(plan: CircuitPlan, path) -> None:
    Path(path).write_text(json.dumps(plan_to_dict(plan)))


def read_plan(path) -> CircuitPlan:
    try:
        return plan_from_dict(json.loads(Path(path).read_text()))
    except (OSError, ValueError, KeyError, TypeError, IndexError) as exc:
        raise InputError(f"cannot load plan {path}: {exc}") from exc


TRACE_COLUMNS = ("j", "k", "blocks", "phi", "alpha", "fidelity", "loss")


def _blocks_str(p: Partition) -> str:
    return "|".join("-".join(str(q) for q in b) for b in p.blocks)


def trace_csv(trace: IterationTrace) -> str:
    """Per-iteration trace as CSV. Wall times are left out so output is reproducible."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace.records:
        w.writerow([r.j, r.k, _blocks_str(r.partition)] + [repr(float(x)) for x in (r.phi, r.alpha, r.fidelity, 1.0 - r.fidelity)])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    path.write_text(text)
