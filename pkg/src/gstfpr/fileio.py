"""Readers and writers for gate-set files and circuit-list files.

Gate-set file (UTF-8)::

    # comments start with '#'
    [rho]
    0.7071067811865476 0 0 0.7071067811865476
    [effect 0]
    ...
    [gate Gx]
    unitary
    0.7071067811865476 -0.7071067811865476i
    -0.7071067811865476i 0.7071067811865476
    [gate Gi]
    ptm
    1 0 0 0
    ...

Vectors are coordinates in the normalized Pauli basis.  ``unitary`` gates
list d rows of d complex entries written ``a+bi``; ``ptm`` gates list d^2
rows of d^2 reals.

Circuit-list file: one circuit per line, gate labels separated by spaces,
``{}`` for the empty circuit.
"""
from __future__ import annotations

import hashlib
import os
import re
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError
from .ptm import Circuit, GateSet, num_qubits_for, ptm_from_unitary

_SECTION = re.compile(r"^\[(\w+)(?:\s+(\S+))?\]$")


def _parse_complex(tok: str) -> complex:
    return complex(tok.replace("i", "j"))


def read_gateset(path, parameterization: str = "TP", name: str | None = None) -> GateSet:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_gateset(text, parameterization=parameterization,
                         name=path.stem if name is None else name, source=str(path))


def parse_gateset(text: str, parameterization: str = "TP", name: str = "",
                  source: str | None = None) -> GateSet:
    sections = []  # (kind, arg, lineno, [(lineno, tokens)])
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            sections.append((m.group(1), m.group(2), lineno, []))
            continue
        if not sections:
            raise ParseError("data before the first [section]", source, lineno)
        sections[-1][3].append((lineno, line.split()))

    rho = None
    effects, effect_labels = [], []
    gates = {}
    for kind, arg, lineno, body in sections:
        if kind == "rho":
            rho = _reals(body, source, lineno)
        elif kind == "effect":
            effect_labels.append(arg if arg is not None else str(len(effects)))
            effects.append(_reals(body, source, lineno))
        elif kind == "gate":
            if arg is None:
                raise ParseError("[gate] needs a label", source, lineno)
            if arg in gates:
                raise ParseError(f"duplicate gate {arg!r}", source, lineno)
            gates[arg] = _gate(body, source, lineno)
        else:
            raise ParseError(f"unknown section [{kind}]", source, lineno)

    if rho is None:
        raise ParseError("missing [rho] section", source)
    if not effects:
        raise ParseError("missing [effect ...] sections", source)
    if not gates:
        raise ParseError("no [gate ...] sections", source)
    lengths = {len(rho)} | {len(e) for e in effects} | {g.shape[0] for g in gates.values()}
    if len(lengths) != 1:
        raise ParseError(f"inconsistent dimensions {sorted(lengths)}", source)
    return GateSet(rho, effects, gates, parameterization=parameterization, name=name,
                   effect_labels=effect_labels)


def _reals(body, source, lineno):
    try:
        vals = [float(t) for _, toks in body for t in toks]
    except ValueError as exc:
        raise ParseError(str(exc), source, body[0][0] if body else lineno) from None
    if not vals:
        raise ParseError("empty vector", source, lineno)
    return np.array(vals)


def _gate(body, source, lineno):
    if not body or len(body[0][1]) != 1 or body[0][1][0] not in ("unitary", "ptm"):
        raise ParseError("gate body must start with 'unitary' or 'ptm'", source, lineno)
    form = body[0][1][0]
    rows = body[1:]
    try:
        if form == "ptm":
            mat = np.array([[float(t) for t in toks] for _, toks in rows])
        else:
            mat = np.array([[_parse_complex(t) for t in toks] for _, toks in rows])
    except ValueError as exc:
        bad = rows[0][0] if rows else lineno
        raise ParseError(f"bad matrix entry: {exc}", source, bad) from None
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise ParseError(f"{form} matrix is not square", source, lineno)
    if form == "unitary":
        try:
            return ptm_from_unitary(mat)
        except ValidationError as exc:
            raise ParseError(str(exc), source, lineno) from None
    try:
        num_qubits_for(mat.shape[0])
    except ValidationError as exc:
        raise ParseError(str(exc), source, lineno) from None
    return mat


def format_gateset(gs: GateSet, header: dict | None = None) -> str:
    """Text form of a gate set, every gate written as a PTM (repr floats)."""
    out = [f"# gate set {gs.name}" if gs.name else "# gate set"]
    out += [f"# {k}={v}" for k, v in (header or {}).items()]
    out += ["[rho]", " ".join(repr(float(x)) for x in gs.rho)]
    for lbl, e in zip(gs.effect_labels, gs.effects):
        out.append(f"[effect {lbl}]")
        out.append(" ".join(repr(float(x)) for x in e))
    for lbl, g in gs.gates.items():
        out.append(f"[gate {lbl}]")
        out.append("ptm")
        out.extend(" ".join(repr(float(x)) for x in row) for row in g)
    return "\n".join(out) + "\n"


def write_gateset(gs: GateSet, path, header: dict | None = None) -> None:
    Path(path).write_text(format_gateset(gs, header), encoding="utf-8")


def parse_circuit_list(text: str, source: str | None = None) -> list[Circuit]:
    circuits = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "{}" in line and line != "{}":
            raise ParseError("'{}' must stand alone on its line", source, lineno)
        circuits.append(Circuit.from_str(line))
    if not circuits:
        raise ParseError("circuit list is empty", source)
    return circuits


def read_circuit_list(path) -> list[Circuit]:
    path = Path(path)
    return parse_circuit_list(path.read_text(encoding="utf-8"), source=str(path))


def format_circuit_list(circuits) -> str:
    return "".join(f"{c}\n" for c in circuits)


def check_labels(gs: GateSet, circuits, what: str = "circuit") -> None:
    known = set(gs.gates)
    for c in circuits:
        bad = [lbl for lbl in c.layers if lbl not in known]
        if bad:
            raise ValidationError(f"{what} {c} uses unknown gate label(s) {bad}")


def file_digest(path_or_text, length: int = 12) -> str:
    """Short sha256 of a file's bytes (or of a string)."""
    if isinstance(path_or_text, (str, os.PathLike)) and Path(path_or_text).exists():
        data = Path(path_or_text).read_bytes()
    else:
        data = str(path_or_text).encode("utf-8")
    return hashlib.sha256(data).hexdigest()[:length]
