"""Shipped single-qubit XYI gate set, fiducials and candidate germs."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .fileio import parse_circuit_list, parse_gateset
from .ptm import Circuit, GateSet

BUILTINS = ("xyi",)


@dataclass(frozen=True)
class BuiltinSet:
    gateset: GateSet
    prep_fiducials: list[Circuit]
    meas_fiducials: list[Circuit]
    germs: list[Circuit]


def _read(name: str) -> str:
    return resources.files("gstfpr.data").joinpath(name).read_text(encoding="utf-8")


def builtin_text(name: str, part: str) -> str:
    """Raw file text of a shipped data file (``part`` in gateset/fiducials/germs)."""
    if name not in BUILTINS:
        raise KeyError(f"unknown builtin {name!r}; choose from {BUILTINS}")
    fname = {"gateset": f"{name}.gateset", "fiducials": f"{name}_fiducials.txt",
             "germs": f"{name}_germs.txt"}[part]
    return _read(fname)


def load_builtin(name: str = "xyi", parameterization: str = "TP") -> BuiltinSet:
    gs = parse_gateset(builtin_text(name, "gateset"), parameterization=parameterization,
                       name=name.upper(), source=f"<builtin {name}>")
    fids = parse_circuit_list(builtin_text(name, "fiducials"), source=f"<builtin {name}>")
    germs = parse_circuit_list(builtin_text(name, "germs"), source=f"<builtin {name}>")
    return BuiltinSet(gs, list(fids), list(fids), germs)
