"""
Experiment designs: fiducial-germ-power-fiducial circuits grouped by
maximum depth L, either over every fiducial pair or over an FPR subset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .fpr import FprAssignment
from .ptm import Circuit

SPAM_GERM = -1  # germ index written for bare fiducial-pair circuits


def germ_power(germ: Circuit, L: int) -> int:
    """Largest ``r`` with ``len(germ) * r <= L`` (0 means the germ is skipped)."""
    if L < 1:
        raise ValidationError("L must be >= 1")
    if len(germ) == 0:
        raise ValidationError("germ must contain at least one gate")
    return L // len(germ)


@dataclass
class ExperimentDesign:
    circuits: list[Circuit]
    Ls: list[int]
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.circuits)

    def added_at(self, L: int) -> list[Circuit]:
        """Circuits that first appear at max depth ``L``."""
        return [c for c in self.circuits if c.max_length == L]

    def upto(self, L: int) -> list[Circuit]:
        return [c for c in self.circuits if c.max_length <= L]

    def counts(self) -> dict[int, int]:
        return {L: len(self.added_at(L)) for L in self.Ls}

    def cumulative_counts(self) -> dict[int, int]:
        return {L: len(self.upto(L)) for L in self.Ls}


def _validate_Ls(Ls) -> list[int]:
    Ls = [int(L) for L in Ls]
    if not Ls:
        raise ValidationError("no max depths given")
    if any(L < 1 for L in Ls):
        raise ValidationError("max depths must be positive")
    if any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise ValidationError("max depths must be strictly ascending")
    return Ls


def build_design(germs, prep_fiducials, meas_fiducials, Ls, fpr: FprAssignment | None = None,
                 metadata: dict | None = None) -> ExperimentDesign:
    """Assemble ``f g^r h`` circuits for every max depth ``L``.

    The first depth also gets the bare ``f h`` circuits.  At ``L = 1`` every
    fiducial pair is used; at larger ``L`` an FPR assignment, if given,
    restricts each germ to its selected pairs.  A circuit whose gate string
    already occurred (at this or an earlier depth) is dropped.
    """
    germs = [g.untagged for g in germs]
    F, H = list(prep_fiducials), list(meas_fiducials)
    if not germs:
        raise ValidationError("germ list is empty")
    if not F or not H:
        raise ValidationError("fiducial lists must be nonempty")
    Ls = _validate_Ls(Ls)
    if fpr is not None:
        if [str(g) for g in fpr.germs] != [str(g) for g in germs]:
            raise ValidationError("FPR assignment was built for a different germ list")
        for plist in fpr.pairs:
            for l, k in plist:
                if not (0 <= l < len(F) and 0 <= k < len(H)):
                    raise ValidationError(f"fiducial pair {l}:{k} out of range")
    all_pairs = [(l, k) for l in range(len(F)) for k in range(len(H))]

    seen: set[str] = set()
    out: list[Circuit] = []

    def emit(c: Circuit):
        key = str(c)
        if key not in seen:
            seen.add(key)
            out.append(c)

    for l, k in all_pairs:
        emit(Circuit(F[l].layers + H[k].layers, prep=l, germ=SPAM_GERM, power=0,
                     meas=k, max_length=Ls[0]))
    for L in Ls:
        for gi, g in enumerate(germs):
            r = germ_power(g, L)
            if r == 0:
                continue
            pairs = all_pairs if fpr is None or L == 1 else fpr.pairs[gi]
            body = (g * r).layers
            for l, k in pairs:
                emit(Circuit(F[l].layers + body + H[k].layers, prep=l, germ=gi, power=r,
                             meas=k, max_length=L))
    meta = {"fpr": "none" if fpr is None else fpr.mode}
    meta.update(metadata or {})
    meta["L"] = ",".join(map(str, Ls))
    return ExperimentDesign(out, Ls, meta)


def lower_bound(n_amplifiable: int, num_outcomes: int) -> int:
    """``ceil(N_a / (N_E - 1))``: each circuit yields at most ``N_E - 1`` independent rows."""
    if num_outcomes < 2:
        raise ValidationError("need at least two outcomes")
    return math.ceil(n_amplifiable / (num_outcomes - 1))


@dataclass
class CountReport:
    total: int
    added: dict[int, int]
    lower_bound: int

    @property
    def meets_bound(self) -> dict[int, bool]:
        return {L: n >= self.lower_bound for L, n in self.added.items()}


def count_report(design: ExperimentDesign | None = None, gs=None, *, n_amplifiable=None,
                 num_outcomes=None) -> CountReport:
    """Circuit totals and per-depth additions next to the information bound.

    ``n_amplifiable`` defaults to the rank of the reference germs' amplified
    directions for ``gs``; ``num_outcomes`` to ``gs.num_outcomes``.
    """
    if n_amplifiable is None or num_outcomes is None:
        if gs is None:
            raise ValidationError("need a gate set or explicit N_a and N_E")
        if n_amplifiable is None:
            from .germs import amplifiable_subspace
            from .linalg import numerical_rank
            n_amplifiable = numerical_rank(amplifiable_subspace(gs))
        if num_outcomes is None:
            num_outcomes = gs.num_outcomes
    bound = lower_bound(int(n_amplifiable), int(num_outcomes))
    if design is None:
        return CountReport(0, {}, bound)
    return CountReport(len(design), design.counts(), bound)


def format_count_report(rep: CountReport, full: CountReport | None = None) -> str:
    lines = [f"lower bound per iteration = {rep.lower_bound}"]
    head = "L\tadded\tmeets_bound" + ("\tfull_added" if full else "")
    lines.append(head)
    for L, n in rep.added.items():
        row = f"{L}\t{n}\t{'yes' if n >= rep.lower_bound else 'no'}"
        if full:
            row += f"\t{full.added.get(L, 0)}"
        lines.append(row)
    lines.append(f"total\t{rep.total}" + (f"\t\t{full.total}" if full else ""))
    return "\n".join(lines) + "\n"


def format_design(design: ExperimentDesign) -> str:
    """Header line of ``key=value`` pairs, then one tab-separated row per circuit."""
    for key, val in design.metadata.items():
        if any(ch.isspace() or ch == "=" for ch in f"{key}{val}"):
            raise ValidationError(f"metadata {key}={val!r} cannot hold spaces or '='")
    lines = ["# " + " ".join(f"{k}={v}" for k, v in design.metadata.items())]
    for c in design.circuits:
        lines.append(f"{c.max_length}\t{c.germ}\t{c.power}\t{c.prep}\t{c.meas}\t{c}")
    return "\n".join(lines) + "\n"


def write_design(design: ExperimentDesign, path) -> None:
    Path(path).write_text(format_design(design), encoding="utf-8")


def parse_design(text: str, source: str | None = None) -> ExperimentDesign:
    meta: dict = {}
    circuits = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.startswith("#"):
            for tok in raw[1:].split():
                if "=" not in tok:
                    raise ParseError(f"bad header token {tok!r}", source, lineno)
                k, v = tok.split("=", 1)
                meta[k] = v
            continue
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 6:
            raise ParseError("expected 6 tab-separated fields", source, lineno)
        try:
            L, gi, r, l, k = (int(p) for p in parts[:5])
        except ValueError:
            raise ParseError("non-integer structure field", source, lineno) from None
        c = Circuit.from_str(parts[5])
        circuits.append(Circuit(c.layers, prep=l, germ=gi, power=r, meas=k, max_length=L))
    if "L" in meta:
        Ls = [int(x) for x in meta["L"].split(",")]
    else:
        Ls = sorted({c.max_length for c in circuits})
    return ExperimentDesign(circuits, Ls, meta)


def read_design(path) -> ExperimentDesign:
    path = Path(path)
    return parse_design(path.read_text(encoding="utf-8"), source=str(path))
