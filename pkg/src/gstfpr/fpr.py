"""
Per-germ global fiducial pair reduction.

Stage one picks, from the concatenated amplified bases of all germs, a
column subset of full rank and hands each germ the columns that came from
it (``W_g``).  Germs whose directions are already covered get nothing.

Stage two keeps, per germ, just enough fiducial pairs ``(f, h)`` that the
stacked directional Jacobians ``J(f g h) W_g`` reach rank ``k_g``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cssp import EPS_Y, greedy_column_select, greedy_group_select, rrqr_column_select
from .errors import IncompleteGermSetError, InsufficientFiducialsError, ParseError, ValidationError
from .germs import (EIG_TOL, amplified_bases, check_amplificational_completeness,
                    default_reference_germs, germ_concat)
from .linalg import RANK_TOL, numerical_rank, pmap
from .ptm import Circuit, GateSet, circuit_jacobian

MODES = ("greedy", "rrqr")


@dataclass
class ParamAssignment:
    """Amplified directions assigned to each germ by stage one."""

    germs: list[Circuit]
    W: list[np.ndarray] = field(repr=False)  # per germ, (N_p, k_g)
    columns: list[list[int]]  # per germ, selected column indices into J
    J: np.ndarray = field(repr=False)
    mode: str = "greedy"

    @property
    def k(self) -> list[int]:
        return [w.shape[1] for w in self.W]

    @property
    def total(self) -> int:
        return sum(self.k)


@dataclass
class FprAssignment:
    """Selected fiducial pairs ``(prep index, meas index)`` per germ."""

    germs: list[Circuit]
    pairs: list[list[tuple[int, int]]]
    ranks: list[int] | None = None
    mode: str = "greedy"

    @property
    def num_pairs(self) -> int:
        return sum(len(p) for p in self.pairs)

    def pairs_for(self, germ_index: int) -> list[tuple[int, int]]:
        return self.pairs[germ_index]


def stage_one(gs: GateSet, germs, mode: str = "greedy", reference=None,
              tol: float = RANK_TOL, eig_tol: float = EIG_TOL,
              workers: int | None = None) -> ParamAssignment:
    """Split the amplifiable directions among the germs.

    ``reference`` (germ list or concatenated matrix) defines the
    amplifiable subspace; by default :func:`default_reference_germs`.
    A germ whose circuit string repeats an earlier germ gets ``k = 0``
    without being offered to the selector.

    Raises
    ------
    IncompleteGermSetError
        If the germs do not span the amplifiable subspace.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown selection mode {mode!r}; choose from {MODES}")
    germs = [g.untagged for g in germs]
    if not germs:
        raise ValidationError("germ list is empty")
    first = {}
    for i, g in enumerate(germs):
        first.setdefault(str(g), i)
    unique = sorted(first.values())

    bases = amplified_bases(gs, [germs[i] for i in unique], eig_tol, tol, workers)
    J, back = germ_concat(bases)
    if reference is None:
        reference = default_reference_germs(gs, germs)
    report = check_amplificational_completeness(J, gs, reference, tol, eig_tol)
    if not report.complete:
        raise IncompleteGermSetError(
            f"germ set reaches rank {report.rank} of {report.n_amplifiable} amplifiable "
            f"directions; {report.missing.shape[1]} missing", report.missing)

    if mode == "greedy":
        sel = greedy_column_select(J, "full", tol, workers=workers)
    else:
        sel = rrqr_column_select(J, tol)

    n_p = gs.num_params
    columns: list[list[int]] = [[] for _ in germs]
    for col in sorted(sel.indices):
        columns[unique[back[col]]].append(col)
    W = [J[:, cols] if cols else np.zeros((n_p, 0)) for cols in columns]
    return ParamAssignment(germs, W, columns, J, mode)


def fidpair_circuit(f: Circuit, germ: Circuit, h: Circuit) -> Circuit:
    """Prep fiducial, then the germ once, then the measurement fiducial."""
    return Circuit(f.layers + germ.layers + h.layers)


def fidpair_jacobians(gs: GateSet, germ: Circuit, W, prep_fiducials, meas_fiducials):
    """Directional Jacobians ``J(f g h) W`` for every fiducial pair.

    Returns a list of ``((l, k), D)`` in row-major (prep, meas) order, with
    ``D`` of shape ``(N_E, k_g)``.
    """
    W = np.asarray(W, dtype=float)
    out = []
    for l, f in enumerate(prep_fiducials):
        for k, h in enumerate(meas_fiducials):
            if W.shape[1] == 0:
                D = np.zeros((gs.num_outcomes, 0))
            else:
                D = circuit_jacobian(gs, fidpair_circuit(f, germ, h)) @ W
            out.append(((l, k), D))
    return out


def _select_pairs(gs, germ, W, F, H, tol, eps_y):
    k_g = W.shape[1]
    if k_g == 0:
        return [], 0
    cands = fidpair_jacobians(gs, germ, W, F, H)
    full = np.vstack([D for _, D in cands])
    if numerical_rank(full, tol) < k_g:
        raise InsufficientFiducialsError(
            f"fiducial pairs see only rank {numerical_rank(full, tol)} of the "
            f"{k_g} directions assigned to germ {germ}")
    sel, _ = greedy_group_select([D for _, D in cands], k_g, eps_y)
    pairs = [cands[i][0] for i in sel.indices]
    rank = numerical_rank(np.vstack([cands[i][1] for i in sel.indices]), tol)
    return pairs, rank


def stage_two(gs: GateSet, pa: ParamAssignment, prep_fiducials, meas_fiducials,
              tol: float = RANK_TOL, eps_y: float = EPS_Y,
              workers: int | None = None) -> FprAssignment:
    """Greedy fiducial-pair selection for each germ, independently.

    Pairs are added in order of rank gain, then lowest ``Tr((D^T D)^+)``,
    until the selected pairs' stacked directional Jacobian has rank ``k_g``.

    Raises
    ------
    InsufficientFiducialsError
        If even all pairs together miss some assigned direction.
    """
    F, H = list(prep_fiducials), list(meas_fiducials)
    if not F or not H:
        raise ValidationError("fiducial lists must be nonempty")
    results = pmap(lambda i: _select_pairs(gs, pa.germs[i], pa.W[i], F, H, tol, eps_y),
                   range(len(pa.germs)), workers)
    return FprAssignment(list(pa.germs), [p for p, _ in results], [r for _, r in results],
                         pa.mode)


def run_fpr(gs: GateSet, germs, prep_fiducials, meas_fiducials, mode: str = "greedy",
            reference=None, tol: float = RANK_TOL, eig_tol: float = EIG_TOL,
            workers: int | None = None) -> tuple[ParamAssignment, FprAssignment]:
    pa = stage_one(gs, germs, mode, reference, tol, eig_tol, workers)
    return pa, stage_two(gs, pa, prep_fiducials, meas_fiducials, tol, workers=workers)


def pair_lower_bound(k: int, num_outcomes: int) -> int:
    """Each pair contributes at most ``N_E - 1`` independent rows."""
    return math.ceil(k / (num_outcomes - 1)) if k else 0


def format_fpr(fa: FprAssignment, header: dict | None = None) -> str:
    """One line per germ: ``germ<TAB>l:k l:k ...``."""
    lines = []
    for key, val in (header or {}).items():
        lines.append(f"# {key}={val}")
    for germ, pairs in zip(fa.germs, fa.pairs):
        lines.append(f"{germ}\t" + " ".join(f"{l}:{k}" for l, k in pairs))
    return "\n".join(lines) + "\n"


def write_fpr(fa: FprAssignment, path, header: dict | None = None) -> None:
    Path(path).write_text(format_fpr(fa, header), encoding="utf-8")


def parse_fpr(text: str, source: str | None = None) -> FprAssignment:
    germs, pairs = [], []
    mode = "greedy"
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.startswith("#"):
            body = raw[1:].strip()
            if body.startswith("mode="):
                mode = body.split("=", 1)[1]
            continue
        if not raw.strip():
            continue
        if "\t" not in raw:
            raise ParseError("expected 'germ<TAB>pairs'", source, lineno)
        gtext, ptext = raw.split("\t", 1)
        germ = Circuit.from_str(gtext)
        if len(germ) == 0:
            raise ParseError("empty germ", source, lineno)
        plist = []
        for tok in ptext.split():
            try:
                l, k = tok.split(":")
                plist.append((int(l), int(k)))
            except ValueError:
                raise ParseError(f"bad fiducial pair {tok!r}", source, lineno) from None
        if len(set(plist)) != len(plist):
            raise ParseError("duplicate fiducial pair", source, lineno)
        germs.append(germ)
        pairs.append(plist)
    if not germs:
        raise ParseError("no germs in FPR file", source)
    return FprAssignment(germs, pairs, None, mode)


def read_fpr(path) -> FprAssignment:
    path = Path(path)
    return parse_fpr(path.read_text(encoding="utf-8"), source=str(path))
