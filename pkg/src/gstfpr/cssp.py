"""
Column subset selection: greedy A-optimal search driven by rank-one
Moore-Penrose updates, and an SVD + pivoted-QR selector.

The greedy objective is lexicographic: first the rank of the selected
columns' gram matrix ``C C^T``, then ``Tr((C C^T)^+)`` (lower is better).
Candidate scores are always obtained from the rank-one update formulas,
never from a fresh pseudo-inverse.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .linalg import RANK_TOL, numerical_rank, pmap, rank_from_singular_values, svd

EPS_Y = 1e-8
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class PinvState:
    """Gram matrix ``C C^T`` of the current columns and its pseudo-inverse."""

    gram_pinv: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    rank: int = 0
    score: float = 0.0
    # orthonormal basis of range(gram); gives the complement projection
    # (I - G G^+) v without the round-off that accumulates in G^+
    basis: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.basis is None:
            object.__setattr__(self, "basis", np.zeros((self.gram.shape[0], 0)))

    @classmethod
    def empty(cls, m: int) -> "PinvState":
        return cls(np.zeros((m, m)), np.zeros((m, m)), 0, 0.0)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]


@dataclass
class SelectionResult:
    indices: list[int]
    achieved_rank: int
    score: float
    satisfied: bool = True


def _meyer_terms(state: PinvState, V: np.ndarray):
    X = state.gram_pinv @ V
    Q = state.basis
    Y = V - Q @ (Q.T @ V)
    Y -= Q @ (Q.T @ Y)  # second pass keeps y orthogonal to working precision
    beta = 1.0 + np.einsum("ij,ij->j", V, X)
    return X, Y, beta


def _increases_rank(ny, nv, eps_y, atol):
    return ny > np.maximum(eps_y * nv, atol)


def pinv_rank_one_update(state: PinvState, v, eps_y: float = EPS_Y,
                         atol: float = 0.0) -> PinvState:
    """State for ``gram + v v^T``.

    With ``x = P v``, ``y = (I - G P) v`` and ``beta = 1 + v^T P v``:

    * ``||y|| > eps_y ||v||`` (v leaves the current column space):
      ``P + (-(x y^T + y x^T) + beta y y^T / ||y||^2) / ||y||^2`` and the
      rank goes up by one;
    * otherwise ``P - x x^T / beta``.

    ``beta >= 1`` for a PSD gram, which rules out the remaining case of
    the general symmetric update.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != state.dim:
        raise ValueError(f"vector has length {v.shape[0]}, state is {state.dim}-dimensional")
    X, Y, beta = _meyer_terms(state, v[:, None])
    x, y, beta = X[:, 0], Y[:, 0], float(beta[0])
    gram = state.gram + np.outer(v, v)
    ny = np.linalg.norm(y)
    if _increases_rank(ny, np.linalg.norm(v), eps_y, atol):
        ny2 = ny * ny
        xy = np.outer(x, y)
        gamma = -(xy + xy.T) / ny2 + (beta / (ny2 * ny2)) * np.outer(y, y)
        rank = state.rank + 1
        basis = np.column_stack([state.basis, y / ny])
    else:
        assert beta > 1.0 - 1e-8, f"beta={beta} < 1: gram is not PSD"
        gamma = -np.outer(x, x) / beta
        rank = state.rank
        basis = state.basis
    pinv = state.gram_pinv + gamma
    pinv = 0.5 * (pinv + pinv.T)
    return PinvState(pinv, gram, rank, float(np.trace(pinv)), basis)


def rank_one_trial(state: PinvState, V, eps_y: float = EPS_Y, atol: float = 0.0):
    """Trace and rank gain of ``state`` updated by each column of ``V``.

    Returns ``(gains, traces)``: boolean rank increase and the updated
    ``Tr(P)`` per candidate, from the traces of the update terms above.
    ``state`` is not modified.
    """
    V = np.asarray(V, dtype=float)
    X, Y, beta = _meyer_terms(state, V)
    ny2 = np.einsum("ij,ij->j", Y, Y)
    gains = _increases_rank(np.sqrt(ny2), np.linalg.norm(V, axis=0), eps_y, atol)
    safe = np.where(gains, ny2, 1.0)
    up = (-2.0 * np.einsum("ij,ij->j", X, Y) + beta) / safe
    down = -np.einsum("ij,ij->j", X, X) / beta
    return gains, state.score + np.where(gains, up, down)


def _best(indices, ranks, scores) -> int:
    """Highest rank, then lowest score, ties (1e-12 relative) to the lowest index."""
    ranks = np.asarray(ranks)
    scores = np.asarray(scores, dtype=float)
    top = ranks == ranks.max()
    s_min = scores[top].min()
    tied = top & (scores <= s_min + TIE_RTOL * abs(s_min))
    return int(np.asarray(indices)[tied].min())


def _default_atol(norms) -> float:
    return 1e-12 * float(np.max(norms)) if len(norms) else 0.0


def greedy_column_select(J, target_rank="full", tol: float = RANK_TOL, eps_y: float = EPS_Y,
                         atol: float | None = None, workers: int | None = None) -> SelectionResult:
    """Greedily pick columns of ``J`` until their rank reaches ``target_rank``.

    Each iteration scores every remaining column with a trial rank-one
    update and accepts the best.  Columns that no longer raise the rank are
    dropped for good, since the selected span only grows.  If
    ``target_rank`` exceeds ``rank(J)`` the best achievable selection is
    returned with ``satisfied=False``.
    """
    J = np.asarray(J, dtype=float)
    m, n = J.shape
    full = numerical_rank(J, tol) if J.size else 0
    target = full if target_rank == "full" else int(target_rank)
    norms = np.linalg.norm(J, axis=0)
    if atol is None:
        atol = _default_atol(norms)

    state = PinvState.empty(m)
    active = np.ones(n, dtype=bool)
    chosen: list[int] = []
    while state.rank < target:
        cand = np.flatnonzero(active)
        if cand.size == 0:
            break
        if workers and workers > 1 and cand.size > 64:
            chunks = np.array_split(cand, workers)
            parts = pmap(lambda c: rank_one_trial(state, J[:, c], eps_y, atol), chunks, workers)
            gains = np.concatenate([p[0] for p in parts])
            traces = np.concatenate([p[1] for p in parts])
        else:
            gains, traces = rank_one_trial(state, J[:, cand], eps_y, atol)
        if not gains.any():
            break
        active[cand[~gains]] = False
        best = _best(cand[gains], np.zeros(gains.sum()), traces[gains])
        state = pinv_rank_one_update(state, J[:, best], eps_y, atol)
        chosen.append(best)
        active[best] = False
    ok = target <= full and state.rank >= target
    return SelectionResult(chosen, state.rank, state.score, ok)


def greedy_group_select(groups, target_rank: int, eps_y: float = EPS_Y,
                        atol: float | None = None) -> tuple[SelectionResult, PinvState]:
    """Greedy selection where each candidate contributes several vectors.

    ``groups[i]`` is an array of row vectors (all of length m).  A candidate
    is scored by applying its rows as sequential rank-one updates to a copy
    of the accepted state.
    """
    groups = [np.atleast_2d(np.asarray(g, dtype=float)) for g in groups]
    if not groups:
        return SelectionResult([], 0, 0.0, target_rank == 0), PinvState.empty(0)
    m = groups[0].shape[1]
    if atol is None:
        atol = _default_atol([np.max(np.linalg.norm(g, axis=1), initial=0.0) for g in groups])

    def apply(state, rows):
        for row in rows:
            state = pinv_rank_one_update(state, row, eps_y, atol)
        return state

    state = PinvState.empty(m)
    active = list(range(len(groups)))
    chosen: list[int] = []
    while state.rank < target_rank and active:
        trials = [apply(state, groups[i]) for i in active]
        ranks = np.array([t.rank for t in trials])
        if ranks.max() == state.rank:
            break
        best = _best(active, ranks, [t.score for t in trials])
        # a group already inside the accepted span stays inside it
        keep = [i for i, r in zip(active, ranks) if r > state.rank and i != best]
        state = trials[active.index(best)]
        chosen.append(best)
        active = keep
    res = SelectionResult(chosen, state.rank, state.score, state.rank >= target_rank)
    return res, state


def rrqr_column_select(J, tol: float = RANK_TOL) -> SelectionResult:
    """Select ``rank(J)`` columns by pivoted QR on the leading right singular vectors.

    With ``J = U S V^T`` of numerical rank ``r``, a column-pivoted QR of the
    ``r x n`` block ``V^T[:r]`` picks the permutation whose leading
    ``r x r`` block of right singular vectors is well conditioned; the first
    ``r`` pivots index the selected columns.
    """
    J = np.asarray(J, dtype=float)
    if J.size == 0:
        return SelectionResult([], 0, 0.0)
    _, s, Vt = svd(J)
    r = rank_from_singular_values(s, tol)
    if r == 0:
        return SelectionResult([], 0, 0.0)
    _, _, perm = sla.qr(Vt[:r], mode="economic", pivoting=True)
    idx = [int(i) for i in perm[:r]]
    C = J[:, idx]
    score = float(np.trace(np.linalg.pinv(C @ C.T)))
    return SelectionResult(idx, numerical_rank(C, tol), score)
