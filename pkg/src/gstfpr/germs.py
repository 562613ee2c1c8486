"""
Germ analysis: twirled derivatives, amplified parameter bases and
amplificational-completeness checks.

Repeating a germ ``g`` r times turns the derivative of its transfer matrix
into an average of ``tau^i (d tau) tau^-i`` over the cyclic group generated
by ``tau = tau(g)``.  As r grows that average converges to the projection
of ``d tau`` onto the commutant of ``tau``.  We call that projection the
twirled derivative; its right singular vectors are the parameter directions
the germ amplifies.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .builtin import load_builtin
from .errors import NumericalError, ValidationError
from .linalg import RANK_TOL, numerical_rank, pmap, range_basis, singular_values, svd
from .ptm import Circuit, GateSet, compose_ptm, ptm_jacobian

EIG_TOL = 1e-9
IMAG_RESIDUE_TOL = 1e-9


@dataclass(frozen=True)
class TwirledDerivative:
    germ: Circuit
    slices: np.ndarray = field(repr=False)  # (d^2, d^2, N_p)
    tol: float = EIG_TOL

    @property
    def matrix(self) -> np.ndarray:
        """Matricized ``d^4 x N_p`` form."""
        hs = self.slices.shape[0]
        return self.slices.reshape(hs * hs, -1)

    @property
    def num_params(self) -> int:
        return self.slices.shape[2]


@dataclass(frozen=True)
class AmplifiedBasis:
    germ: Circuit
    V: np.ndarray = field(repr=False)  # (N_p, k), orthonormal columns
    singular_values: np.ndarray = field(repr=False)
    tol: float = RANK_TOL

    @property
    def k(self) -> int:
        return self.V.shape[1]


class CommutantProjector:
    """Projection onto the commutant of a diagonalizable matrix ``tau``.

    In the eigenbasis ``tau = S diag(lam) S^-1`` a matrix commutes with tau
    iff its entries between eigenvalues that differ are zero, so the
    projection masks those entries.  Normal matrices (every ideal transfer
    matrix) use the complex Schur form, giving a unitary ``S``.
    """

    def __init__(self, tau, tol: float = EIG_TOL):
        tau = np.asarray(tau, dtype=float)
        self.tau = tau
        self.tol = tol
        T, Z = sla.schur(tau, output="complex")
        scale = max(1.0, np.max(np.abs(T)))
        if np.max(np.abs(np.triu(T, 1)), initial=0.0) <= 1e-10 * scale:
            self.eigenvalues = np.diag(T).copy()
            self.S, self.S_inv = Z, Z.conj().T
        else:
            lam, S = sla.eig(tau)
            try:
                S_inv = np.linalg.inv(S)
            except np.linalg.LinAlgError as exc:
                raise NumericalError(f"eigendecomposition failed: {exc}") from None
            if np.linalg.cond(S) > 1e8:
                raise NumericalError("germ transfer matrix is not safely diagonalizable")
            self.eigenvalues, self.S, self.S_inv = lam, S, S_inv
        lam = self.eigenvalues
        self.mask = np.abs(lam[:, None] - lam[None, :]) <= tol

    def project(self, mats: np.ndarray) -> np.ndarray:
        """Project a stack of matrices shaped ``(d^2, d^2, n)``."""
        stack = np.moveaxis(np.asarray(mats), 2, 0)
        inner = self.S_inv @ stack @ self.S
        inner *= self.mask
        out = self.S @ inner @ self.S_inv
        resid = np.max(np.abs(out.imag), initial=0.0)
        if resid >= IMAG_RESIDUE_TOL:
            raise NumericalError(f"commutant projection left imaginary residue {resid:.3g}")
        return np.ascontiguousarray(np.moveaxis(out.real, 0, 2))


def twirled_derivative(gs: GateSet, germ: Circuit, tol: float = EIG_TOL) -> TwirledDerivative:
    """Commutant projection of every parameter slice of ``d tau(germ)``.

    The trailing ``tau^(r-1)`` factor of the finite-r product rule is a
    fixed invertible basis change and is dropped.
    """
    if len(germ) == 0:
        raise ValidationError("germ must contain at least one gate")
    tau = compose_ptm(gs, germ)
    raw = ptm_jacobian(gs, germ)
    slices = CommutantProjector(tau, tol).project(raw)
    return TwirledDerivative(germ.untagged, slices, tol)


def group_average(gs: GateSet, germ: Circuit, r: int) -> np.ndarray:
    """Finite-r average ``(1/r) sum_{i<r} tau^i (d tau) tau^-i``, shape (d^2, d^2, N_p)."""
    if r < 1:
        raise ValidationError("r must be >= 1")
    tau = compose_ptm(gs, germ)
    tau_inv = np.linalg.inv(tau)
    stack = np.moveaxis(ptm_jacobian(gs, germ), 2, 0)
    total = np.zeros_like(stack)
    left, right = np.eye(gs.hs_dim), np.eye(gs.hs_dim)
    for _ in range(r):
        total += left @ stack @ right
        left, right = tau @ left, right @ tau_inv
    return np.moveaxis(total / r, 0, 2)


def _germ_param_indices(gs: GateSet, germ: Circuit) -> np.ndarray:
    labels = sorted(set(germ.layers), key=gs.gate_labels.index)
    return np.concatenate([gs.gate_param_indices(lbl) for lbl in labels])


def exact_power_derivative_check(gs: GateSet, germ: Circuit, r: int,
                                 step: float = 1e-6) -> float:
    """Max deviation between finite differences of ``tau^r / r`` and the product rule.

    The product-rule side is ``(1/r) sum_i tau^i (d tau) tau^-i tau^(r-1)``
    with ``d tau`` from the analytic circuit derivative.  Only parameters of
    gates appearing in the germ are perturbed; every other slice is
    identically zero on both sides.
    """
    if r < 1:
        raise ValidationError("r must be >= 1")
    tau = compose_ptm(gs, germ)
    avg = group_average(gs, germ, r)
    rhs = np.einsum("ijn,jk->ikn", avg, np.linalg.matrix_power(tau, r - 1))

    theta0 = gs.to_vector()
    worst = 0.0
    power = germ * r
    for n in _germ_param_indices(gs, germ):
        th = theta0.copy()
        th[n] += step
        plus = compose_ptm(gs.from_vector(th), power)
        th[n] -= 2 * step
        minus = compose_ptm(gs.from_vector(th), power)
        fd = (plus - minus) / (2 * step) / r
        worst = max(worst, float(np.max(np.abs(fd - rhs[:, :, n]))))
    return worst


def amplified_basis(td: TwirledDerivative, tol: float = RANK_TOL) -> AmplifiedBasis:
    """Right singular vectors of the twirled derivative with ``s > tol * s_max``."""
    _, s, Vt = svd(td.matrix)
    k = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return AmplifiedBasis(td.germ, np.ascontiguousarray(Vt[:k].T), s[:k].copy(), tol)


def amplified_bases(gs: GateSet, germs, eig_tol: float = EIG_TOL, rank_tol: float = RANK_TOL,
                    workers: int | None = None) -> list[AmplifiedBasis]:
    return pmap(lambda g: amplified_basis(twirled_derivative(gs, g, eig_tol), rank_tol),
                germs, workers)


def germ_concat(bases) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise concatenation of amplified bases.

    Returns ``(J, germ_of_column)``; columns keep germ order, then
    singular-value order within each germ.
    """
    bases = list(bases)
    if not bases:
        raise ValidationError("no amplified bases to concatenate")
    n_params = {b.V.shape[0] for b in bases}
    if len(n_params) != 1:
        raise ValidationError(f"bases disagree on the parameter count: {sorted(n_params)}")
    J = np.hstack([b.V for b in bases])
    back = np.concatenate([np.full(b.k, i, dtype=int) for i, b in enumerate(bases)])
    return J, back


@dataclass
class CompletenessReport:
    rank: int
    n_amplifiable: int
    complete: bool
    missing: np.ndarray = field(repr=False)  # (N_p, m) orthonormal basis of unreached directions


def default_reference_germs(gs: GateSet, germs=()) -> list[Circuit]:
    """Germ list that defines the amplifiable-parameter count for ``gs``.

    The shipped XYI set uses its shipped germ list.  Any other gate set uses
    every word of length one or two over its gate labels, plus ``germs``.
    """
    ref = load_builtin("xyi")
    if set(gs.gates) == set(ref.gateset.gates) and all(
            np.allclose(gs.gates[k], ref.gateset.gates[k], atol=1e-12) for k in gs.gates):
        return list(ref.germs)
    words = [Circuit((a,)) for a in gs.gate_labels]
    words += [Circuit((a, b)) for a, b in itertools.product(gs.gate_labels, repeat=2) if a != b]
    seen, out = set(), []
    for c in list(germs) + words:
        if str(c) not in seen:
            seen.add(str(c))
            out.append(c.untagged)
    return out


def amplifiable_subspace(gs: GateSet, reference_germs=None, eig_tol: float = EIG_TOL,
                         rank_tol: float = RANK_TOL, workers: int | None = None) -> np.ndarray:
    """Concatenated amplified bases of the reference germ list."""
    if reference_germs is None:
        reference_germs = default_reference_germs(gs)
    J_ref, _ = germ_concat(amplified_bases(gs, reference_germs, eig_tol, rank_tol, workers))
    return J_ref


def check_amplificational_completeness(J, gs: GateSet, reference=None,
                                       tol: float = RANK_TOL,
                                       eig_tol: float = EIG_TOL) -> CompletenessReport:
    """Compare the span of ``J`` with the amplifiable subspace.

    ``reference`` is a list of germs or an already concatenated reference
    matrix; ``None`` uses :func:`default_reference_germs`.  The
    amplifiable-parameter count is the rank of the reference matrix.
    """
    if reference is None or not isinstance(reference, np.ndarray):
        J_ref = amplifiable_subspace(gs, reference, eig_tol, tol)
    else:
        J_ref = reference
    J = np.asarray(J, dtype=float)
    n_a = numerical_rank(J_ref, tol)
    rank = numerical_rank(J, tol) if J.size else 0

    reached = range_basis(J, tol) if J.size else np.zeros((J_ref.shape[0], 0))
    resid = J_ref - reached @ (reached.T @ J_ref)
    s_ref = singular_values(J_ref)
    if resid.size and s_ref.size:
        U, s, _ = svd(resid)
        missing = U[:, s > tol * s_ref[0]]
    else:
        missing = np.zeros((J_ref.shape[0], 0))
    return CompletenessReport(rank, n_a, missing.shape[1] == 0, missing)


@dataclass
class FiducialReport:
    prep_rank: int
    meas_rank: int
    hs_dim: int

    @property
    def complete(self) -> bool:
        return self.prep_rank == self.hs_dim and self.meas_rank == self.hs_dim


def fiducial_completeness(gs: GateSet, prep_fiducials, meas_fiducials,
                          tol: float = RANK_TOL) -> FiducialReport:
    """Ranks of the effective preparations and effective measurements."""
    preps = np.column_stack([compose_ptm(gs, f) @ gs.rho for f in prep_fiducials])
    meas = np.vstack([gs.effects @ compose_ptm(gs, h) for h in meas_fiducials])
    return FiducialReport(numerical_rank(preps @ preps.T, tol),
                          numerical_rank(meas.T @ meas, tol), gs.hs_dim)


def format_verify_report(bases, completeness: CompletenessReport,
                         fiducials: FiducialReport | None = None) -> str:
    lines = [f"{'germ':<28} {'k':>4} {'sigma_max':>12} {'sigma_min':>12}"]
    for b in bases:
        top = f"{b.singular_values[0]:.6g}" if b.k else "-"
        bot = f"{b.singular_values[-1]:.6g}" if b.k else "-"
        flag = "" if b.k else "  (no amplified directions)"
        lines.append(f"{str(b.germ):<28} {b.k:>4} {top:>12} {bot:>12}{flag}")
    lines.append("")
    lines.append(f"rank(J) = {completeness.rank}")
    lines.append(f"N_a = {completeness.n_amplifiable}")
    verdict = "COMPLETE" if completeness.complete else (
        f"INCOMPLETE ({completeness.missing.shape[1]} missing directions)")
    lines.append(f"amplificational completeness: {verdict}")
    if fiducials is not None:
        ok = "COMPLETE" if fiducials.complete else "INCOMPLETE"
        lines.append(f"prep fiducial rank = {fiducials.prep_rank} / {fiducials.hs_dim}")
        lines.append(f"meas fiducial rank = {fiducials.meas_rank} / {fiducials.hs_dim}")
        lines.append(f"informational completeness: {ok}")
    return "\n".join(lines) + "\n"
