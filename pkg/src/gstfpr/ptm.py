"""
Gate sets and circuits in the Pauli-transfer-matrix representation.

States are superkets and effects superbras in the normalized Pauli basis
``B_i = P_i / sqrt(d)`` (so ``Tr[B_i B_j] = delta_ij``).  Gates are real
``d^2 x d^2`` matrices ``tau_ij = Tr[P_i U P_j U^dag] / d``.  A circuit is an
ordered tuple of gate labels applied left-to-right in time; its transfer
matrix is the product taken in reverse order.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import NumericalError, ValidationError

#: imaginary residue tolerated when realifying a transfer matrix
IMAG_TOL = 1e-10

_PAULI_1Q = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

PARAMETERIZATIONS = ("full", "TP")


@dataclass(frozen=True)
class PauliBasis:
    """Normalized n-qubit Pauli basis, identity first, qubit 0 leftmost."""

    num_qubits: int
    labels: tuple[str, ...] = field(repr=False)
    paulis: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 2 ** self.num_qubits

    @property
    def size(self) -> int:
        return 4 ** self.num_qubits

    @property
    def elements(self) -> np.ndarray:
        """Normalized elements ``P_i / sqrt(d)``, shape ``(d^2, d, d)``."""
        return self.paulis / np.sqrt(self.dim)


@functools.lru_cache(maxsize=None)
def pauli_basis(num_qubits: int) -> PauliBasis:
    if num_qubits < 1:
        raise ValidationError("num_qubits must be positive")
    labels = tuple("".join(p) for p in itertools.product("IXYZ", repeat=num_qubits))
    mats = []
    for lbl in labels:
        m = np.ones((1, 1), dtype=complex)
        for ch in lbl:
            m = np.kron(m, _PAULI_1Q[ch])
        mats.append(m)
    paulis = np.array(mats)
    paulis.flags.writeable = False
    return PauliBasis(num_qubits, labels, paulis)


def num_qubits_for(hs_dim: int) -> int:
    """Qubit count from a Hilbert-Schmidt dimension ``4**n``."""
    n = 0
    size = 1
    while size < hs_dim:
        size *= 4
        n += 1
    if size != hs_dim or n == 0:
        raise ValidationError(f"dimension {hs_dim} is not 4**n for a positive integer n")
    return n


def _realify(mat: np.ndarray, tol: float = IMAG_TOL) -> np.ndarray:
    resid = np.max(np.abs(mat.imag)) if mat.size else 0.0
    if resid >= tol:
        raise NumericalError(f"imaginary residue {resid:.3g} exceeds {tol:g}")
    return np.ascontiguousarray(mat.real)


def ptm_from_unitary(U) -> np.ndarray:
    """Pauli transfer matrix of the unitary channel ``rho -> U rho U^dag``."""
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {U.shape}")
    d = U.shape[0]
    n = num_qubits_for(d * d)
    if np.max(np.abs(U.conj().T @ U - np.eye(d))) > 1e-10:
        raise ValidationError("matrix is not unitary within 1e-10")
    P = pauli_basis(n).paulis
    conj = U @ P @ U.conj().T  # U P_j U^dag for every j
    tau = np.einsum("iab,jba->ij", P, conj) / d
    return _realify(tau)


def superket(rho) -> np.ndarray:
    """Pauli-basis coordinates ``Tr[B_i rho]`` of a Hermitian operator."""
    rho = np.asarray(rho, dtype=complex)
    n = num_qubits_for(rho.shape[0] ** 2)
    vec = np.einsum("iab,ba->i", pauli_basis(n).elements, rho)
    return _realify(vec)


# effects are Hermitian, so the superbra has the same coordinates
superbra = superket


def identity_superbra(hs_dim: int) -> np.ndarray:
    v = np.zeros(hs_dim)
    v[0] = np.sqrt(np.sqrt(hs_dim))
    return v


@dataclass(frozen=True)
class Circuit:
    """Ordered gate labels with an optional GST structure tag.

    ``layers`` are applied left-to-right in time.  The structure fields
    record where a circuit came from in an experiment design (prep fiducial
    index, germ index, germ power, measurement fiducial index, max depth).
    Equality and hashing include the tag; use ``str(c)`` as a physical key.
    """

    layers: tuple[str, ...] = ()
    prep: int | None = None
    germ: int | None = None
    power: int | None = None
    meas: int | None = None
    max_length: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @classmethod
    def from_str(cls, text: str) -> "Circuit":
        text = text.strip()
        if text in ("{}", ""):
            return cls(())
        return cls(tuple(text.split()))

    def __str__(self) -> str:
        return " ".join(self.layers) if self.layers else "{}"

    def __len__(self) -> int:
        return len(self.layers)

    def __add__(self, other: "Circuit") -> "Circuit":
        return Circuit(self.layers + other.layers)

    def __mul__(self, reps: int) -> "Circuit":
        return Circuit(self.layers * reps)

    @property
    def untagged(self) -> "Circuit":
        return Circuit(self.layers)


class GateSet:
    """Native state, measurement effects and named gates, plus a parameterization.

    Parameters
    ----------
    rho : array_like, shape (d^2,)
        Prepared state as a superket.
    effects : array_like, shape (N_E, d^2)
        Measurement effects as superbras; must sum to the identity superbra.
    gates : mapping of str to array_like
        Gate label to ``d^2 x d^2`` Pauli transfer matrix.
    parameterization : {"TP", "full"}
        ``"full"`` makes every entry of rho, every effect and every gate an
        independent parameter.  ``"TP"`` freezes the first row of each gate
        and ``rho[0]``, and represents the last effect as the identity minus
        the others, so outcome probabilities sum to one for every parameter
        vector.
    name : str
        Free-form name used in file headers.
    """

    def __init__(self, rho, effects, gates: Mapping[str, np.ndarray],
                 parameterization: str = "TP", name: str = "",
                 effect_labels: Sequence[str] | None = None,
                 povm_atol: float = 1e-12):
        rho = np.array(rho, dtype=float).reshape(-1)
        effects = np.array(effects, dtype=float)
        if effects.ndim != 2:
            raise ValidationError("effects must be a 2-d array (N_E x d^2)")
        hs = rho.shape[0]
        self.num_qubits = num_qubits_for(hs)
        if effects.shape[1] != hs:
            raise ValidationError(f"effects have length {effects.shape[1]}, expected {hs}")
        if effects.shape[0] < 2:
            raise ValidationError("need at least two measurement effects")
        if parameterization not in PARAMETERIZATIONS:
            raise ValidationError(f"unknown parameterization {parameterization!r}")
        if not gates:
            raise ValidationError("gate set has no gates")
        resid = np.max(np.abs(effects.sum(axis=0) - identity_superbra(hs)))
        if resid > povm_atol:
            raise ValidationError(f"effects do not sum to the identity (residual {resid:.3g})")

        gate_mats = {}
        for label, mat in gates.items():
            mat = np.array(mat, dtype=float)
            if mat.shape != (hs, hs):
                raise ValidationError(f"gate {label!r} has shape {mat.shape}, expected {(hs, hs)}")
            if not np.all(np.isfinite(mat)):
                raise ValidationError(f"gate {label!r} has non-finite entries")
            mat.flags.writeable = False
            gate_mats[label] = mat
        rho.flags.writeable = False
        effects.flags.writeable = False

        self.rho = rho
        self.effects = effects
        self.gates = gate_mats
        self.parameterization = parameterization
        self.name = name
        self.effect_labels = tuple(effect_labels) if effect_labels else tuple(
            str(i) for i in range(effects.shape[0]))
        self._povm_atol = povm_atol
        self._build_param_map()

    # -- basic shape info ---------------------------------------------------
    @property
    def hs_dim(self) -> int:
        return self.rho.shape[0]

    @property
    def dim(self) -> int:
        return 2 ** self.num_qubits

    @property
    def num_outcomes(self) -> int:
        return self.effects.shape[0]

    @property
    def gate_labels(self) -> tuple[str, ...]:
        return tuple(self.gates)

    @property
    def num_params(self) -> int:
        return len(self.slots)

    def __repr__(self):
        return (f"GateSet(name={self.name!r}, qubits={self.num_qubits}, "
                f"gates={list(self.gates)}, N_E={self.num_outcomes}, "
                f"parameterization={self.parameterization!r}, N_p={self.num_params})")

    # -- parameterization ---------------------------------------------------
    def _build_param_map(self):
        hs = self.hs_dim
        tp = self.parameterization == "TP"
        slots = []
        first = 1 if tp else 0
        rows = np.arange(first, hs)
        self._rho_index = (np.arange(len(slots), len(slots) + rows.size), rows)
        slots += [("rho", None, int(a), 0) for a in rows]

        n_free = self.num_outcomes - 1 if tp else self.num_outcomes
        self._effect_index = []
        for i in range(n_free):
            idx = np.arange(len(slots), len(slots) + hs)
            self._effect_index.append((i, idx, np.arange(hs)))
            slots += [("effect", i, int(a), 0) for a in range(hs)]

        self._gate_index = {}
        r, c = np.meshgrid(np.arange(first, hs), np.arange(hs), indexing="ij")
        r, c = r.ravel(), c.ravel()
        for label in self.gates:
            idx = np.arange(len(slots), len(slots) + r.size)
            self._gate_index[label] = (idx, r, c)
            slots += [("gate", label, int(a), int(b)) for a, b in zip(r, c)]
        self.slots = tuple(slots)

    def gate_param_indices(self, label: str) -> np.ndarray:
        return self._gate_index[label][0]

    def to_vector(self) -> np.ndarray:
        theta = np.empty(self.num_params)
        idx, rows = self._rho_index
        theta[idx] = self.rho[rows]
        for i, idx, rows in self._effect_index:
            theta[idx] = self.effects[i, rows]
        for label, (idx, r, c) in self._gate_index.items():
            theta[idx] = self.gates[label][r, c]
        return theta

    def from_vector(self, theta) -> "GateSet":
        """Copy of this gate set with its parameters replaced by ``theta``."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.num_params,):
            raise ValidationError(f"expected {self.num_params} parameters, got {theta.shape}")
        rho = self.rho.copy()
        idx, rows = self._rho_index
        rho[rows] = theta[idx]
        effects = self.effects.copy()
        for i, idx, rows in self._effect_index:
            effects[i, rows] = theta[idx]
        if self.parameterization == "TP":
            effects[-1] = identity_superbra(self.hs_dim) - effects[:-1].sum(axis=0)
        gates = {}
        for label, (idx, r, c) in self._gate_index.items():
            g = self.gates[label].copy()
            g[r, c] = theta[idx]
            gates[label] = g
        return GateSet(rho, effects, gates, self.parameterization, self.name,
                       self.effect_labels, povm_atol=np.inf)

    def with_gates(self, gates: Mapping[str, np.ndarray], name: str | None = None) -> "GateSet":
        new = dict(self.gates)
        new.update(gates)
        return GateSet(self.rho, self.effects, new, self.parameterization,
                       self.name if name is None else name, self.effect_labels,
                       povm_atol=self._povm_atol)

    def reparameterized(self, parameterization: str) -> "GateSet":
        return GateSet(self.rho, self.effects, self.gates, parameterization, self.name,
                       self.effect_labels, povm_atol=self._povm_atol)

    def resolve(self, circuit: Circuit | Iterable[str]) -> list[np.ndarray]:
        layers = circuit.layers if isinstance(circuit, Circuit) else tuple(circuit)
        try:
            return [self.gates[lbl] for lbl in layers]
        except KeyError as exc:
            raise ValidationError(f"unknown gate label {exc.args[0]!r}") from None


def compose_ptm(gs: GateSet, circuit: Circuit) -> np.ndarray:
    """Transfer matrix of ``circuit`` (layers multiplied in reverse time order)."""
    out = np.eye(gs.hs_dim)
    for g in gs.resolve(circuit):
        out = g @ out
    return out


def circuit_probabilities(gs: GateSet, circuit: Circuit) -> np.ndarray:
    """Born-rule outcome probabilities ``<<E_j| G_{l-1} ... G_0 |rho>>``."""
    state = gs.rho
    for g in gs.resolve(circuit):
        state = g @ state
    return gs.effects @ state


def circuit_jacobian(gs: GateSet, circuit: Circuit) -> np.ndarray:
    """Analytic ``N_E x N_p`` Jacobian of the outcome probabilities.

    Uses the product rule: for an entry ``(a, b)`` of the gate at layer ``k``
    the derivative is ``(E G_{l-1}...G_{k+1})[:, a] * (G_{k-1}...G_0 rho)[b]``,
    summed over every layer holding that gate.
    """
    mats = gs.resolve(circuit)
    labels = circuit.layers if isinstance(circuit, Circuit) else tuple(circuit)
    hs = gs.hs_dim
    states = [gs.rho]
    for g in mats:
        states.append(g @ states[-1])
    jac = np.zeros((gs.num_outcomes, gs.num_params))

    per_gate = {}
    back = gs.effects
    for k in range(len(mats) - 1, -1, -1):
        term = back[:, :, None] * states[k][None, None, :]
        lbl = labels[k]
        if lbl in per_gate:
            per_gate[lbl] += term
        else:
            per_gate[lbl] = term
        back = back @ mats[k]
    for lbl, dP in per_gate.items():
        idx, r, c = gs._gate_index[lbl]
        jac[:, idx] = dP[:, r, c]

    idx, rows = gs._rho_index
    jac[:, idx] = back[:, rows]  # back == E @ C here
    final = states[-1]
    for i, idx, rows in gs._effect_index:
        jac[i, idx] = final[rows]
        if gs.parameterization == "TP":
            jac[-1, idx] = -final[rows]
    return jac


def ptm_jacobian(gs: GateSet, circuit: Circuit) -> np.ndarray:
    """Derivative of the circuit's transfer matrix, shape ``(d^2, d^2, N_p)``.

    Slices for SPAM parameters are zero.
    """
    mats = gs.resolve(circuit)
    labels = circuit.layers
    hs = gs.hs_dim
    prefixes = [np.eye(hs)]
    for g in mats:
        prefixes.append(g @ prefixes[-1])
    per_gate = {}
    suffix = np.eye(hs)
    for k in range(len(mats) - 1, -1, -1):
        # d tau / d G_k[a, b] = suffix[:, a] (x) prefix_k[b, :]
        term = np.einsum("ia,bj->ijab", suffix, prefixes[k])
        lbl = labels[k]
        if lbl in per_gate:
            per_gate[lbl] += term
        else:
            per_gate[lbl] = term
        suffix = suffix @ mats[k]
    out = np.zeros((hs, hs, gs.num_params))
    for lbl, dT in per_gate.items():
        idx, r, c = gs._gate_index[lbl]
        out[:, :, idx] = dT[:, :, r, c]
    return out
