"""
Random gate-set noise and simulated count data.

Each gate ``G`` becomes ``exp(sum_P h_P H_P + sum_P s_P S_P) G`` where, for
every non-identity Pauli ``P``, ``H_P`` is the transfer matrix of
``rho -> -i[P, rho]`` and ``S_P`` that of ``rho -> P rho P - rho``.  With
this normalization a rate ``h`` on ``Z`` is a Z rotation by angle ``2h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ParseError, ValidationError
from .linalg import pmap
from .ptm import GateSet, circuit_probabilities, num_qubits_for, pauli_basis

NOISE_CLASSES = ("coherent", "coherent+stochastic")
CP_TOL = 1e-10
MAX_CP_ATTEMPTS = 100
SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class NoiseModelSpec:
    kind: str = "coherent"
    ham_sigma: float = 0.01
    stoch_max: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_CLASSES:
            raise ValidationError(f"unknown noise class {self.kind!r}; choose from {NOISE_CLASSES}")
        if self.ham_sigma < 0 or self.stoch_max < 0:
            raise ValidationError("noise rates must be nonnegative")

    @property
    def stochastic(self) -> bool:
        return self.kind == "coherent+stochastic"


def _superop_ptm(num_qubits: int, fn) -> np.ndarray:
    basis = pauli_basis(num_qubits)
    P = basis.paulis
    d = basis.dim
    out = np.array([[np.trace(P[i] @ fn(P[j])) / d for j in range(len(P))]
                    for i in range(len(P))])
    return out.real


@lru_cache(maxsize=None)
def _generators(num_qubits: int) -> tuple[tuple[str, ...], np.ndarray, np.ndarray]:
    basis = pauli_basis(num_qubits)
    labels = basis.labels[1:]
    ham, sto = [], []
    for P in basis.paulis[1:]:
        ham.append(_superop_ptm(num_qubits, lambda r, P=P: -1j * (P @ r - r @ P)))
        sto.append(_superop_ptm(num_qubits, lambda r, P=P: P @ r @ P - r))
    H, S = np.array(ham), np.array(sto)
    H.setflags(write=False)
    S.setflags(write=False)
    return labels, H, S


def hamiltonian_generators(num_qubits: int) -> tuple[tuple[str, ...], np.ndarray]:
    """Labels and transfer matrices of ``rho -> -i[P, rho]`` for non-identity ``P``."""
    labels, H, _ = _generators(num_qubits)
    return labels, H


def stochastic_generators(num_qubits: int) -> tuple[tuple[str, ...], np.ndarray]:
    """Labels and transfer matrices of ``rho -> P rho P - rho`` for non-identity ``P``."""
    labels, _, S = _generators(num_qubits)
    return labels, S


def error_channel(num_qubits: int, ham_rates, stoch_rates=None) -> np.ndarray:
    """``exp(sum h_P H_P + sum s_P S_P)``; all-zero rates give the identity exactly."""
    _, H, S = _generators(num_qubits)
    ham = np.asarray(ham_rates, dtype=float)
    sto = np.zeros(len(H)) if stoch_rates is None else np.asarray(stoch_rates, dtype=float)
    if ham.shape != (len(H),) or sto.shape != (len(H),):
        raise ValidationError(f"expected {len(H)} rates per generator class")
    if not ham.any() and not sto.any():
        return np.eye(H.shape[1])
    gen = np.tensordot(ham, H, axes=1) + np.tensordot(sto, S, axes=1)
    return sla.expm(gen)


def choi_min_eigenvalue(ptm) -> float:
    """Smallest eigenvalue of the trace-one Choi matrix of a transfer matrix."""
    ptm = np.asarray(ptm, dtype=float)
    basis = pauli_basis(num_qubits_for(ptm.shape[0]))
    d = basis.dim
    P = basis.paulis
    choi = sum(ptm[i, j] * np.kron(P[i], P[j].T) for i in range(len(P)) for j in range(len(P))
               if ptm[i, j] != 0.0) / (d * d)
    return float(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T))[0])


def is_cp(ptm, tol: float = CP_TOL) -> bool:
    return choi_min_eigenvalue(ptm) >= -tol


def apply_error_rates(gs: GateSet, rates: dict, name: str | None = None) -> GateSet:
    """Compose per-gate error channels onto ``gs``.

    ``rates`` maps a gate label to ``(ham_rates, stoch_rates)`` (either may be
    ``None``); gates not listed are left untouched.
    """
    n = num_qubits_for(gs.hs_dim)
    gates = dict(gs.gates)
    for lbl, (ham, sto) in rates.items():
        if lbl not in gates:
            raise ValidationError(f"unknown gate label {lbl!r}")
        nh = len(_generators(n)[0])
        ham = np.zeros(nh) if ham is None else ham
        E = error_channel(n, ham, sto)
        gates[lbl] = gates[lbl] if np.array_equal(E, np.eye(E.shape[0])) else E @ gates[lbl]
    return gs.with_gates(gates, name=name)


def sample_noisy_gateset(gs: GateSet, spec: NoiseModelSpec) -> GateSet:
    """Draw independent error rates for every gate and apply them.

    Hamiltonian rates are normal with standard deviation ``ham_sigma``;
    stochastic rates (if the class includes them) uniform on
    ``[0, stoch_max]``.  A noisy gate failing the Choi positivity check has
    its stochastic rates redrawn.

    Raises
    ------
    NumericalError
        If a gate is still not completely positive after 100 draws.
    """
    rng = np.random.default_rng(spec.seed)
    n = num_qubits_for(gs.hs_dim)
    nh = len(_generators(n)[0])
    gates = {}
    for lbl, G in gs.gates.items():
        ham = rng.normal(0.0, spec.ham_sigma, nh) if spec.ham_sigma > 0 else np.zeros(nh)
        for _ in range(MAX_CP_ATTEMPTS):
            sto = rng.uniform(0.0, spec.stoch_max, nh) if spec.stochastic else np.zeros(nh)
            E = error_channel(n, ham, sto)
            noisy = G if np.array_equal(E, np.eye(E.shape[0])) else E @ G
            if is_cp(noisy):
                break
            if not spec.stochastic:
                raise NumericalError(f"coherent error on gate {lbl} is not completely positive")
        else:
            raise NumericalError(f"gate {lbl}: no completely positive sample in "
                                 f"{MAX_CP_ATTEMPTS} attempts")
        gates[lbl] = noisy
    name = f"{gs.name}+{spec.kind}(seed={spec.seed})" if gs.name else None
    return gs.with_gates(gates, name=name)


@dataclass
class DataSet:
    counts: dict = field(repr=False)  # circuit string -> int array of length N_E
    shots: int = 0
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.counts)


def _outcome_probs(gs: GateSet, circuit) -> np.ndarray:
    p = circuit_probabilities(gs, circuit)
    if (np.any(p < -SIMPLEX_TOL) or np.any(p > 1 + SIMPLEX_TOL)
            or abs(p.sum() - 1.0) > SIMPLEX_TOL):
        raise ValidationError(f"circuit {circuit}: outcome probabilities {p} are off the simplex")
    p = np.clip(p, 0.0, 1.0)
    return p / p.sum()


def simulate_dataset(gs: GateSet, design, shots: int, seed: int = 0,
                     workers: int | None = None) -> DataSet:
    """Multinomial counts for every circuit, each from its own seeded substream."""
    if shots < 0:
        raise ValidationError("shots must be nonnegative")
    circuits = list(design.circuits if hasattr(design, "circuits") else design)
    streams = np.random.SeedSequence(seed).spawn(len(circuits))

    def draw(i):
        p = _outcome_probs(gs, circuits[i])
        if shots == 0:
            return np.zeros(len(p), dtype=np.int64)
        return np.random.default_rng(streams[i]).multinomial(shots, p)

    results = pmap(draw, range(len(circuits)), workers)
    counts = {}
    for c, n in zip(circuits, results):
        counts.setdefault(str(c), n)
    return DataSet(counts, shots, seed)


def format_dataset(ds: DataSet, header: dict | None = None) -> str:
    lines = [f"# shots={ds.shots} seed={ds.seed}"]
    lines += [f"# {k}={v}" for k, v in (header or {}).items()]
    for key, n in ds.counts.items():
        lines.append(f"{key}\t" + " ".join(str(int(x)) for x in n))
    return "\n".join(lines) + "\n"


def write_dataset(ds: DataSet, path, header: dict | None = None) -> None:
    Path(path).write_text(format_dataset(ds, header), encoding="utf-8")


def parse_dataset(text: str, source: str | None = None) -> DataSet:
    shots, seed = None, None
    counts = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        if raw.startswith("#"):
            for tok in raw[1:].split():
                k, _, v = tok.partition("=")
                if k == "shots":
                    shots = int(v)
                elif k == "seed":
                    seed = None if v == "None" else int(v)
            continue
        if not raw.strip():
            continue
        if "\t" not in raw:
            raise ParseError("expected 'circuit<TAB>counts'", source, lineno)
        key, vals = raw.split("\t", 1)
        try:
            n = np.array([int(x) for x in vals.split()], dtype=np.int64)
        except ValueError:
            raise ParseError("non-integer count", source, lineno) from None
        if shots is not None and n.sum() != shots:
            raise ParseError(f"counts sum to {n.sum()}, expected {shots}", source, lineno)
        counts[key] = n
    if shots is None:
        raise ParseError("missing '# shots=' header", source)
    return DataSet(counts, shots, seed)


def read_dataset(path) -> DataSet:
    path = Path(path)
    return parse_dataset(path.read_text(encoding="utf-8"), source=str(path))
