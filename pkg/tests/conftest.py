from pathlib import Path

import numpy as np
import pytest

from gstfpr.builtin import load_builtin
from gstfpr.ptm import Circuit

DATA = Path(__file__).parent / "data"


def rx(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


XYI_UNITARIES = {"Gi": np.eye(2, dtype=complex), "Gx": rx(np.pi / 2), "Gy": ry(np.pi / 2)}


def random_circuit(rng, labels, max_depth=8, min_depth=0):
    n = int(rng.integers(min_depth, max_depth + 1))
    return Circuit(tuple(rng.choice(list(labels), size=n)))


@pytest.fixture(scope="session")
def xyi():
    return load_builtin("xyi")


@pytest.fixture(scope="session")
def xyi_full():
    return load_builtin("xyi", parameterization="full")


@pytest.fixture(scope="session")
def xycphase_path():
    return DATA / "xycphase.gateset"


@pytest.fixture(scope="session")
def xycphase_germs_path():
    return DATA / "xycphase_germs.txt"


def update_sequence(rng, m, steps, span_prob=0.4, min_leave=0.1):
    """Random rank-one update vectors for an m-dimensional gram.

    With probability ``span_prob`` (or once m independent draws exist) the
    vector is a random combination of earlier independent draws, so it
    stays in the current span.  Independent draws are redrawn until at least
    ``min_leave`` of their norm leaves the current span; this keeps the
    gram's nonzero spectrum away from zero so the pseudo-inverse entries
    stay O(1) and an absolute tolerance is meaningful.
    """
    independent = []
    for _ in range(steps):
        if independent and (len(independent) >= m or rng.random() < span_prob):
            A = np.array(independent).T
            yield A @ rng.normal(size=A.shape[1]), False
            continue
        Q = np.linalg.qr(np.array(independent).T)[0] if independent else np.zeros((m, 0))
        while True:
            v = rng.normal(size=m)
            if np.linalg.norm(v - Q @ (Q.T @ v)) > min_leave * np.linalg.norm(v):
                break
        independent.append(v)
        yield v, True


def haar_gateset(base, seed):
    """``base`` with every gate replaced by the PTM of a Haar-random unitary."""
    from scipy.stats import unitary_group

    from gstfpr.ptm import ptm_from_unitary
    rng = np.random.default_rng(seed)
    gates = {lbl: ptm_from_unitary(unitary_group.rvs(base.dim, random_state=rng))
             for lbl in base.gate_labels}
    return base.with_gates(gates, name="haar")


def expected_loglik_hessian(gs, c, shots, h=3e-5):
    """Minus the second-difference Hessian of ``N sum_i p_i(theta0) log p_i(theta)``."""
    from gstfpr.ptm import circuit_probabilities
    theta0 = gs.to_vector()
    p0 = circuit_probabilities(gs, c)

    def f(theta):
        return shots * float(p0 @ np.log(circuit_probabilities(gs.from_vector(theta), c)))

    n = len(theta0)
    E = h * np.eye(n)
    H = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            H[a, b] = H[b, a] = (f(theta0 + E[a] + E[b]) - f(theta0 + E[a] - E[b])
                                 - f(theta0 - E[a] + E[b]) + f(theta0 - E[a] - E[b])) / (4 * h * h)
    return -H
