import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rz
from gstfpr.design import build_design
from gstfpr.errors import ParseError, ValidationError
from gstfpr.noise import (NoiseModelSpec, apply_error_rates, choi_min_eigenvalue, error_channel,
                          format_dataset, hamiltonian_generators, is_cp, parse_dataset,
                          read_dataset, sample_noisy_gateset, simulate_dataset,
                          stochastic_generators, write_dataset)
from gstfpr.ptm import Circuit, GateSet, ptm_from_unitary


def test_generator_labels():
    labels, H = hamiltonian_generators(1)
    assert labels == ("X", "Y", "Z")
    assert H.shape == (3, 4, 4)
    assert len(stochastic_generators(2)[0]) == 15


def test_zero_rates_are_exact(xyi):
    assert np.array_equal(error_channel(1, np.zeros(3), np.zeros(3)), np.eye(4))
    for kind in ("coherent", "coherent+stochastic"):
        noisy = sample_noisy_gateset(xyi.gateset, NoiseModelSpec(kind, 0.0, 0.0, seed=4))
        for lbl in xyi.gateset.gate_labels:
            assert np.array_equal(noisy.gates[lbl], xyi.gateset.gates[lbl])


@pytest.mark.parametrize("theta", [1e-3, 0.05, 0.4, -0.2])
def test_z_rate_is_z_rotation(theta):
    E = error_channel(1, [0.0, 0.0, theta])
    assert np.max(np.abs(E - ptm_from_unitary(rz(2 * theta)))) <= 1e-9


def test_stochastic_z_is_dephasing():
    s = 0.01
    E = error_channel(1, np.zeros(3), [0.0, 0.0, s])
    f = np.exp(-2 * s)
    assert np.allclose(E, np.diag([1, f, f, 1]), atol=1e-14)


def test_noisy_gates_stay_trace_preserving(xyi):
    noisy = sample_noisy_gateset(xyi.gateset, NoiseModelSpec("coherent+stochastic", 0.02, 1e-3))
    for G in noisy.gates.values():
        assert np.allclose(G[0], [1, 0, 0, 0], atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 0.05))
def test_coherent_samples_are_near_orthogonal_and_cp(seed, sigma):
    from gstfpr.builtin import load_builtin
    gs = load_builtin("xyi").gateset
    noisy = sample_noisy_gateset(gs, NoiseModelSpec("coherent", sigma, seed=seed))
    for G in noisy.gates.values():
        # exp of a real antisymmetric generator is orthogonal up to expm error
        assert np.max(np.abs(G.T @ G - np.eye(4))) <= 1e-10 + 10 * sigma ** 2
        assert is_cp(G)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_stochastic_samples_are_cp(seed):
    from gstfpr.builtin import load_builtin
    gs = load_builtin("xyi").gateset
    noisy = sample_noisy_gateset(gs, NoiseModelSpec("coherent+stochastic", 0.01, 1e-3, seed))
    for G in noisy.gates.values():
        assert choi_min_eigenvalue(G) >= -1e-10


def test_choi_of_non_cp_map_is_negative():
    assert choi_min_eigenvalue(np.eye(4)) == pytest.approx(0.0, abs=1e-12)
    assert choi_min_eigenvalue(np.diag([1.0, 1.0, 1.0, -1.0])) < -0.1
    assert not is_cp(np.diag([1.0, 1.0, 1.0, -1.0]))


def test_sampling_is_seeded(xyi):
    spec = NoiseModelSpec("coherent+stochastic", 0.01, 1e-4, seed=9)
    a = sample_noisy_gateset(xyi.gateset, spec)
    b = sample_noisy_gateset(xyi.gateset, spec)
    c = sample_noisy_gateset(xyi.gateset, NoiseModelSpec("coherent+stochastic", 0.01, 1e-4, 10))
    assert all(a.gates[k].tobytes() == b.gates[k].tobytes() for k in a.gates)
    assert any(not np.array_equal(a.gates[k], c.gates[k]) for k in a.gates)


def test_spec_validation():
    with pytest.raises(ValidationError):
        NoiseModelSpec("depolarizing")
    with pytest.raises(ValidationError):
        NoiseModelSpec(ham_sigma=-1.0)


def test_apply_error_rates(xyi):
    gs = apply_error_rates(xyi.gateset, {"Gi": ([0, 0, 0.1], None)})
    assert np.allclose(gs.gates["Gi"], ptm_from_unitary(rz(0.2)))
    assert np.array_equal(gs.gates["Gx"], xyi.gateset.gates["Gx"])
    with pytest.raises(ValidationError):
        apply_error_rates(xyi.gateset, {"Gq": (None, None)})


@pytest.fixture(scope="module")
def small_design(xyi):
    return build_design(xyi.germs[:4], xyi.prep_fiducials, xyi.meas_fiducials, [1, 2])


def test_zero_shots(xyi, small_design):
    ds = simulate_dataset(xyi.gateset, small_design, 0)
    assert len(ds) == len(small_design)
    assert all(not n.any() for n in ds.counts.values())


def test_deterministic_circuit(xyi):
    ds = simulate_dataset(xyi.gateset, [Circuit(()), Circuit(("Gx", "Gx"))], 500, seed=1)
    assert ds.counts["{}"].tolist() == [500, 0]
    assert ds.counts["Gx Gx"].tolist() == [0, 500]


def test_frequencies_concentrate(xyi):
    # |n/N - p| <= 3 sigma per outcome; with 4 circuits that holds with prob > 0.99
    cs = [Circuit.from_str(s) for s in ("Gx", "Gy", "Gx Gy", "Gx Gy Gx")]
    N = 100_000
    ds = simulate_dataset(xyi.gateset, cs, N, seed=3)
    from gstfpr.ptm import circuit_probabilities
    for c in cs:
        p = circuit_probabilities(xyi.gateset, c)
        sigma = np.sqrt(np.maximum(p * (1 - p), 1e-12) / N)
        assert np.all(np.abs(ds.counts[str(c)] / N - p) <= 3 * sigma + 1e-12)


def test_counts_are_seeded_and_parallel_safe(xyi, small_design):
    a = simulate_dataset(xyi.gateset, small_design, 100, seed=5)
    b = simulate_dataset(xyi.gateset, small_design, 100, seed=5, workers=4)
    assert format_dataset(a) == format_dataset(b)
    assert format_dataset(a) != format_dataset(simulate_dataset(xyi.gateset, small_design, 100, 6))


def test_off_simplex_probabilities_raise():
    base = np.array([1, 0, 0, 1]) / np.sqrt(2)
    gs = GateSet(base, [base, np.array([1, 0, 0, -1]) / np.sqrt(2)],
                 {"Gb": np.diag([1.0, 1.0, 1.0, 2.0])})
    with pytest.raises(ValidationError):
        simulate_dataset(gs, [Circuit(("Gb",))], 10)
    with pytest.raises(ValidationError):
        simulate_dataset(gs, [Circuit(())], -1)


def test_dataset_round_trip(tmp_path, xyi, small_design):
    ds = simulate_dataset(xyi.gateset, small_design, 50, seed=2)
    path = tmp_path / "d.txt"
    write_dataset(ds, path, {"config": "abc"})
    back = read_dataset(path)
    assert back.shots == 50 and back.seed == 2
    assert {k: v.tolist() for k, v in back.counts.items()} == \
        {k: v.tolist() for k, v in ds.counts.items()}
    assert format_dataset(back, {"config": "abc"}) == path.read_text()


@pytest.mark.parametrize("text", ["Gx\t1 2\n", "# shots=3\nGx\t1 1\n", "# shots=2\nGx 1 1\n",
                                  "# shots=2\nGx\t1 a\n"])
def test_dataset_parse_errors(text):
    with pytest.raises(ParseError):
        parse_dataset(text)
