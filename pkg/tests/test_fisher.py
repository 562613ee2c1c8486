import math

import numpy as np
import pytest
from scipy.stats import multinomial

from conftest import expected_loglik_hessian, haar_gateset, random_circuit
from gstfpr.design import build_design
from gstfpr.errors import ValidationError
from gstfpr.fisher import (FisherResult, circuit_fisher, circuit_log_likelihood, design_fisher,
                           format_scaling_report, scaling_report)
from gstfpr.ptm import Circuit, circuit_jacobian


def product_form(counts, probs):
    n = sum(counts)
    out = math.lgamma(n + 1)
    for k, p in zip(counts, probs):
        out += k * math.log(p) - math.lgamma(k + 1)
    return out


@pytest.mark.parametrize("counts, probs", [
    ([3, 1], [0.75, 0.25]), ([0, 10], [0.5, 0.5]), ([5, 2, 0, 1], [0.4, 0.3, 0.2, 0.1])])
def test_log_likelihood(counts, probs):
    ll = circuit_log_likelihood(counts, probs)
    assert ll == pytest.approx(product_form(counts, probs), rel=1e-12)
    assert ll == pytest.approx(multinomial.logpmf(counts, sum(counts), probs), rel=1e-12)


def test_log_likelihood_clips_zero_probability():
    assert np.isfinite(circuit_log_likelihood([1, 1], [1.0, 0.0]))
    assert circuit_log_likelihood([1, 0], [1.0, 0.0]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValidationError):
        circuit_log_likelihood([-1, 2], [0.5, 0.5])


def test_zero_shots(xyi):
    F = circuit_fisher(xyi.gateset, Circuit(("Gx",)), 0)
    assert not F.matrix.any()
    assert F.amplifiable_spectrum().size == 0
    with pytest.raises(ValidationError):
        circuit_fisher(xyi.gateset, Circuit(("Gx",)), -1)


def test_psd_and_linear_in_shots(xyi):
    gs = haar_gateset(xyi.gateset, 3)
    rng = np.random.default_rng(1)
    for _ in range(10):
        c = random_circuit(rng, gs.gate_labels, 6)
        F1 = circuit_fisher(gs, c, 1).matrix
        F = circuit_fisher(gs, c, 250)
        assert np.allclose(F.matrix, 250 * F1, rtol=1e-12, atol=0)
        assert F.eigenvalues[-1] >= -1e-9 * F.eigenvalues[0]
        assert np.array_equal(F.matrix, F.matrix.T)
        # rank is bounded by the number of independent outcome gradients
        assert np.linalg.matrix_rank(F.matrix) <= gs.num_outcomes


def test_matches_expected_loglik_hessian(xyi):
    gs = haar_gateset(xyi.gateset, 11)
    rng = np.random.default_rng(12)
    for _ in range(5):
        c = random_circuit(rng, gs.gate_labels, 6, 1)
        F = circuit_fisher(gs, c, 1000).matrix
        H = expected_loglik_hessian(gs, c, 1000)
        assert np.max(np.abs(F - H)) <= 1e-4 * np.max(np.abs(F))


def test_outcome_hessians_cancel(xyi):
    # sum_i p_i is 1 for physical parameters; its Hessian must vanish
    gs = haar_gateset(xyi.gateset, 5)
    theta = gs.to_vector()
    c = Circuit(("Gx", "Gy", "Gi", "Gx"))
    h = 1e-5
    for n in range(gs.num_params):
        e = np.zeros_like(theta)
        e[n] = h
        d = (circuit_jacobian(gs.from_vector(theta + e), c)
             - circuit_jacobian(gs.from_vector(theta - e), c)) / (2 * h)
        assert np.max(np.abs(d.sum(axis=0))) <= 1e-8


def test_design_fisher_is_additive(xyi):
    gs = xyi.gateset
    cs = [Circuit.from_str(s) for s in ("Gx", "Gy Gx", "Gx Gx Gy", "Gi Gy")]
    total = sum(circuit_fisher(gs, c, 100).matrix for c in cs)
    assert np.allclose(design_fisher(gs, cs, 100).matrix, total, rtol=1e-12, atol=1e-9)
    assert np.allclose(design_fisher(gs, cs, 100, workers=3).matrix, total,
                       rtol=1e-12, atol=1e-9)


def test_design_fisher_max_length(xyi):
    d = build_design(xyi.germs[:3], xyi.prep_fiducials, xyi.meas_fiducials, [1, 2])
    part = design_fisher(xyi.gateset, d, max_length=1).matrix
    direct = design_fisher(xyi.gateset, d.upto(1)).matrix
    assert np.allclose(part, direct)


def test_amplifiable_spectrum_drops_small():
    F = FisherResult(np.diag([1.0, 1e-9, 0.5, 0.0]))
    assert F.amplifiable_spectrum().tolist() == [1.0, 0.5]
    assert F.eigenvalues.tolist() == [1.0, 0.5, 1e-9, 0.0]


def test_scaling_report_single_depth(xyi):
    d = build_design(xyi.germs, xyi.prep_fiducials, xyi.meas_fiducials, [1])
    rep = scaling_report(xyi.gateset, d)
    assert rep.slope is None and rep.rows[0].local_slope is None
    r = rep.rows[0]
    assert r.num_circuits == len(d)
    assert r.minimum <= r.percentiles[25] <= r.percentiles[50] <= r.percentiles[90] <= r.maximum
    text = format_scaling_report(rep, {"config": "x"})
    assert text.splitlines()[0] == "# config=x"
    assert text.splitlines()[-1] == "# fit_p90_slope=- fit_median_slope=-"


def test_scaling_report_matches_cumulative_fisher(xyi):
    d = build_design(xyi.germs, xyi.prep_fiducials, xyi.meas_fiducials, [1, 2, 4])
    rep = scaling_report(xyi.gateset, d, shots=10)
    spec = design_fisher(xyi.gateset, d, shots=10, max_length=2).amplifiable_spectrum()
    assert rep.rows[1].rank == spec.size
    assert rep.rows[1].percentiles[90] == pytest.approx(np.percentile(spec, 90), rel=1e-9)
    assert rep.slope is not None
