import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gstfpr.errors import ValidationError
from gstfpr.germs import (CommutantProjector, amplified_basis, amplified_bases,
                          check_amplificational_completeness, exact_power_derivative_check,
                          fiducial_completeness, format_verify_report, germ_concat,
                          group_average, twirled_derivative)
from gstfpr.linalg import numerical_rank
from gstfpr.ptm import Circuit, compose_ptm, ptm_jacobian

# amplified-direction counts per built-in germ (TP parameterization), frozen
# from a build-time rank computation
XYI_TP_K = [12, 4, 4, 4, 4, 4, 4, 4, 6, 6, 4]
XYI_TP_NA = 25
XYI_FULL_NA = 34


def commutator_norm(td, tau):
    s = np.moveaxis(td.slices, 2, 0)
    return np.max(np.abs(s @ tau - tau @ s))


def test_identity_germ_keeps_raw_slices(xyi):
    gs = xyi.gateset
    g = Circuit(("Gi",))
    assert np.allclose(twirled_derivative(gs, g).slices, ptm_jacobian(gs, g), atol=1e-12)


def test_commutant_membership_all_germs(xyi):
    gs = xyi.gateset
    for g in xyi.germs:
        assert commutator_norm(twirled_derivative(gs, g), compose_ptm(gs, g)) <= 1e-8


def test_projection_idempotent(xyi):
    gs = xyi.gateset
    for g in xyi.germs:
        proj = CommutantProjector(compose_ptm(gs, g))
        once = proj.project(ptm_jacobian(gs, g))
        assert np.max(np.abs(proj.project(once) - once)) <= 1e-10


def test_group_average_converges_to_projection(xyi):
    gs = xyi.gateset
    g = Circuit(("Gx",))
    td = twirled_derivative(gs, g).slices
    assert np.max(np.abs(group_average(gs, g, 400) - td)) <= 1e-2
    # Gx has order 4, so the average is exact at multiples of 4; off those
    # the deviation decays like 1/r
    dev = [np.max(np.abs(group_average(gs, g, r) - td)) for r in (6, 50, 398)]
    assert dev[0] > dev[1] > dev[2]
    assert dev[2] <= 1e-2


@pytest.mark.parametrize("germ, r", [("Gx", 1), ("Gx", 5), ("Gx Gy", 3), ("Gx Gy Gi", 5)])
def test_power_derivative_identity(xyi, germ, r):
    dev = exact_power_derivative_check(xyi.gateset, Circuit.from_str(germ), r)
    assert dev <= (1e-7 if r == 1 else 1e-6)


def test_empty_germ_rejected(xyi):
    with pytest.raises(ValidationError):
        twirled_derivative(xyi.gateset, Circuit(()))


def test_amplified_basis_properties(xyi):
    gs = xyi.gateset
    for g, k in zip(xyi.germs, XYI_TP_K):
        b = amplified_basis(twirled_derivative(gs, g))
        assert b.k == k
        assert np.allclose(b.V.T @ b.V, np.eye(b.k), atol=1e-10)
        assert np.all(np.diff(b.singular_values) <= 1e-12)
        assert 0 < b.k < gs.num_params


def test_shrinking_tol_never_decreases_k(xyi):
    td = twirled_derivative(xyi.gateset, Circuit.from_str("Gx Gx Gi Gy"))
    ks = [amplified_basis(td, tol).k for tol in (1e-1, 1e-3, 1e-6, 1e-9)]
    assert ks == sorted(ks)


def test_zero_derivative_gives_empty_basis(xyi):
    td = twirled_derivative(xyi.gateset, Circuit(("Gx",)))
    zero = type(td)(td.germ, np.zeros_like(td.slices))
    assert amplified_basis(zero).k == 0


def test_concat_single_and_duplicate(xyi):
    bases = amplified_bases(xyi.gateset, [Circuit(("Gx",)), Circuit(("Gx",))])
    J, back = germ_concat(bases[:1])
    assert np.array_equal(J, bases[0].V)
    J, back = germ_concat(bases)
    assert numerical_rank(J) == bases[0].k
    assert back.tolist() == [0] * bases[0].k + [1] * bases[1].k


def test_concat_rejects_mismatch(xyi, xyi_full):
    a = amplified_bases(xyi.gateset, [Circuit(("Gx",))])
    b = amplified_bases(xyi_full.gateset, [Circuit(("Gx",))])
    with pytest.raises(ValidationError):
        germ_concat(a + b)


def test_builtin_rank_equals_na(xyi, xyi_full):
    for b, n_a in ((xyi, XYI_TP_NA), (xyi_full, XYI_FULL_NA)):
        J, _ = germ_concat(amplified_bases(b.gateset, b.germs))
        rep = check_amplificational_completeness(J, b.gateset)
        assert rep.rank == rep.n_amplifiable == n_a
        assert rep.complete
        assert rep.missing.shape[1] == 0


def test_dropping_gy_germs_is_incomplete(xyi):
    gs = xyi.gateset
    kept = [g for g in xyi.germs if "Gy" not in g.layers]
    J, _ = germ_concat(amplified_bases(gs, kept))
    rep = check_amplificational_completeness(J, gs)
    assert not rep.complete
    assert rep.missing.shape[1] == rep.n_amplifiable - rep.rank > 0
    assert np.allclose(rep.missing.T @ rep.missing, np.eye(rep.missing.shape[1]), atol=1e-10)
    # missing directions are orthogonal to everything reached
    assert np.max(np.abs(J.T @ rep.missing)) <= 1e-8


def test_reference_may_be_a_matrix(xyi):
    J, _ = germ_concat(amplified_bases(xyi.gateset, xyi.germs))
    rep = check_amplificational_completeness(J[:, :10], xyi.gateset, reference=J)
    assert rep.n_amplifiable == XYI_TP_NA
    assert rep.rank == 10


@settings(max_examples=25, deadline=None)
@given(data=st.data())
def test_rank_monotone_and_order_free(data, xyi_bases):
    n = len(xyi_bases)
    subset = data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n, unique=True))
    extra = data.draw(st.integers(0, n - 1))
    r_sub = numerical_rank(germ_concat([xyi_bases[i] for i in subset])[0])
    r_more = numerical_rank(germ_concat([xyi_bases[i] for i in subset + [extra]])[0])
    assert r_more >= r_sub
    perm = data.draw(st.permutations(subset))
    assert numerical_rank(germ_concat([xyi_bases[i] for i in perm])[0]) == r_sub


@pytest.fixture(scope="module")
def xyi_bases(xyi):
    return amplified_bases(xyi.gateset, xyi.germs)


def test_parallel_matches_serial(xyi, xyi_bases):
    par = amplified_bases(xyi.gateset, xyi.germs, workers=4)
    for a, b in zip(xyi_bases, par):
        assert np.array_equal(a.V, b.V)


def test_fiducial_completeness(xyi):
    gs = xyi.gateset
    rep = fiducial_completeness(gs, xyi.prep_fiducials, xyi.meas_fiducials)
    assert rep.complete and rep.prep_rank == 4
    short = fiducial_completeness(gs, xyi.prep_fiducials[:2], xyi.meas_fiducials)
    assert not short.complete and short.prep_rank < 4


def test_verify_report(xyi, xyi_bases):
    J, _ = germ_concat(xyi_bases)
    rep = check_amplificational_completeness(J, xyi.gateset)
    text = format_verify_report(xyi_bases, rep,
                                fiducial_completeness(xyi.gateset, xyi.prep_fiducials,
                                                      xyi.meas_fiducials))
    assert "rank(J) = 25" in text
    assert "N_a = 25" in text
    assert "amplificational completeness: COMPLETE" in text
    assert "informational completeness: COMPLETE" in text
    assert text.count("\n") == 1 + len(xyi_bases) + 1 + 3 + 3
