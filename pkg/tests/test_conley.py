import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conley_resonance.conditions import ConditionVerdict, neighborhood_box
from conley_resonance.conley import (
    assembled_index,
    boundary_samples,
    connecting_orbit_criterion,
    continuation_check,
    index_of_bounded_invariant_set,
    index_of_origin,
    lift_to_G,
    linear_index_check,
    verify_isolating_block,
)
from conley_resonance.errors import BlockVerificationFailed, Inapplicable, NonhyperbolicOrigin
from conley_resonance.homotopy import equal, sphere
from conley_resonance.nonlinearity import arctan, arctan_minus_gauss, const_kernel
from conley_resonance.semiflow import IntegratorConfig
from conley_resonance.spectral import EigenSystem, build_laplacian_1d, decompose, fractional_weights

G1 = ConditionVerdict("G", "G1", True)
G2 = ConditionVerdict("G", "G2", True)


def test_lift_records_its_source():
    g = lift_to_G(ConditionVerdict("LL", "LL2", True, margin=2.0))
    assert (g.family, g.condition, g.margin) == ("G", "G2", 2.0)
    assert g.notes[-1] == "lifted from LL2"
    assert lift_to_G(G1) is G1
    with pytest.raises(Inapplicable):
        lift_to_G(ConditionVerdict("LL", None, False))


def test_index_of_bounded_set_uses_cumulative_multiplicities():
    es = EigenSystem.abstract([1.0, 4.0, 9.0], [2, 3, 1])
    d = decompose(es, 2)
    assert index_of_bounded_invariant_set(d, G1) == sphere(5)
    assert index_of_bounded_invariant_set(d, G2) == sphere(2)
    with pytest.raises(Inapplicable):
        index_of_bounded_invariant_set(d, ConditionVerdict("G", None, False))


def test_index_of_origin_counts_modes_below_shifted_level():
    es = EigenSystem.abstract([1.0, 4.0, 9.0], [2, 3, 1])
    assert index_of_origin(es, 4.0, -1.5) == sphere(2)
    assert index_of_origin(es, 4.0, 1.0) == sphere(5)
    assert index_of_origin(es, 4.0, -4.0) == sphere(0)
    with pytest.raises(NonhyperbolicOrigin):
        index_of_origin(es, 4.0, 5.0)


@pytest.mark.parametrize(
    "k, nu, verdict, existence, case, reason",
    [
        (2, -1.5, G1, "EXISTS", "i", None),
        (2, -4.0, G1, "EXISTS", "ii", None),
        (2, 1.0, G1, "INCONCLUSIVE", None, "lambda_l != lambda"),
        (2, 1.0, G2, "EXISTS", "iii", None),
        (2, -1.5, G2, "INCONCLUSIVE", None, "lambda != lambda_l"),
        (2, -4.0, G2, "EXISTS", "iv", None),
        (1, -0.5, G2, "INCONCLUSIVE", None, "lambda != lambda_1"),
        (3, -6.0, G1, "EXISTS", "i", None),
    ],
)
def test_criterion_cases(k, nu, verdict, existence, case, reason):
    es = build_laplacian_1d(8, math.pi)
    dec = connecting_orbit_criterion(es, k, nu, verdict)
    assert (dec.existence, dec.case, dec.failed_hypothesis) == (existence, case, reason)
    if existence == "EXISTS":
        assert not equal(dec.h_K, dec.h_0)


def test_criterion_with_equal_indices_is_inconclusive():
    # k = 1, G1 gives Sigma^1; mu in (1, 4) also gives Sigma^1, and l = 1 = k
    dec = connecting_orbit_criterion(build_laplacian_1d(8, math.pi), 1, 1.0, G1)
    assert dec.existence == "INCONCLUSIVE"


def test_criterion_reports_lift_provenance():
    dec = connecting_orbit_criterion(build_laplacian_1d(8, math.pi), 2, -1.5, ConditionVerdict("LL", "LL1", True))
    assert dec.provenance == "lifted from LL1"


def test_criterion_needs_hyperbolic_origin():
    with pytest.raises(NonhyperbolicOrigin):
        connecting_orbit_criterion(build_laplacian_1d(8, math.pi), 2, 5.0, G1)


spectra = st.lists(st.integers(1, 3), min_size=2, max_size=6).flatmap(
    lambda mult: st.tuples(
        st.just(mult),
        st.lists(st.floats(0.5, 3.0), min_size=len(mult), max_size=len(mult)),
        st.integers(1, len(mult)),
        st.floats(-40.0, 40.0),
        st.sampled_from(["G1", "G2"]),
    )
)


def _system(mult, gaps):
    return EigenSystem.abstract(np.cumsum(gaps).tolist(), mult)


@given(spectra)
def test_assembled_index_equals_predicted_index(data):
    mult, gaps, k, _, cond = data
    es = _system(mult, gaps)
    d = decompose(es, k)
    verdict = ConditionVerdict("G", cond, True)
    assert equal(assembled_index(es, d, cond), index_of_bounded_invariant_set(d, verdict))


@given(spectra)
def test_criterion_is_sound(data):
    mult, gaps, k, nu, cond = data
    es = _system(mult, gaps)
    lam = es.distinct_eigenvalues[k - 1]
    mu = lam + nu
    assume(min(abs(mu - v) for v in es.distinct_eigenvalues) > 1e-6)
    dec = connecting_orbit_criterion(es, k, nu, ConditionVerdict("G", cond, True))
    if dec.existence == "EXISTS":
        assert not equal(dec.h_K, dec.h_0)
        levels = es.distinct_eigenvalues
        below = [v for v in levels if v < mu]
        if cond == "G1" and below:
            assert below[-1] != lam
        if cond == "G2":
            above = [v for v in levels if v > mu]
            assert not above or above[0] != lam
    else:
        assert dec.case is None and dec.failed_hypothesis


def test_linear_index_check_splits_modes():
    es = build_laplacian_1d(8, math.pi)
    d = decompose(es, 3)
    h, rep = linear_index_check(es, d, 9.0, horizon_T=2.0)
    assert h == sphere(2) and rep.consistent
    assert rep.growing == (0, 1) and rep.decaying == tuple(range(3, 8))
    assert rep.min_growth == pytest.approx(math.exp(10.0))


def test_boundary_samples_lie_on_kernel_sphere(es32, d2, cb2):
    C = boundary_samples(es32, d2, 2.0, 50, np.random.default_rng(0), R_Q=5.0, cb=cb2)
    np.testing.assert_allclose(np.abs(C[:, 1]), 2.0)
    assert np.all(np.linalg.norm(np.delete(C, 1, axis=1) * np.delete(fractional_weights(es32, 0.8), 1), axis=1) <= 5.0 + 1e-12)


def test_block_has_full_exit_set_for_arctan(es32, d2, grid32, cb2):
    rep = verify_isolating_block(
        arctan(), es32, d2, (0.0, 0.5, 1.0), 4.0, 64, grid32, R_Q=30.8, expected="G1", cb=cb2
    )
    assert rep.exit_set == "FULL_BOUNDARY" and rep.min_derivative > 0 and rep.n_samples == 192


def test_block_rejects_mixed_sign_source(es32, d2, grid32, cb2):
    with pytest.raises(BlockVerificationFailed) as e:
        verify_isolating_block(const_kernel(2, math.pi), es32, d2, (1.0,), 1.0, 16, grid32, cb=cb2)
    assert e.value.witnesses


def test_block_checks_expected_sign(es32, d2, grid32, cb2):
    with pytest.raises(BlockVerificationFailed):
        verify_isolating_block(arctan(), es32, d2, (1.0,), 4.0, 16, grid32, expected="G2", cb=cb2)


def test_continuation_keeps_runs_inside(es32, d2, grid32, cb2):
    N = neighborhood_box(arctan_minus_gauss(1.0, 2.5), es32, d2, cb2, 4.0)
    cfg = IntegratorConfig(step_h=0.1, t_end=10.0, save_stride=10)
    rep = continuation_check(arctan_minus_gauss(1.0, 2.5), es32, N, (0.0, 1.0), 8, cfg, grid32, "FULL_BOUNDARY")
    assert rep.passed and set(rep.q_exits) == {0.0, 1.0}
    assert max(rep.max_q_alpha.values()) <= N.R_Q
