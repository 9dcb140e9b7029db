import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conley_resonance.conditions import (
    ConditionVerdict,
    GSampling,
    IsolatingNeighborhood,
    alpha_ball_extremes,
    apriori_radii,
    apriori_radius_R1,
    check_G_direct,
    check_landesman_lazer,
    check_strong_resonance,
    neighborhood_box,
    sample_alpha_ball,
    search_G_radius,
    SearchSpec,
)
from conley_resonance.errors import ConditionNotVerified, InsufficientMetadata, InvalidArgument
from conley_resonance.nonlinearity import (
    arctan,
    arctan_minus_gauss,
    const_kernel,
    linear,
    strong_res,
    strong_res_cos,
    zero,
)
from conley_resonance.spectral import ConstantsBundle, build_laplacian_1d, decompose, fractional_weights

# Independent high-precision evaluations of the a priori radius for k = 2,
# 32 modes on (0, pi), alpha = 0.8, gap c = 3.
R1_ARCTAN = 29.7901595586600922
R1_LL1 = 50.1245295854657171
R1_STRONG_RES_4 = 37.9300091940562308
R1_CONST_KERNEL = 15.1318843635241003
UPPER_PART_M1_C5 = 5.00134758939981709  # e^-5 / 5 + 1 / (1 - 0.8)


def test_upper_part_of_apriori_radius():
    up, low = apriori_radii(1.0, 1.0, 5.0, 0.8, 0.0, 1.0, 0.0)
    assert up == pytest.approx(UPPER_PART_M1_C5, rel=1e-15)
    assert low == 0.0


def test_apriori_radius_rejects_degenerate_constants():
    with pytest.raises(InvalidArgument):
        apriori_radii(1.0, 0.5, 1.0, 0.8, 0.0, 1.0, 1.0)
    with pytest.raises(InvalidArgument):
        apriori_radii(1.0, 1.0, 0.0, 0.8, 0.0, 1.0, 1.0)


@pytest.mark.parametrize(
    "model, expected",
    [
        (arctan(), R1_ARCTAN),
        (arctan_minus_gauss(1.0, 2.5), R1_LL1),
        (strong_res(4.0), R1_STRONG_RES_4),
        (strong_res(-4.0), R1_STRONG_RES_4),
        (const_kernel(2, math.pi), R1_CONST_KERNEL),
    ],
)
def test_apriori_radius_matches_reference(model, expected, es32, d2, cb2):
    assert apriori_radius_R1(model, es32, d2, cb2) == pytest.approx(expected, rel=1e-13)


def test_landesman_lazer_integral_for_arctan(es32, grid32):
    v = check_landesman_lazer(arctan(), es32, 2, grid32)
    assert v.condition == "LL1" and v.holds
    # (pi / 2) * int |phi_2| = sqrt(2 pi)
    assert v.margin == pytest.approx(math.sqrt(2 * math.pi), rel=1e-10)


def test_landesman_lazer_signs(es32, grid32):
    assert check_landesman_lazer(arctan(-1.0), es32, 2, grid32).condition == "LL2"
    assert check_landesman_lazer(arctan_minus_gauss(1.0, 2.5), es32, 2, grid32).condition == "LL1"
    v = check_landesman_lazer(zero(), es32, 2, grid32)
    assert not v.holds and v.condition is None


def test_landesman_lazer_at_higher_level(es32, grid32):
    v = check_landesman_lazer(arctan(), es32, 3, grid32, n_sphere_samples=16)
    # a simple eigenvalue has the two unit kernel vectors +-phi_3 only
    assert v.holds and v.sample_count == 2


def test_landesman_lazer_needs_limits(es32, grid32):
    with pytest.raises(InsufficientMetadata):
        check_landesman_lazer(linear(), es32, 2, grid32)


def test_strong_resonance(es32, grid32):
    v1 = check_strong_resonance(strong_res(4.0), es32, grid32)
    v2 = check_strong_resonance(strong_res(-4.0), es32, grid32)
    assert (v1.condition, v2.condition) == ("SR1", "SR2")
    assert v1.witnesses[0] == ("integral_f_inf", pytest.approx(4 * math.pi, rel=1e-12))
    assert v1.notes


def test_strong_resonance_with_zero_mean_profile_fails(es32, grid32):
    v = check_strong_resonance(strong_res_cos(4.0, math.pi), es32, grid32)
    assert not v.holds


def test_strong_resonance_needs_metadata(es32, grid32):
    with pytest.raises(InsufficientMetadata):
        check_strong_resonance(arctan(), es32, grid32)


def test_direct_G_check_at_large_radius(es32, d2, grid32, cb2):
    v = check_G_direct(arctan(), es32, d2, grid32, R1_ARCTAN + 1, 64.0, cb=cb2)
    assert v.holds and v.condition == "G1" and v.margin > 0
    v = check_G_direct(strong_res(-4.0), es32, d2, grid32, R1_STRONG_RES_4 + 1, 64.0, cb=cb2)
    assert v.condition == "G2"


def test_direct_G_check_reports_witnesses_on_failure(es32, d2, grid32, cb2):
    v = check_G_direct(const_kernel(2, math.pi), es32, d2, grid32, R1_CONST_KERNEL + 1, 4.0, cb=cb2)
    assert not v.holds
    values = [w[1] for w in v.witnesses[:2]]
    assert min(values) < 0 < max(values)
    assert set(v.witnesses[0][0]) == {"r", "direction", "ball_sample", "y_alpha_norm"}


def test_direct_G_check_sample_count(es32, d2, grid32, cb2):
    smp = GSampling(n_ball=10, n_radii=4, axis_extremes=False)
    v = check_G_direct(arctan(), es32, d2, grid32, 1.0, 10.0, cb=cb2, sampling=smp)
    assert v.sample_count == 10 * 4 * 2


def test_radius_search_gives_up_for_mixed_sign(es32, d2, grid32, cb2):
    with pytest.raises(ConditionNotVerified):
        search_G_radius(const_kernel(2, math.pi), es32, d2, grid32, 1.0, cb2, SearchSpec(r_cap=64.0, confirm_seeds=0))


def test_held_verdict_must_name_condition():
    with pytest.raises(InvalidArgument):
        ConditionVerdict("G", None, True)


def test_axis_extremes_lie_on_the_ball_boundary(es32, d2, cb2):
    pts = alpha_ball_extremes(es32, d2, cb2.alpha, cb2.delta, 3.0)
    w = fractional_weights(es32, cb2.alpha)
    np.testing.assert_allclose(np.linalg.norm(pts * w, axis=1), 3.0, rtol=1e-14)
    assert np.all(pts[:, 1] == 0.0)


@given(st.floats(0.0, 100.0), st.integers(0, 2**32 - 1))
def test_ball_samples_stay_in_ball_and_off_kernel(radius, seed):
    es = build_laplacian_1d(16, math.pi)
    d = decompose(es, 2)
    Y = sample_alpha_ball(es, d, 0.8, 0.0, radius, 20, np.random.default_rng(seed))
    assert np.all(np.linalg.norm(Y * fractional_weights(es, 0.8), axis=1) <= radius * (1 + 1e-12))
    assert np.all(Y[:, 1] == 0.0)


@given(st.floats(0.1, 50.0), st.floats(0.1, 1.0), st.integers(0, 2**32 - 1))
def test_neighborhood_samples_are_members(R_P, shrink, seed):
    es = build_laplacian_1d(16, math.pi)
    d = decompose(es, 2)
    N = neighborhood_box(arctan(), es, d, ConstantsBundle.for_decomposition(d), R_P)
    pts = N.sample(es, 30, np.random.default_rng(seed), shrink)
    assert np.all(N.contains(pts, es))


def test_neighborhood_membership(es32, d2, cb2):
    N = IsolatingNeighborhood(10.0, 2.0, 9.0, "G1", d2, cb2)
    C = np.zeros((3, 32))
    C[1, 1] = 2.5
    C[2, 0] = 11.0  # alpha-weight of mode 1 is 1
    assert N.contains(C, es32).tolist() == [True, False, False]
