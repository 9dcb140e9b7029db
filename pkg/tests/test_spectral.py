import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conley_resonance.errors import (
    IllPosedBackwardFlow,
    InvalidArgument,
    InvalidOperator,
    UnsupportedRealization,
)
from conley_resonance.spectral import (
    ConstantsBundle,
    EigenSystem,
    SpectralState,
    build_laplacian_1d,
    decompose,
    embedding_constants,
    fractional_norm,
    project,
    shifted_semigroup_apply,
)


def test_laplacian_eigenvalues_on_unit_interval_length_pi():
    es = build_laplacian_1d(5, math.pi)
    assert es.distinct_eigenvalues == (1.0, 4.0, 9.0, 16.0, 25.0)
    assert es.n_modes == 5


def test_laplacian_on_other_length():
    es = build_laplacian_1d(3, 2.0)
    np.testing.assert_allclose(es.mode_eigenvalues, [(j * math.pi / 2) ** 2 for j in (1, 2, 3)], rtol=1e-15)


@pytest.mark.parametrize("n, length", [(0, math.pi), (-1, 1.0), (3, 0.0), (3, -1.0), (2.5, 1.0)])
def test_laplacian_rejects_bad_input(n, length):
    with pytest.raises(InvalidArgument):
        build_laplacian_1d(n, length)


def test_eigen_system_validation():
    with pytest.raises(InvalidArgument):
        EigenSystem.abstract([1.0, 1.0])
    with pytest.raises(InvalidArgument):
        EigenSystem.abstract([1.0, 2.0], [1, 0])
    with pytest.raises(InvalidArgument):
        EigenSystem.abstract([1.0, float("nan")])


def test_abstract_system_has_no_spatial_realization():
    es = EigenSystem.abstract([1.0, 4.0])
    with pytest.raises(UnsupportedRealization):
        es.eigenfunctions(np.array([0.1]))


def test_decomposition_k2_simple_spectrum():
    d = decompose(build_laplacian_1d(8, math.pi), 2)
    assert d.idx0 == (1,)
    assert d.idx_minus == (0,)
    assert d.idx_plus == tuple(range(2, 8))
    assert (d.d_k, d.d_km1) == (2, 1)
    assert d.spectral_gap_c == 3.0  # min(4 - 1, 9 - 4)


def test_decomposition_with_multiplicities():
    es = EigenSystem.abstract([1.0, 4.0, 9.0], [2, 3, 1])
    d = decompose(es, 2)
    assert d.idx0 == (2, 3, 4)
    assert d.idx_minus == (0, 1)
    assert (d.d_k, d.d_km1, d.dim_X0, d.dim_Xminus) == (5, 2, 3, 2)


def test_decomposition_k1_has_empty_lower_part():
    d = decompose(build_laplacian_1d(4, math.pi), 1)
    assert d.idx_minus == () and d.d_km1 == 0


def test_single_level_gap_is_infinite():
    assert math.isinf(decompose(EigenSystem.abstract([2.0]), 1).spectral_gap_c)


@pytest.mark.parametrize("k", [0, 9, 1.5])
def test_decompose_rejects_bad_level(k):
    with pytest.raises(InvalidArgument):
        decompose(build_laplacian_1d(8, math.pi), k)


def test_decay_of_upper_mode_is_exact():
    es = build_laplacian_1d(16, math.pi)
    u = SpectralState.mode(16, 2)
    for t in (0.1, 1.0, 3.0):
        out = shifted_semigroup_apply(u, t, 4.0, es)
        assert abs(out.h_norm() - math.exp(-5 * t)) <= 1e-12 * math.exp(-5 * t)


def test_backward_flow_on_lower_mode_is_exact_growth_inverse():
    es = build_laplacian_1d(16, math.pi)
    u = SpectralState.mode(16, 0)
    back = shifted_semigroup_apply(u, -2.0, 4.0, es)
    assert back.coefficients[0] == pytest.approx(math.exp(-6.0), rel=1e-15)
    fwd = shifted_semigroup_apply(back, 2.0, 4.0, es)
    assert fwd.allclose(u, 1e-15)


def test_backward_flow_touching_upper_modes_is_rejected():
    es = build_laplacian_1d(8, math.pi)
    with pytest.raises(IllPosedBackwardFlow):
        shifted_semigroup_apply(SpectralState.mode(8, 3), -0.1, 4.0, es)


def test_kernel_mode_is_fixed_by_linear_flow():
    es = build_laplacian_1d(8, math.pi)
    u = SpectralState.mode(8, 1, 2.5)
    for t in (-3.0, 0.0, 7.0):
        assert shifted_semigroup_apply(u, t, 4.0, es).allclose(u, 0.0)


def test_fractional_norm_of_single_mode():
    es = build_laplacian_1d(8, math.pi)
    cb = ConstantsBundle(alpha=0.8)
    assert fractional_norm(SpectralState.mode(8, 2), es, cb) == pytest.approx(9.0**0.8, rel=1e-15)


def test_fractional_weights_need_positive_shift():
    es = EigenSystem.abstract([-2.0, 1.0])
    with pytest.raises(InvalidOperator):
        fractional_norm(SpectralState.zeros(2), es, ConstantsBundle(alpha=0.8, delta=1.0))


def test_embedding_constants():
    es = build_laplacian_1d(8, math.pi)
    d = decompose(es, 3)
    C, Cp = embedding_constants(es, d, ConstantsBundle(alpha=0.9))
    assert C == pytest.approx(1.0)
    assert Cp == pytest.approx(4.0**0.9)


@pytest.mark.parametrize("alpha", [0.75, 1.0, 0.5])
def test_constants_bundle_alpha_range(alpha):
    with pytest.raises(InvalidArgument):
        ConstantsBundle(alpha=alpha)


def test_state_rejects_non_finite():
    with pytest.raises(InvalidArgument):
        SpectralState([1.0, float("inf")])


def test_state_size_mismatch():
    with pytest.raises(InvalidArgument):
        SpectralState.zeros(3) + SpectralState.zeros(4)


coeffs = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=12, max_size=12)


@given(coeffs, st.integers(1, 12))
def test_projections_are_orthogonal_and_sum_to_identity(c, k):
    es = build_laplacian_1d(12, math.pi)
    d = decompose(es, k)
    u = SpectralState(c)
    p, qm, qp = (project(u, d, part) for part in ("P", "Qminus", "Qplus"))
    assert (p + qm + qp).allclose(u, 0.0)
    scale = max(1.0, u.h_norm() ** 2)
    for a, b in ((p, qm), (p, qp), (qm, qp)):
        assert abs(a.dot(b)) <= 1e-10 * scale
    assert project(u, d, "Q").allclose(qm + qp, 0.0)


@given(coeffs, st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_semigroup_composition(c, s, t):
    es = build_laplacian_1d(12, math.pi)
    u = SpectralState(c)
    once = shifted_semigroup_apply(u, s + t, 4.0, es)
    twice = shifted_semigroup_apply(shifted_semigroup_apply(u, s, 4.0, es), t, 4.0, es)
    assert once.allclose(twice, 1e-9 * max(1.0, u.h_norm()) * math.exp(3 * (s + t)))


@given(coeffs, st.floats(0.0, 10.0))
def test_upper_part_decays_at_gap_rate(c, t):
    es = build_laplacian_1d(12, math.pi)
    d = decompose(es, 2)
    qp = project(SpectralState(c), d, "Qplus")
    out = shifted_semigroup_apply(qp, t, 4.0, es)
    assert out.h_norm() <= math.exp(-d.spectral_gap_c * t) * qp.h_norm() * (1 + 1e-12) + 1e-300


def test_sine_basis_is_orthonormal_under_default_quadrature():
    from conley_resonance.quadrature import default_grid

    es = build_laplacian_1d(64, math.pi)
    g = default_grid(math.pi, 64)
    phi = es.eigenfunctions(g.nodes)
    gram = (phi * g.weights) @ phi.T
    assert np.max(np.abs(gram - np.eye(64))) < 1e-10


def test_backward_flow_with_many_modes_stays_finite():
    es = build_laplacian_1d(64, math.pi)
    out = shifted_semigroup_apply(SpectralState.mode(64, 0), -10.0, 4.0, es)
    assert out.coefficients[0] == pytest.approx(math.exp(-30.0), rel=1e-14)
    assert np.all(out.coefficients[1:] == 0.0)
