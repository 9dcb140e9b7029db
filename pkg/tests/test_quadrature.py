import math

import numpy as np
import pytest

from conley_resonance.errors import InvalidArgument
from conley_resonance.quadrature import QuadratureGrid, default_grid


def test_polynomials_up_to_degree_15_are_exact_per_panel():
    g = QuadratureGrid(2.0, order=8, panels=1)
    for deg in range(16):
        exact = 2.0 ** (deg + 1) / (deg + 1)
        assert g.integrate(g.nodes**deg) == pytest.approx(exact, rel=1e-13)


def test_composite_rule_on_smooth_function():
    g = QuadratureGrid(math.pi, order=8, panels=16)
    assert g.integrate(np.sin(g.nodes)) == pytest.approx(2.0, abs=1e-14)


def test_weights_sum_to_length():
    g = default_grid(3.0, 40)
    assert g.weights.sum() == pytest.approx(3.0, rel=1e-14)
    assert g.size == 8 * 80
    assert g.rule == ("COMPOSITE_GAUSS", 8, 80)


def test_nodes_are_interior_and_sorted():
    g = default_grid(math.pi, 4)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.nodes[0] > 0 and g.nodes[-1] < math.pi


def test_refinement_doubles_panels():
    g = QuadratureGrid(1.0, 8, 4).refined()
    assert g.panels == 8


@pytest.mark.parametrize("kwargs", [dict(length=0.0), dict(length=1.0, order=0), dict(length=1.0, panels=0)])
def test_rejects_bad_grid(kwargs):
    with pytest.raises(InvalidArgument):
        QuadratureGrid(**kwargs)


def test_integrates_batches_along_last_axis():
    g = QuadratureGrid(1.0, 4, 2)
    vals = np.stack([np.ones_like(g.nodes), g.nodes])
    np.testing.assert_allclose(g.integrate(vals), [1.0, 0.5], rtol=1e-14)
