import math

import numpy as np
import pytest

from conley_resonance.conditions import IsolatingNeighborhood, neighborhood_box
from conley_resonance.errors import InvalidArgument, NonhyperbolicOrigin
from conley_resonance.nonlinearity import arctan_minus_gauss, const_kernel, zero
from conley_resonance.orbits import (
    EXITS_N,
    equilibrium_residual,
    forward_attraction_search,
    kernel_drift_slope,
    shoot_from_origin,
    sobol_points_in,
    unstable_directions,
    _zero_tail,
)
from conley_resonance.quadrature import default_grid
from conley_resonance.semiflow import IntegratorConfig, Trajectory, integrate
from conley_resonance.spectral import ConstantsBundle, SpectralState, build_laplacian_1d, decompose

ES = build_laplacian_1d(16, math.pi)
D = decompose(ES, 2)
CB = ConstantsBundle.for_decomposition(D)
GRID = default_grid(math.pi, 16)
LL1 = arctan_minus_gauss(1.0, 2.5)


def test_unstable_directions_are_zero_based():
    assert unstable_directions(ES, 4.0, -1.5) == [0]
    assert unstable_directions(ES, 4.0, 1.0) == [0, 1]
    assert unstable_directions(ES, 4.0, -4.0) == []
    with pytest.raises(NonhyperbolicOrigin):
        unstable_directions(ES, 4.0, 0.0)


def test_zero_tail_needs_the_full_window():
    t = np.linspace(0, 20, 21)
    assert _zero_tail(t, np.where(t >= 10, 1e-8, 1.0))
    assert not _zero_tail(t, np.where(t >= 11, 1e-8, 1.0))
    assert not _zero_tail(t[:5], np.zeros(5))


def test_origin_is_an_equilibrium():
    assert equilibrium_residual(LL1, ES, 4.0, np.zeros(16), GRID) == 0.0
    assert equilibrium_residual(zero(), ES, 4.0, SpectralState.mode(16, 1).coefficients, GRID) == 0.0


def test_sobol_points_lie_in_neighborhood():
    N = neighborhood_box(LL1, ES, D, CB, 4.0)
    pts = sobol_points_in(N, ES, 64, seed=3)
    assert pts.shape == (64, 16)
    assert np.all(N.contains(pts, ES))
    np.testing.assert_array_equal(pts, sobol_points_in(N, ES, 64, seed=3))


def test_shot_argument_checks():
    N = IsolatingNeighborhood(51.0, 4.0, 50.0, "G1", D, CB)
    cfg = IntegratorConfig(step_h=0.01, t_end=1.0)
    v = SpectralState.mode(16, 0)
    with pytest.raises(InvalidArgument):
        shoot_from_origin(LL1, ES, D, 4.0, v, 1e-2, cfg, N, GRID)
    with pytest.raises(InvalidArgument):
        shoot_from_origin(LL1, ES, D, 4.0, v * 2.0, 1e-6, cfg, N, GRID)
    with pytest.raises(InvalidArgument):
        shoot_from_origin(LL1, ES, D, 4.0, SpectralState.mode(16, 1), 1e-6, cfg, N, GRID, nu=-1.5)


def test_shot_along_unstable_mode_reports_halving_delay():
    N = IsolatingNeighborhood(51.0, 4.0, 50.0, "G1", D, CB)
    cfg = IntegratorConfig(step_h=0.01, t_end=40.0, save_stride=10)
    rep = shoot_from_origin(LL1, ES, D, 4.0, SpectralState.mode(16, 0), 1e-6, cfg, N, GRID, nu=-1.5)
    assert rep.predicted_shift == pytest.approx(math.log(2) / 1.5)
    assert rep.halving_consistent
    # the symmetric subspace is invariant and the odd part grows, so both shots leave N
    assert rep.classifications == (EXITS_N, EXITS_N) and not rep.found_witness
    for s in rep.time_shift:
        assert s == pytest.approx(rep.predicted_shift, abs=0.1)


def test_forward_attraction_report_shapes():
    N = neighborhood_box(LL1, ES, D, CB, 4.0)
    cfg = IntegratorConfig(step_h=0.1, t_end=20.0, save_stride=10)
    rep = forward_attraction_search(LL1, ES, D, 4.0, N, 8, cfg, GRID, seed=1)
    assert rep.converged.shape == (8,) and rep.states.shape[1:] == (8, 16)
    assert rep.tracking_converged.all()
    for i in rep.witnesses:
        assert rep.converged[i] and rep.start_norms[i] >= 0.4
    tr = rep.trajectory(0, ES, D, N)
    assert isinstance(tr, Trajectory) and len(tr) == rep.times.size


def test_drift_slope_of_constant_kernel_source():
    cfg = IntegratorConfig(step_h=1e-2, t_end=5.0)
    traj = integrate(const_kernel(2, math.pi), ES, D, 4.0, 1.0, SpectralState.zeros(16), cfg, GRID)
    assert kernel_drift_slope(traj, 1) == pytest.approx(1.0, abs=1e-10)
    assert kernel_drift_slope(traj, 1, t_max=2.0) == pytest.approx(1.0, abs=1e-10)
