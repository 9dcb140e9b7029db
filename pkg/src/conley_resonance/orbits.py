"""Numerical search for nonzero bounded orbits with the origin at one end."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm, qmc

from .conditions import IsolatingNeighborhood
from .conley import HYPERBOLICITY_TOL, _check_hyperbolic
from .errors import InvalidArgument
from .nonlinearity import NonlinearityModel, niemytzki_coefficients, realization
from .quadrature import QuadratureGrid
from .semiflow import (
    IntegratorConfig,
    Trajectory,
    homotopy_field_fn,
    integrate_bounded,
    run_batch,
)
from .spectral import Decomposition, EigenSystem, SpectralState, fractional_weights

EXITS_N = "EXITS_N"
CONVERGES_TO_ZERO = "CONVERGES_TO_ZERO"
BOUNDED_IN_N = "BOUNDED_IN_N"
NONZERO_EQUILIBRIUM = "NONZERO_EQUILIBRIUM"

ZERO_LEVEL = 1e-6
ZERO_WINDOW = 10.0
EQUILIBRIUM_RESIDUAL = 1e-6


def unstable_directions(es: EigenSystem, lam: float, nu: float, tol: float = HYPERBOLICITY_TOL) -> list[int]:
    """0-based modes growing under the linearization ``u' = (lam + nu - A) u``."""
    mu = lam + nu
    _check_hyperbolic(es, mu, tol)
    return [int(i) for i in np.flatnonzero(mu - es.mode_eigenvalues > 0)]


def _zero_tail(times: np.ndarray, norms: np.ndarray, window: float = ZERO_WINDOW, level: float = ZERO_LEVEL) -> bool:
    """H-norm below ``level`` at every saved time of the trailing ``window``."""
    if times[-1] - times[0] < window:
        return False
    tail = times >= times[-1] - window
    return bool(np.all(norms[tail] < level))


def equilibrium_residual(model: NonlinearityModel, es: EigenSystem, lam: float, C: np.ndarray, grid: QuadratureGrid) -> float:
    """``|(lam - A) u + F(u)|`` in H."""
    F = niemytzki_coefficients(model, np.asarray(C, float), realization(es, grid))
    return float(np.linalg.norm((lam - es.mode_eigenvalues) * C + F))


@dataclass(frozen=True, eq=False)
class Shot:
    sign: int
    epsilon: float
    classification: str
    exit_time: float | None
    trajectory: Trajectory
    departure_time: float | None
    residual: float


@dataclass(frozen=True, eq=False)
class ShotReport:
    direction: tuple[float, ...]
    epsilon: float
    shots: tuple[Shot, ...]
    halved: tuple[Shot, ...]
    halving_consistent: bool
    time_shift: tuple[float | None, ...]
    predicted_shift: float

    @property
    def classifications(self) -> tuple[str, ...]:
        return tuple(s.classification for s in self.shots)

    @property
    def found_witness(self) -> bool:
        return any(c in (BOUNDED_IN_N, NONZERO_EQUILIBRIUM) for c in self.classifications)


def _departure_time(times, norms, level):
    above = np.flatnonzero(norms >= level)
    return float(times[above[0]]) if above.size else None


def _classify(model, es, d, lam, traj, N, grid) -> tuple[str, float | None, float]:
    inside = N.contains(traj.states, es)
    if not np.all(inside):
        return EXITS_N, float(traj.times[np.argmin(inside)]), math.nan
    if _zero_tail(traj.times, traj.H_norms):
        return CONVERGES_TO_ZERO, None, math.nan
    res = equilibrium_residual(model, es, lam, traj.states[-1], grid)
    if res < EQUILIBRIUM_RESIDUAL and traj.H_norms[-1] > 1e3 * ZERO_LEVEL:
        return NONZERO_EQUILIBRIUM, None, res
    return BOUNDED_IN_N, None, res


def _shoot(model, es, d, lam, C0, cfg, N, grid, departure_level):
    field_fn = homotopy_field_fn(model, d, 1.0, realization(es, grid))

    def stop(t, C):
        return not bool(N.contains(C, es))

    times, states = run_batch(field_fn, lam - es.mode_eigenvalues, C0, cfg, stop=stop)
    traj = Trajectory.from_states(times, states, es, d, N.constants)
    cls, t_exit, res = _classify(model, es, d, lam, traj, N, grid)
    return traj, cls, t_exit, res, _departure_time(traj.times, traj.H_norms, departure_level)


def shoot_from_origin(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    lam: float,
    direction: SpectralState,
    epsilon: float,
    cfg: IntegratorConfig,
    N: IsolatingNeighborhood,
    grid: QuadratureGrid,
    nu: float | None = None,
) -> ShotReport:
    """Forward shots from ``+-epsilon * direction`` until they leave N or reach ``t_end``.

    Each shot is repeated from ``epsilon / 2``.  Along an unstable direction
    with growth rate ``g`` the halved shot should reproduce the same class,
    delayed by about ``log(2) / g``; that delay is measured as the time the
    H-norm first reaches ``100 * epsilon``.
    """
    v = direction.coefficients
    if not math.isclose(float(np.linalg.norm(v)), 1.0, rel_tol=1e-9):
        raise InvalidArgument("direction must be a unit vector")
    if not 0 < epsilon <= 1e-3 * N.R_P:
        raise InvalidArgument(f"epsilon must lie in (0, 1e-3 R_P] = (0, {1e-3 * N.R_P:g}]")
    if nu is not None:
        allowed = np.zeros(es.n_modes, bool)
        allowed[unstable_directions(es, lam, nu)] = True
        if np.any(v[~allowed] != 0.0):
            raise InvalidArgument("direction must be supported on unstable modes")
        growth = float(np.max((lam + nu - es.mode_eigenvalues)[np.abs(v) > 0]))
    else:
        growth = math.nan
    level = 100 * epsilon
    shots, halved, shifts = [], [], []
    for sign in (1, -1):
        pair = []
        for eps in (epsilon, epsilon / 2):
            traj, cls, t_exit, res, t_dep = _shoot(model, es, d, lam, sign * eps * v, cfg, N, grid, level)
            pair.append(Shot(sign, eps, cls, t_exit, traj, t_dep, res))
        shots.append(pair[0])
        halved.append(pair[1])
        a, b = pair[0].departure_time, pair[1].departure_time
        shifts.append(b - a if a is not None and b is not None else None)
    consistent = all(a.classification == b.classification for a, b in zip(shots, halved))
    return ShotReport(
        direction=tuple(float(x) for x in v),
        epsilon=float(epsilon),
        shots=tuple(shots),
        halved=tuple(halved),
        halving_consistent=consistent,
        time_shift=tuple(shifts),
        predicted_shift=math.log(2.0) / growth if growth > 0 else math.nan,
    )


@dataclass(frozen=True, eq=False)
class AttractionReport:
    n_starts: int
    start_norms: np.ndarray
    final_norms: np.ndarray
    converged: np.ndarray  # H-norm below 1e-6 over the trailing window
    resident: np.ndarray  # inside N at every saved time
    exit_times: np.ndarray  # nan when the run never left N
    witnesses: tuple[int, ...]  # converged starts with norm >= 0.1 R_P
    near_returns: tuple[int, ...]  # dipped below 1e-6 without staying there
    corrections: np.ndarray
    tracking_converged: np.ndarray
    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)

    def trajectory(self, i: int, es: EigenSystem, d: Decomposition, N: IsolatingNeighborhood) -> Trajectory:
        return Trajectory.from_states(self.times, self.states[:, i, :], es, d, N.constants)


def sobol_points_in(N: IsolatingNeighborhood, es: EigenSystem, n: int, seed: int = 0) -> np.ndarray:
    """Scrambled-Sobol points of N: normal directions by inverse CDF, radii by ``u^(1/dim)``."""
    d = N.decomposition
    q = np.flatnonzero(d.masks["Q"])
    p = np.flatnonzero(d.masks["P"])
    dim = q.size + p.size + 2
    U = qmc.Sobol(d=dim, scramble=True, seed=seed).random_base2(max(0, math.ceil(math.log2(max(n, 1)))))[:n]
    U = np.clip(U, 1e-12, 1 - 1e-12)
    out = np.zeros((n, es.n_modes))
    col = 0
    for idx, radius, weights in (
        (q, N.R_Q, _alpha_weights(N, es)[q]),
        (p, N.R_P, np.ones(p.size)),
    ):
        if idx.size == 0:
            col += 1
            continue
        g = norm.ppf(U[:, col : col + idx.size])
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = U[:, col + idx.size] ** (1.0 / idx.size)
        out[:, idx] = radius * r[:, None] * g / weights
        col += idx.size + 1
    return out


def _alpha_weights(N, es):
    return fractional_weights(es, N.constants.alpha, N.constants.delta)


def forward_attraction_search(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    lam: float,
    N: IsolatingNeighborhood,
    n_starts: int,
    cfg: IntegratorConfig,
    grid: QuadratureGrid,
    seed: int = 0,
) -> AttractionReport:
    """Run all starts forward and flag those that settle at the origin.

    The unstable coordinate of each start is re-chosen so the run is the
    bounded solution through the remaining coordinates (see
    ``integrate_bounded``); ``corrections`` records the change.
    """
    C0 = sobol_points_in(N, es, n_starts, seed)
    run = integrate_bounded(model, es, d, lam, 1.0, C0, cfg, grid)
    H = np.linalg.norm(run.states, axis=-1)  # (T, B)
    inside = N.contains(run.states, es)
    resident = np.all(inside, axis=0)
    first_out = np.argmin(inside, axis=0)
    exit_times = np.where(resident, np.nan, run.times[first_out])
    converged = np.array([_zero_tail(run.times, H[:, b]) for b in range(n_starts)], dtype=bool)
    start_norms = H[0]
    witnesses = tuple(int(b) for b in np.flatnonzero(converged & (start_norms >= 0.1 * N.R_P)))
    dipped = np.any(H < ZERO_LEVEL, axis=0)
    near = tuple(int(b) for b in np.flatnonzero(dipped & ~converged))
    return AttractionReport(
        n_starts=n_starts,
        start_norms=start_norms,
        final_norms=H[-1],
        converged=converged,
        resident=resident,
        exit_times=exit_times,
        witnesses=witnesses,
        near_returns=near,
        corrections=run.corrections[0, :, 0] if run.corrections.size else np.zeros(n_starts),
        tracking_converged=run.converged,
        times=run.times,
        states=run.states,
    )


def kernel_drift_slope(traj: Trajectory, mode: int, t_max: float | None = None) -> float:
    """Least-squares slope of the ``mode`` coordinate against time."""
    t = traj.times
    sel = t <= t_max + 1e-12 if t_max is not None else np.ones_like(t, bool)
    return float(np.polyfit(t[sel], traj.states[sel, mode], 1)[0])
