"""Exponential integrators for ``u' = -Au + lam u + G(s, u)`` on the Galerkin space.

``G(s, u) = P F(sQu + Pu) + s Q F(sQu + Pu)`` deforms the original equation
(``s = 1``) into the product of the linear flow on the Q-part and the kernel
flow ``u' = P F(u)`` on X0 (``s = 0``).  The linear part is diagonal, so the
propagator ``exp((lam - lambda_i) h)`` is exact and only the forcing is
approximated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import BlowUpDetected, InvalidArgument
from .nonlinearity import (
    NonlinearityModel,
    Realization,
    niemytzki_coefficients,
    operator_bound,
    realization,
)
from .quadrature import QuadratureGrid
from .spectral import (
    ConstantsBundle,
    Decomposition,
    EigenSystem,
    SpectralState,
    fractional_weights,
)

SCHEMES = ("ETD1", "ETD2", "ETD4")
BLOWUP_THRESHOLD = 1e12

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class IntegratorConfig:
    step_h: float = 1e-2
    scheme: str = "ETD2"
    t_end: float = 1.0
    phi_taylor_threshold: float = 1e-4
    save_stride: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidArgument(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.step_h > 0 or not self.t_end > 0:
            raise InvalidArgument("step_h and t_end must be positive")
        if self.step_h > self.t_end:
            raise InvalidArgument("step_h exceeds t_end")
        if self.save_stride < 1:
            raise InvalidArgument("save_stride must be a positive integer")

    @property
    def n_steps(self) -> int:
        return max(1, int(math.ceil(self.t_end / self.step_h - 1e-9)))

    def with_(self, **changes) -> "IntegratorConfig":
        fields = dict(self.__dict__)
        fields.update(changes)
        return IntegratorConfig(**fields)


# --- phi functions -----------------------------------------------------------

def phi1(z: np.ndarray, threshold: float = 1e-4) -> np.ndarray:
    """``(e^z - 1) / z`` with a Taylor branch near 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < threshold
    safe = np.where(small, 1.0, z)
    series = 1.0 + z / 2.0 + z * z / 6.0 + z**3 / 24.0
    return np.where(small, series, np.expm1(safe) / safe)


def phi2(z: np.ndarray, threshold: float = 1e-1) -> np.ndarray:
    """``(e^z - 1 - z) / z^2``.

    The direct formula loses about ``eps / z^2`` relative accuracy, so the
    series branch is used on the wider disc ``|z| < 0.1``.
    """
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < threshold
    safe = np.where(small, 1.0, z)
    series = np.zeros_like(z)
    term = np.full_like(z, 0.5)
    for n in range(2, 12):
        series = series + term
        term = term * z / (n + 1)
    return np.where(small, series, (np.expm1(safe) - safe) / (safe * safe))


def _etdrk4_coefficients(z: np.ndarray, n_contour: int = 32) -> tuple[np.ndarray, ...]:
    """Cox-Matthews ETDRK4 weights by contour averaging (Kassam-Trefethen)."""
    roots = np.exp(1j * np.pi * (np.arange(1, n_contour + 1) - 0.5) / n_contour)
    lr = z[:, None] + roots[None, :]
    half = z[:, None] / 2 + roots[None, :]
    e = np.exp(lr)
    q = np.real(np.mean((np.exp(half) - 1) / half, axis=1)) / 2
    f1 = np.real(np.mean((-4 - lr + e * (4 - 3 * lr + lr**2)) / lr**3, axis=1))
    f2 = np.real(np.mean((2 + lr + e * (lr - 2)) / lr**3, axis=1))
    f3 = np.real(np.mean((-4 - 3 * lr - lr**2 + e * (4 - lr)) / lr**3, axis=1))
    return q, f1, f2, f3


class _Stepper:
    def __init__(self, rates: np.ndarray, h: float, scheme: str, threshold: float):
        z = rates * h
        self.scheme = scheme
        self.h = h
        self.E = np.exp(z)
        if scheme == "ETD4":
            self.E2 = np.exp(z / 2)
            q, f1, f2, f3 = _etdrk4_coefficients(z)
            self.q, self.f1, self.f2, self.f3 = h * q, h * f1, h * f2, h * f3
        else:
            self.c1 = h * phi1(z, threshold)
            self.c2 = h * phi2(z)

    def step(self, C: np.ndarray, field: Field) -> np.ndarray:
        N0 = field(C)
        if self.scheme == "ETD1":
            return self.E * C + self.c1 * N0
        if self.scheme == "ETD2":
            a = self.E * C + self.c1 * N0
            return a + self.c2 * (field(a) - N0)
        a = self.E2 * C + self.q * N0
        Na = field(a)
        b = self.E2 * C + self.q * Na
        Nb = field(b)
        c = self.E2 * a + self.q * (2 * Nb - N0)
        Nc = field(c)
        return self.E * C + self.f1 * N0 + 2 * self.f2 * (Na + Nb) + self.f3 * Nc


def homotopy_field_fn(
    model: NonlinearityModel, d: Decomposition, s: float, real: Realization
) -> Field:
    """Batched ``C -> G(s, C)`` on coefficient rows."""
    if not 0.0 <= s <= 1.0:
        raise InvalidArgument(f"homotopy parameter must lie in [0, 1], got {s}")
    p = d.masks["P"].astype(float)
    q = d.masks["Q"].astype(float)
    if s == 1.0:
        return lambda C: niemytzki_coefficients(model, C, real)

    def field(C):
        Fw = niemytzki_coefficients(model, C * (p + s * q), real)
        return Fw * (p + s * q)

    return field


def homotopy_field(
    model: NonlinearityModel,
    d: Decomposition,
    s: float,
    u: SpectralState,
    es: EigenSystem,
    grid: QuadratureGrid,
) -> SpectralState:
    real = realization(es, grid)
    return SpectralState(homotopy_field_fn(model, d, s, real)(u.coefficients))


def run_batch(
    field: Field,
    rates: np.ndarray,
    C0: np.ndarray,
    cfg: IntegratorConfig,
    guard: float = BLOWUP_THRESHOLD,
    stop: Callable[[float, np.ndarray], bool] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate rows of ``C0`` forward; returns saved times and states.

    States have shape ``(n_saved, *C0.shape)``.  ``stop(t, C)`` may end the
    run early (the stopping state is saved).
    """
    n = cfg.n_steps
    h = cfg.t_end / n
    stepper = _Stepper(np.asarray(rates, float), h, cfg.scheme, cfg.phi_taylor_threshold)
    C = np.array(C0, dtype=float)
    times, states = [0.0], [C.copy()]
    for i in range(1, n + 1):
        C = stepper.step(C, field)
        t = i * h
        norm = np.max(np.abs(C)) if C.size else 0.0
        if not np.isfinite(norm) or norm > guard:
            raise BlowUpDetected(f"state norm exceeded {guard:g} at t = {t:.6g}", t)
        done = stop is not None and stop(t, C)
        if i % cfg.save_stride == 0 or i == n or done:
            times.append(t)
            states.append(C.copy())
        if done:
            break
    return np.array(times), np.array(states)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    alpha_norms: np.ndarray
    H_norms: np.ndarray
    P_norms: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times)
        if t.ndim != 1 or t.size != len(self.states):
            raise InvalidArgument("times and states differ in length")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgument("trajectory times must be strictly increasing")
        if not np.all(np.isfinite(self.states)):
            raise InvalidArgument("trajectory states must be finite")

    def __len__(self) -> int:
        return self.times.size

    def state(self, i: int) -> SpectralState:
        return SpectralState(self.states[i])

    @property
    def final(self) -> SpectralState:
        return self.state(-1)

    def coordinate(self, mode: int) -> np.ndarray:
        return self.states[:, mode]

    def to_csv(self, path: str | Path) -> None:
        n = self.states.shape[1]
        header = ["t"] + [f"c_{j}" for j in range(1, n + 1)] + ["alpha_norm", "H_norm_P_part"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, c, a, p in zip(self.times, self.states, self.alpha_norms, self.P_norms):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in c] + [repr(float(a)), repr(float(p))])

    @classmethod
    def from_states(cls, times, states, es: EigenSystem, d: Decomposition, cb: ConstantsBundle) -> "Trajectory":
        states = np.asarray(states, dtype=float)
        w = fractional_weights(es, cb.alpha, cb.delta)
        pmask = d.masks["P"]
        return cls(
            times=np.asarray(times, dtype=float),
            states=states,
            alpha_norms=np.linalg.norm(states * w, axis=-1),
            H_norms=np.linalg.norm(states, axis=-1),
            P_norms=np.linalg.norm(states[:, pmask], axis=-1),
        )


def read_trajectory_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def _constants(d: Decomposition, cb: ConstantsBundle | None) -> ConstantsBundle:
    return cb if cb is not None else ConstantsBundle.for_decomposition(d)


def integrate(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    lam: float,
    s: float,
    u0: SpectralState,
    cfg: IntegratorConfig,
    grid: QuadratureGrid,
    cb: ConstantsBundle | None = None,
) -> Trajectory:
    """Mild solution of the homotopy equation at parameter ``s`` from ``u0``.

    The step is shrunk to ``t_end / ceil(t_end / step_h)`` so the run ends
    exactly at ``t_end``.
    """
    if len(u0) != es.n_modes:
        raise InvalidArgument("initial state size does not match the eigen system")
    real = realization(es, grid)
    field = homotopy_field_fn(model, d, s, real)
    rates = lam - es.mode_eigenvalues
    times, states = run_batch(field, rates, u0.coefficients, cfg)
    return Trajectory.from_states(times, states, es, d, _constants(d, cb))


def integrate_kernel_flow(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    u0_in_X0: SpectralState,
    cfg: IntegratorConfig,
    grid: QuadratureGrid,
    cb: ConstantsBundle | None = None,
) -> Trajectory:
    """Classical RK4 for the kernel flow ``u' = P F(u)`` on X0."""
    p = d.masks["P"]
    if np.any(u0_in_X0.coefficients[~p] != 0.0):
        raise InvalidArgument("kernel flow start must lie in X0")
    real = realization(es, grid)
    pf = p.astype(float)

    def field(C):
        return niemytzki_coefficients(model, C, real) * pf

    n = cfg.n_steps
    h = cfg.t_end / n
    C = np.array(u0_in_X0.coefficients)
    times, states = [0.0], [C.copy()]
    for i in range(1, n + 1):
        k1 = field(C)
        k2 = field(C + 0.5 * h * k1)
        k3 = field(C + 0.5 * h * k2)
        k4 = field(C + h * k3)
        C = C + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(C)) or np.max(np.abs(C)) > BLOWUP_THRESHOLD:
            raise BlowUpDetected(f"kernel flow blew up at t = {i * h:.6g}", i * h)
        if i % cfg.save_stride == 0 or i == n:
            times.append(i * h)
            states.append(C.copy())
    return Trajectory.from_states(times, states, es, d, _constants(d, cb))


def boundary_derivatives(
    model: NonlinearityModel, d: Decomposition, s: float, C: np.ndarray, real: Realization
) -> np.ndarray:
    """Batched ``2 <P F(sQu + Pu), Pu>`` for rows of ``C``."""
    p = d.masks["P"].astype(float)
    q = d.masks["Q"].astype(float)
    Fw = niemytzki_coefficients(model, C * (p + s * q), real)
    return 2.0 * np.sum(Fw * C * p, axis=-1)


def boundary_exit_derivative(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    s: float,
    u_on_boundary: SpectralState,
    grid: QuadratureGrid,
    radius: float | None = None,
    tol: float = 1e-9,
) -> float:
    """Time derivative of ``|Pu|_H^2`` along the homotopy flow at ``u``.

    With ``radius`` given, ``u`` must satisfy ``|Pu|_H = radius``.
    """
    C = u_on_boundary.coefficients
    if radius is not None:
        pn = float(np.linalg.norm(C[d.masks["P"]]))
        if abs(pn - radius) > tol * max(1.0, radius):
            raise InvalidArgument(f"|Pu| = {pn:.12g} is not on the sphere of radius {radius:g}")
    real = realization(es, grid)
    return float(boundary_derivatives(model, d, s, C, real))


# --- bounded solutions through the unstable part -----------------------------

@dataclass(frozen=True, eq=False)
class BoundedRun:
    """Forward runs whose X- coordinates were re-chosen to stay bounded.

    ``states`` has shape ``(n_saved, batch, n_modes)``; ``corrections`` records,
    per window start, the change applied to the X- coordinates (the first
    entry is the replacement of the initial X- data).
    """

    times: np.ndarray
    states: np.ndarray
    corrections: np.ndarray
    converged: np.ndarray


def integrate_bounded(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    lam: float,
    s: float,
    C0: np.ndarray,
    cfg: IntegratorConfig,
    grid: QuadratureGrid,
    window: float | None = None,
    lookahead: float | None = None,
) -> BoundedRun:
    """Forward integration that tracks the bounded solution through unstable modes.

    Modes with ``lam - lambda_i > 0`` amplify any error exponentially, so a
    plain forward run from a generic state leaves every bounded set.  Bounded
    solutions are characterized by their X- coordinates, which depend on the
    future.  This routine works in windows: at each window start the X-
    coordinate is solved for (bracketing with Illinois regula falsi) so that
    the run stays bounded over ``window + lookahead``, and only the first
    ``window`` is kept.  Only a single unstable mode is supported.
    """
    rates = lam - es.mode_eigenvalues
    unstable = np.flatnonzero(rates > 0)
    C0 = np.atleast_2d(np.asarray(C0, dtype=float))
    real = realization(es, grid)
    field = homotopy_field_fn(model, d, s, real)
    n_total = cfg.n_steps
    h = cfg.t_end / n_total
    if unstable.size == 0:
        times, states = run_batch(field, rates, C0, cfg)
        return BoundedRun(times, states, np.zeros((1, C0.shape[0], 0)), np.ones(C0.shape[0], bool))
    if unstable.size > 1:
        raise InvalidArgument("bounded-solution tracking supports a single unstable mode")
    j = int(unstable[0])
    rate = float(rates[j])
    # amplification of about 1e12 over the horizon keeps values finite and
    # the kept window accurate to ~1e-4 * 1e-12
    horizon = 12.0 * math.log(10.0) / rate
    window = window if window is not None else horizon / 2
    lookahead = lookahead if lookahead is not None else horizon - window
    steps_w = max(1, int(round(window / h)))
    steps_la = max(1, int(round(lookahead / h)))
    # |forcing on mode j| <= |F| in H; beyond K / rate the mode escapes monotonically
    bracket = 1.01 * operator_bound(model, es) / rate + 1e-12
    stepper = _Stepper(rates, h, cfg.scheme, cfg.phi_taylor_threshold)

    def run(C, steps, keep):
        out = [C.copy()] if keep else None
        for i in range(steps):
            C = stepper.step(C, field)
            # escaping rows only need their sign; cap them to avoid overflow
            big = np.abs(C[:, j]) > 1e15
            if np.any(big):
                C[big, j] = np.sign(C[big, j]) * 1e15
            if keep and i < keep:
                out.append(C.copy())
        return C, out

    B = C0.shape[0]
    C = C0.copy()
    all_states = []  # the t = 0 row is the corrected start
    times = [0.0]
    corrections = []
    converged = np.ones(B, dtype=bool)
    done = 0
    while done < n_total:
        nw = min(steps_w, n_total - done)
        base = C

        def g(rows, a):
            trial = base[rows].copy()
            trial[:, j] = a
            return run(trial, nw + steps_la, 0)[0][:, j]

        a, ok = _solve_window(g, C[:, j], bracket, 1e-9 * math.exp(rate * steps_la * h))
        converged &= ok
        corrections.append(a - C[:, j])
        C = C.copy()
        C[:, j] = a
        _, kept = run(C, nw, nw)
        if done == 0:
            all_states.append(kept[0])
        for i, state in enumerate(kept[1:], start=1):
            if (done + i) % cfg.save_stride == 0 or done + i == n_total:
                times.append((done + i) * h)
                all_states.append(state)
        C = kept[-1]
        done += nw
        if np.max(np.abs(C)) > BLOWUP_THRESHOLD:
            raise BlowUpDetected("bounded tracking lost the solution", done * h)
    return BoundedRun(
        np.array(times), np.array(all_states), np.array(corrections)[:, :, None], converged
    )


def _solve_window(g, a0, bracket, tol_g, max_iter=100):
    """Roots of the increasing maps ``g(rows, a)``, one per row, near ``a0``.

    A bracket is grown geometrically around the previous value (which is
    usually accurate to the window tolerance) and capped at the global
    bracket ``[-bracket, bracket]`` where the signs are known.  Illinois
    regula falsi then refines each row; only unfinished rows are integrated.
    """
    B = a0.size
    rows_all = np.arange(B)
    a0 = np.clip(a0, -bracket, bracket)
    width = 1e-9 * np.maximum(1.0, np.abs(a0))
    lo = np.maximum(a0 - width, -bracket)
    hi = np.minimum(a0 + width, bracket)
    glo = g(rows_all, lo)
    ghi = g(rows_all, hi)
    for _ in range(40):
        below = glo > 0
        above = ghi < 0
        if not np.any(below | above):
            break
        width = np.where(below | above, width * 1e3, width)
        # a side with the wrong sign becomes the opposite end of the bracket
        hi = np.where(below, lo, hi)
        ghi = np.where(below, glo, ghi)
        lo = np.where(above, hi, lo)
        glo = np.where(above, ghi, glo)
        if np.any(below):
            r = np.flatnonzero(below)
            lo[r] = np.maximum(a0[r] - width[r], -bracket)
            glo[r] = g(r, lo[r])
        if np.any(above):
            r = np.flatnonzero(above)
            hi[r] = np.minimum(a0[r] + width[r], bracket)
            ghi[r] = g(r, hi[r])
    a = np.where(np.abs(glo) < np.abs(ghi), lo, hi)
    ok = np.minimum(np.abs(glo), np.abs(ghi)) < tol_g
    side = np.zeros(B, dtype=int)
    for _ in range(max_iter):
        active = np.flatnonzero(~ok)
        if active.size == 0:
            break
        l, h_, gl, gh = lo[active], hi[active], glo[active], ghi[active]
        nxt = (l * gh - h_ * gl) / (gh - gl)
        bad = ~np.isfinite(nxt) | (nxt <= l) | (nxt >= h_)
        nxt = np.where(bad, 0.5 * (l + h_), nxt)
        gn = g(active, nxt)
        a[active] = nxt
        pos = gn > 0
        sd = side[active]
        # Illinois: halve the retained endpoint value when the same side repeats
        gl = np.where(pos & (sd == 1), gl / 2, gl)
        gh = np.where(~pos & (sd == -1), gh / 2, gh)
        hi[active] = np.where(pos, nxt, h_)
        ghi[active] = np.where(pos, gn, gh)
        lo[active] = np.where(pos, l, nxt)
        glo[active] = np.where(pos, gl, gn)
        side[active] = np.where(pos, 1, -1)
        tiny = hi[active] - lo[active] <= 4 * np.spacing(np.maximum(np.abs(lo[active]), np.abs(hi[active])))
        ok[active] = (np.abs(gn) < tol_g) | tiny
    return a, ok
