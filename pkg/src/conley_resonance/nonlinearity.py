"""Superposition (Niemytzki) operators on the Galerkin space.

A nonlinearity ``f(x, s, y)`` is evaluated pointwise on the nodes of a
quadrature grid, with ``s = u(x)`` and ``y = u'(x)`` synthesized from the sine
coefficients, and projected back onto the eigenbasis.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import HypothesisViolated, InvalidArgument, UnsupportedRealization
from .quadrature import QuadratureGrid
from .spectral import ANALYTIC_SINE, EigenSystem, SpectralState

Profile = Callable[[np.ndarray], np.ndarray]

E4_TOLERANCE = 1e-4
FD_STEP = 1e-5


@dataclass(frozen=True, eq=False)
class NonlinearityModel:
    """``f(x, s, y)`` plus the analytic facts the condition checkers rely on.

    ``limits`` holds ``(f_plus, f_minus)`` as functions of x, ``limit_infty``
    the profile of ``lim f(x, s, y) * s`` and ``floor_h`` a function ``h`` with
    ``f * s >= h`` (``floor_sense == "ge"``) or ``f * s <= h`` (``"le"``).
    Unknown metadata is ``None``.
    """

    name: str
    eval: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    bound_m: float
    lipschitz_L: float | None = None
    limits: tuple[Profile, Profile] | None = None
    limit_infty: Profile | None = None
    floor_h: Profile | None = None
    floor_sense: str | None = None
    nu: float | None = None
    uses_gradient: bool = False
    params: tuple[float, ...] = field(default_factory=tuple)

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        return f"{self.name}({', '.join(_fmt(p) for p in self.params)})"

    def __call__(self, x, s, y=0.0):
        x, s, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(s, float), np.asarray(y, float))
        return np.asarray(self.eval(x, s, y), dtype=float)


def _fmt(p: float) -> str:
    return str(int(p)) if float(p).is_integer() else repr(float(p))


def _const(value: float) -> Profile:
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


# --- built-in registry -----------------------------------------------------

def arctan(a: float = 1.0) -> NonlinearityModel:
    return NonlinearityModel(
        name="arctan",
        eval=lambda x, s, y: a * np.arctan(s),
        bound_m=abs(a) * math.pi / 2,
        lipschitz_L=abs(a),
        limits=(_const(a * math.pi / 2), _const(-a * math.pi / 2)),
        nu=float(a),
        params=() if a == 1.0 else (a,),
    )


def arctan_minus_gauss(a: float, b: float) -> NonlinearityModel:
    # sup |s e^{-s^2}| = 1/sqrt(2e); sup |d/ds (s e^{-s^2})| = 1 at s = 0
    return NonlinearityModel(
        name="arctan_minus_gauss",
        eval=lambda x, s, y: a * np.arctan(s) - b * s * np.exp(-s * s),
        bound_m=abs(a) * math.pi / 2 + abs(b) / math.sqrt(2 * math.e),
        lipschitz_L=abs(a) + abs(b),
        limits=(_const(a * math.pi / 2), _const(-a * math.pi / 2)),
        nu=float(a - b),
        params=(a, b),
    )


def strong_res(a: float) -> NonlinearityModel:
    # f s = a s^2 / (1 + s^2) lies between 0 and a
    return NonlinearityModel(
        name="strong_res",
        eval=lambda x, s, y: a * s / (1.0 + s * s),
        bound_m=abs(a) / 2,
        lipschitz_L=abs(a),
        limits=(_const(0.0), _const(0.0)),
        limit_infty=_const(a),
        floor_h=_const(0.0),
        floor_sense="ge" if a >= 0 else "le",
        nu=float(a),
        params=(a,),
    )


def strong_res_cos(a: float, length: float) -> NonlinearityModel:
    """Strong-resonance profile ``a cos(pi x / L) s / (1 + s^2)`` with sign-changing limit."""
    prof = lambda x: a * np.cos(np.pi * np.asarray(x, float) / length)  # noqa: E731
    return NonlinearityModel(
        name="strong_res_cos",
        eval=lambda x, s, y: prof(x) * s / (1.0 + s * s),
        bound_m=abs(a) / 2,
        lipschitz_L=abs(a),
        limits=(_const(0.0), _const(0.0)),
        limit_infty=prof,
        floor_h=_const(-abs(a)),
        floor_sense="ge",
        nu=None,
        params=(a,),
    )


def const_kernel(k: int, length: float) -> NonlinearityModel:
    """Constant source equal to the k-th eigenfunction; violates f(x, 0, 0) = 0."""
    k = int(k)
    phi = lambda x: math.sqrt(2 / length) * np.sin(k * np.pi * np.asarray(x, float) / length)  # noqa: E731
    return NonlinearityModel(
        name="const_kernel",
        eval=lambda x, s, y: phi(x) + 0.0 * s,
        bound_m=math.sqrt(2 / length),
        lipschitz_L=0.0,
        limits=(phi, phi),
        nu=None,
        params=(k,),
    )


def zero() -> NonlinearityModel:
    return NonlinearityModel(
        name="zero",
        eval=lambda x, s, y: 0.0 * s,
        bound_m=0.0,
        lipschitz_L=0.0,
        limits=(_const(0.0), _const(0.0)),
        limit_infty=_const(0.0),
        nu=0.0,
    )


def linear(a: float = 1.0) -> NonlinearityModel:
    """``a s``.  Unbounded; the declared bound only holds on ``|s| <= 1``."""
    return NonlinearityModel(
        name="linear",
        eval=lambda x, s, y: a * s,
        bound_m=abs(a),
        lipschitz_L=abs(a),
        nu=float(a),
        params=() if a == 1.0 else (a,),
    )


REGISTRY: dict[str, str] = {
    "arctan": "a*arctan(s); optional amplitude a (default 1)",
    "arctan_minus_gauss": "a*arctan(s) - b*s*exp(-s^2); params a, b",
    "const_kernel": "constant source phi_k(x); param k",
    "linear": "a*s (unbounded, fails the boundedness gate); optional a",
    "strong_res": "a*s/(1+s^2); param a",
    "strong_res_cos": "a*cos(pi x/L)*s/(1+s^2), sign-changing limit profile; param a",
    "zero": "f = 0",
}

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def parse_call(text: str) -> tuple[str, tuple[float, ...]]:
    """Split ``"name(p1, p2)"`` into the name and float parameters."""
    m = _CALL.match(text)
    if m is None:
        raise InvalidArgument(f"cannot parse nonlinearity {text!r}")
    name, args = m.group(1), m.group(2)
    params: tuple[float, ...] = ()
    if args is not None and args.strip():
        try:
            params = tuple(float(a) for a in args.split(","))
        except ValueError:
            raise InvalidArgument(f"non-numeric parameter in {text!r}") from None
    return name, params


def make_nonlinearity(name: str, params: tuple[float, ...] = (), length: float = math.pi) -> NonlinearityModel:
    arity = {
        "arctan": (0, 1),
        "arctan_minus_gauss": (2, 2),
        "const_kernel": (1, 1),
        "linear": (0, 1),
        "strong_res": (1, 1),
        "strong_res_cos": (1, 1),
        "zero": (0, 0),
    }
    if name not in arity:
        raise InvalidArgument(f"unknown nonlinearity {name!r}; known: {', '.join(sorted(REGISTRY))}")
    lo, hi = arity[name]
    if not lo <= len(params) <= hi:
        raise InvalidArgument(f"{name} takes {lo}..{hi} parameters, got {len(params)}")
    if name == "arctan":
        return arctan(*params)
    if name == "arctan_minus_gauss":
        return arctan_minus_gauss(*params)
    if name == "const_kernel":
        if params[0] < 1 or not float(params[0]).is_integer():
            raise InvalidArgument("const_kernel needs a positive integer mode")
        return const_kernel(int(params[0]), length)
    if name == "linear":
        return linear(*params)
    if name == "strong_res":
        return strong_res(*params)
    if name == "strong_res_cos":
        return strong_res_cos(params[0], length)
    return zero()


def from_table(path: str | Path) -> NonlinearityModel:
    """Tabulated ``f`` from a CSV with columns ``x, s, f`` on a full (x, s) grid.

    Values are interpolated bilinearly, inputs outside the table are clamped
    to its edge, and ``y`` is ignored.
    """
    from scipy.interpolate import RegularGridInterpolator

    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append(tuple(float(v) for v in row[:3]))
            except ValueError:
                continue  # header
    if not rows:
        raise InvalidArgument(f"no numeric rows in {path}")
    data = np.array(rows)
    xs, ss = np.unique(data[:, 0]), np.unique(data[:, 1])
    if xs.size * ss.size != data.shape[0] or xs.size < 2 or ss.size < 2:
        raise InvalidArgument("table must hold every (x, s) pair of a grid with at least 2x2 points")
    table = np.full((xs.size, ss.size), np.nan)
    table[np.searchsorted(xs, data[:, 0]), np.searchsorted(ss, data[:, 1])] = data[:, 2]
    interp = RegularGridInterpolator((xs, ss), table, method="linear")

    def f(x, s, y):
        x = np.clip(x, xs[0], xs[-1])
        s = np.clip(s, ss[0], ss[-1])
        pts = np.stack(np.broadcast_arrays(x, s), axis=-1)
        return interp(pts)

    edge_plus = lambda x: f(np.asarray(x, float), ss[-1], 0.0)  # noqa: E731
    edge_minus = lambda x: f(np.asarray(x, float), ss[0], 0.0)  # noqa: E731
    return NonlinearityModel(
        name="table",
        eval=f,
        bound_m=float(np.max(np.abs(table))),
        limits=(edge_plus, edge_minus),
    )


# --- spatial realization ---------------------------------------------------

@dataclass(frozen=True, eq=False)
class Realization:
    """Eigenfunction tables of ``es`` sampled at the nodes of ``grid``."""

    nodes: np.ndarray
    weights: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    wphi_t: np.ndarray

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.phi

    def synthesize_gradient(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs @ self.dphi

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of sampled values: ``sum_q w_q v(x_q) phi_j(x_q)``."""
        return values @ self.wphi_t


@lru_cache(maxsize=32)
def realization(es: EigenSystem, grid: QuadratureGrid) -> Realization:
    if es.basis != ANALYTIC_SINE:
        raise UnsupportedRealization("the Niemytzki operator needs a spatial basis")
    if not math.isclose(es.length, grid.length, rel_tol=1e-12):
        raise InvalidArgument("quadrature interval and domain length differ")
    phi = es.eigenfunctions(grid.nodes)
    dphi = es.eigenfunction_derivatives(grid.nodes)
    wphi_t = (phi * grid.weights).T.copy()
    for a in (phi, dphi, wphi_t):
        a.setflags(write=False)
    return Realization(grid.nodes, grid.weights, phi, dphi, wphi_t)


def niemytzki_coefficients(model: NonlinearityModel, coeffs: np.ndarray, real: Realization) -> np.ndarray:
    """Batched Niemytzki operator on coefficient rows, shape ``(..., n_modes)``."""
    u = real.synthesize(coeffs)
    y = real.synthesize_gradient(coeffs) if model.uses_gradient else 0.0
    values = model.eval(real.nodes, u, y)
    return real.analyze(np.broadcast_to(values, u.shape))


def apply_niemytzki(
    model: NonlinearityModel, u: SpectralState, es: EigenSystem, grid: QuadratureGrid
) -> SpectralState:
    real = realization(es, grid)
    if len(u) != es.n_modes:
        raise InvalidArgument("state size does not match the eigen system")
    return SpectralState(niemytzki_coefficients(model, u.coefficients, real))


def operator_bound(model: NonlinearityModel, es: EigenSystem) -> float:
    """Bound on ``|F(u)|`` in H implied by ``|f| <= m``: ``m * sqrt(|Omega|)``."""
    if es.basis == ANALYTIC_SINE:
        return model.bound_m * math.sqrt(es.length)
    return model.bound_m


# --- hypothesis checks -----------------------------------------------------

@dataclass(frozen=True)
class LinearizationReport:
    nu: float
    max_deviation: float
    max_abs_f0: float
    max_abs_dyf: float
    witness_x: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.max_deviation, self.max_abs_f0, self.max_abs_dyf) <= self.tolerance


def estimate_linearization(
    model: NonlinearityModel,
    grid: QuadratureGrid,
    fd_step: float = FD_STEP,
    tolerance: float = E4_TOLERANCE,
) -> tuple[float, LinearizationReport]:
    """Central-difference estimate of the common slope ``D_s f(x, 0, 0)``.

    Raises ``HypothesisViolated("E4")`` when the slope depends on x, or when
    ``f(x, 0, 0)`` or ``D_y f(x, 0, 0)`` is not zero, beyond ``tolerance``.
    """
    x = np.asarray(grid.nodes)
    zero_ = np.zeros_like(x)
    h = fd_step
    ds = (model(x, zero_ + h, zero_) - model(x, zero_ - h, zero_)) / (2 * h)
    dy = (model(x, zero_, zero_ + h) - model(x, zero_, zero_ - h)) / (2 * h)
    f0 = model(x, zero_, zero_)
    nu = float(np.mean(ds))
    dev = np.abs(ds - nu)
    worst = int(np.argmax(np.maximum.reduce([dev, np.abs(f0), np.abs(dy)])))
    report = LinearizationReport(
        nu=nu,
        max_deviation=float(dev.max()),
        max_abs_f0=float(np.abs(f0).max()),
        max_abs_dyf=float(np.abs(dy).max()),
        witness_x=float(x[worst]),
        tolerance=tolerance,
    )
    if not report.passed:
        raise HypothesisViolated(
            "E4",
            f"{model.label}: linearization at 0 is not a constant multiple of the identity "
            f"(slope spread {report.max_deviation:.3g}, |f(x,0,0)| {report.max_abs_f0:.3g}, "
            f"|D_y f| {report.max_abs_dyf:.3g})",
            {"x": report.witness_x, "nu_mean": nu},
        )
    return nu, report


@dataclass(frozen=True)
class SampleSpec:
    """Sampling box for pointwise checks on ``f``: a dense s-grid plus heavy tails."""

    length: float = math.pi
    s_max: float = 50.0
    y_max: float = 10.0
    n_x: int = 33
    n_s: int = 2001
    n_y: int = 5
    tail_max: float = 1e8
    n_tail: int = 40

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.linspace(0.0, self.length, self.n_x)
        tail = np.logspace(math.log10(self.s_max), math.log10(self.tail_max), self.n_tail)
        s = np.unique(np.concatenate([np.linspace(-self.s_max, self.s_max, self.n_s), tail, -tail]))
        y = np.linspace(-self.y_max, self.y_max, self.n_y)
        X, S, Y = np.meshgrid(x, s, y, indexing="ij")
        return X.ravel(), S.ravel(), Y.ravel()


@dataclass(frozen=True)
class BoundReport:
    bound_m: float
    max_abs: float
    passed: bool
    witness: dict


def verify_bound(model: NonlinearityModel, sample_spec: SampleSpec | None = None) -> BoundReport:
    spec = sample_spec or SampleSpec()
    x, s, y = spec.points()
    vals = np.abs(model(x, s, y))
    i = int(np.argmax(vals))
    max_abs = float(vals[i])
    passed = bool(np.all(np.isfinite(vals))) and max_abs <= model.bound_m * (1 + 1e-12) + 1e-300
    if passed:
        witness = {"x": float(x[i]), "s": float(s[i]), "y": float(y[i]), "f": max_abs}
    else:
        # smallest |s| that breaks the bound
        bad = np.flatnonzero(~(vals <= model.bound_m * (1 + 1e-12)))
        j = int(bad[np.argmin(np.abs(s[bad]))])
        witness = {"x": float(x[j]), "s": float(s[j]), "y": float(y[j]), "f": float(vals[j])}
    return BoundReport(model.bound_m, max_abs, passed, witness)
