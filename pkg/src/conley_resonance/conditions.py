"""Sign conditions on the kernel component of the nonlinearity, and the radii of N.

Everything here is falsifiable sampling evidence: a passing verdict means no
sample contradicted the strict inequality at the sampled resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditionNotVerified, InsufficientMetadata, InvalidArgument
from .nonlinearity import (
    NonlinearityModel,
    SampleSpec,
    niemytzki_coefficients,
    operator_bound,
    realization,
)
from .quadrature import QuadratureGrid
from .spectral import (
    ConstantsBundle,
    Decomposition,
    EigenSystem,
    decompose,
    embedding_constants,
    fractional_weights,
)

TOLERANCE = 1e-9
MAX_WITNESSES = 8

G_CONDITIONS = ("G1", "G2")
LL_CONDITIONS = ("LL1", "LL2")
SR_CONDITIONS = ("SR1", "SR2")


@dataclass(frozen=True)
class ConditionVerdict:
    """Outcome of one sign check.

    ``condition`` is the condition that held (``None`` when neither sign is
    uniform) and ``family`` is ``"G"``, ``"LL"`` or ``"SR"``.  ``witnesses``
    holds ``(point, value)`` pairs: the extreme samples, and the offending
    ones when the check fails.  ``margin`` is the smallest sampled ``|value|``
    for a held condition and 0 otherwise.
    """

    family: str
    condition: str | None
    holds: bool
    witnesses: tuple = ()
    radius_R: float | None = None
    tolerance: float = TOLERANCE
    margin: float = 0.0
    sample_count: int = 0
    notes: tuple[str, ...] = ()
    ball_radius: float | None = None

    def __post_init__(self):
        if self.holds and self.condition is None:
            raise InvalidArgument("a held verdict must name its condition")


def _sign_verdict(family: str, values: np.ndarray, tol: float) -> tuple[str | None, bool, float]:
    pos, neg = f"{family}1", f"{family}2"
    if values.size and np.all(values > tol):
        return pos, True, float(values.min())
    if values.size and np.all(values < -tol):
        return neg, True, float(-values.max())
    return None, False, 0.0


def _witnesses(points: list, values: np.ndarray, condition: str | None, tol: float) -> tuple:
    """Extreme samples, plus the first offending ones when nothing held."""
    idx = [int(np.argmin(values)), int(np.argmax(values))]
    if condition is None:
        near = np.flatnonzero(np.abs(values) <= tol)
        idx += [int(i) for i in near[:MAX_WITNESSES]]
    seen, out = set(), []
    for i in idx:
        if i not in seen:
            seen.add(i)
            out.append((points[i], float(values[i])))
    return tuple(out)


# --- a priori radius --------------------------------------------------------

def apriori_radii(
    m0: float, M: float, c: float, alpha: float, c_minus: float, norm_q_plus: float, norm_q_minus: float
) -> tuple[float, float]:
    """``(upper part, lower part)`` of the bound on ``|Qu(t)|_alpha`` along full solutions.

    The upper part bounds the contribution of the forward-damped modes
    through the smoothing estimate, the lower part the backward-damped ones.
    """
    if not (m0 >= 0 and M >= 1 and c > 0 and 0 < alpha < 1 and c_minus >= 0):
        raise InvalidArgument("degenerate constants for the a priori radius")
    decay = 0.0 if math.isinf(c) else math.exp(-c) / c
    upper = m0 * M * norm_q_plus * (decay + 1.0 / (1.0 - alpha))
    lower = 0.0 if math.isinf(c) else m0 * c_minus * M * norm_q_minus / c
    return upper, lower


def kernel_bound_m0(model: NonlinearityModel, es: EigenSystem, d: Decomposition) -> float:
    """``m0 = m (|P| + |Q|)`` with ``m`` the bound of ``F`` in H; projections have norm 1."""
    norm_p = 1.0 if d.dim_X0 else 0.0
    norm_q = 1.0 if d.dim_Xminus + d.dim_Xplus else 0.0
    return operator_bound(model, es) * (norm_p + norm_q)


def apriori_radius_R1(
    model: NonlinearityModel, es: EigenSystem, d: Decomposition, cb: ConstantsBundle
) -> float:
    _, c_minus = embedding_constants(es, d, cb)
    upper, lower = apriori_radii(
        kernel_bound_m0(model, es, d),
        cb.M,
        cb.c,
        cb.alpha,
        c_minus,
        1.0 if d.dim_Xplus else 0.0,
        1.0 if d.dim_Xminus else 0.0,
    )
    return upper + lower


# --- Landesman-Lazer and strong resonance ------------------------------------

def _kernel_sphere(dim: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    g = rng.standard_normal((max(1, n_samples // 2), dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return np.concatenate([g, -g])


def check_landesman_lazer(
    model: NonlinearityModel,
    es: EigenSystem,
    k: int,
    grid: QuadratureGrid,
    n_sphere_samples: int = 64,
    tolerance: float = TOLERANCE,
    rng_seed: int = 0,
) -> ConditionVerdict:
    """Sign of ``int_{v>0} f+ v + int_{v<0} f- v`` over unit kernel vectors ``v``."""
    if model.limits is None:
        raise InsufficientMetadata(f"{model.label} does not declare its limits at +-infinity")
    d = decompose(es, k)
    real = realization(es, grid)
    omegas = _kernel_sphere(d.dim_X0, n_sphere_samples, np.random.default_rng(rng_seed))
    coeffs = np.zeros((omegas.shape[0], es.n_modes))
    coeffs[:, list(d.idx0)] = omegas
    v = real.synthesize(coeffs)
    f_plus, f_minus = (np.broadcast_to(np.asarray(p(real.nodes), float), real.nodes.shape) for p in model.limits)
    integrand = np.where(v > 0, f_plus * v, 0.0) + np.where(v < 0, f_minus * v, 0.0)
    values = grid.integrate(integrand)
    condition, holds, margin = _sign_verdict("LL", values, tolerance)
    points = [tuple(float(c) for c in o) for o in omegas]
    return ConditionVerdict(
        family="LL",
        condition=condition,
        holds=holds,
        witnesses=_witnesses(points, values, condition, tolerance),
        tolerance=tolerance,
        margin=margin,
        sample_count=values.size,
    )


DIMENSION_NOTE = (
    "the strong-resonance implication to G1/G2 is established for spatial dimension >= 3; "
    "this domain is 1-dimensional, so the lift is a numerical claim only"
)


def check_strong_resonance(
    model: NonlinearityModel,
    es: EigenSystem,
    grid: QuadratureGrid,
    sample_spec: SampleSpec | None = None,
    tolerance: float = TOLERANCE,
) -> ConditionVerdict:
    """Sign of ``int f_inf`` plus a sampled check of ``f s >= h`` (or ``<= h``)."""
    if model.limit_infty is None or model.floor_h is None:
        raise InsufficientMetadata(f"{model.label} declares no strong-resonance limit or floor")
    x = grid.nodes
    integral = float(grid.integrate(np.broadcast_to(np.asarray(model.limit_infty(x), float), x.shape)))
    spec = sample_spec or SampleSpec(length=grid.length)
    xs, ss, ys = spec.points()
    gap = model(xs, ss, ys) * ss - np.asarray(model.floor_h(xs), float)
    floor_ok = bool(np.all(gap >= -tolerance))
    ceiling_ok = bool(np.all(gap <= tolerance))
    condition = None
    if integral > tolerance and floor_ok:
        condition = "SR1"
    elif integral < -tolerance and ceiling_ok:
        condition = "SR2"
    worst = int(np.argmin(gap)) if not floor_ok else int(np.argmax(gap))
    witnesses = (
        ("integral_f_inf", integral),
        ((float(xs[worst]), float(ss[worst]), float(ys[worst])), float(gap[worst])),
    )
    return ConditionVerdict(
        family="SR",
        condition=condition,
        holds=condition is not None,
        witnesses=witnesses,
        tolerance=tolerance,
        margin=abs(integral) if condition else 0.0,
        sample_count=gap.size,
        notes=(DIMENSION_NOTE,),
    )


# --- the geometric condition --------------------------------------------------

@dataclass(frozen=True)
class GSampling:
    n_ball: int = 64
    n_radii: int = 32
    n_directions: int = 2
    radius_span: float = 10.0
    axis_extremes: bool = True


def sample_alpha_ball(
    es: EigenSystem, d: Decomposition, alpha: float, delta: float, radius: float, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform samples of the Q-part ball ``|y|_alpha <= radius``, as coefficient rows."""
    q = np.flatnonzero(d.masks["Q"])
    out = np.zeros((n, es.n_modes))
    if q.size == 0 or n == 0:
        return out
    g = rng.standard_normal((n, q.size))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g *= rng.random((n, 1)) ** (1.0 / q.size)
    w = fractional_weights(es, alpha, delta)[q]
    out[:, q] = radius * g / w
    return out


def alpha_ball_extremes(
    es: EigenSystem, d: Decomposition, alpha: float, delta: float, radius: float
) -> np.ndarray:
    """The points ``+-radius e_i / |e_i|_alpha`` of the Q-part ball.

    Uniform draws in a high-dimensional ball almost never put their mass on
    one low mode, which is where the pairing is most easily pushed off sign.
    """
    q = np.flatnonzero(d.masks["Q"])
    w = fractional_weights(es, alpha, delta)
    out = np.zeros((2 * q.size, es.n_modes))
    for row, i in enumerate(q):
        out[2 * row, i] = radius / w[i]
        out[2 * row + 1, i] = -radius / w[i]
    return out


def g_pairings(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    grid: QuadratureGrid,
    X: np.ndarray,
    Y: np.ndarray,
) -> np.ndarray:
    """``<F(x + y), x>`` for matching rows of kernel points ``X`` and Q-points ``Y``."""
    real = realization(es, grid)
    Fu = niemytzki_coefficients(model, X + Y, real)
    return np.einsum("ij,ij->i", Fu, X)


def check_G_direct(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    grid: QuadratureGrid,
    ball_radius_alpha: float,
    R_candidate: float,
    n_samples: int = 64,
    rng_seed: int = 0,
    tolerance: float = TOLERANCE,
    cb: ConstantsBundle | None = None,
    sampling: GSampling | None = None,
) -> ConditionVerdict:
    """Monte-Carlo check of a uniform sign of ``<F(x + y), x>`` for ``|x| >= R``.

    ``y`` is drawn in the alpha-ball of radius ``ball_radius_alpha`` in the
    Q-part and ``x = r w`` with ``w`` a unit kernel vector and ``r`` on a
    geometric grid in ``[R, radius_span * R]``.  Every ball sample is paired
    with every radius and direction.
    """
    if not R_candidate > 0 or not ball_radius_alpha >= 0:
        raise InvalidArgument("radii must be positive")
    cb = cb or ConstantsBundle.for_decomposition(d)
    smp = sampling or GSampling(n_ball=n_samples)
    rng = np.random.default_rng(rng_seed)
    Y = sample_alpha_ball(es, d, cb.alpha, cb.delta, ball_radius_alpha, smp.n_ball, rng)
    if smp.axis_extremes:
        Y = np.concatenate([Y, alpha_ball_extremes(es, d, cb.alpha, cb.delta, ball_radius_alpha)])
    omegas = _kernel_sphere(d.dim_X0, smp.n_directions, rng)
    radii = np.geomspace(R_candidate, smp.radius_span * R_candidate, smp.n_radii)
    kern = np.zeros((omegas.shape[0], es.n_modes))
    kern[:, list(d.idx0)] = omegas
    # rows ordered (ball sample, radius, direction)
    X = (radii[:, None, None] * kern[None, :, :]).reshape(-1, es.n_modes)
    Xf = np.tile(X, (Y.shape[0], 1))
    Yf = np.repeat(Y, X.shape[0], axis=0)
    values = g_pairings(model, es, d, grid, Xf, Yf)
    condition, holds, margin = _sign_verdict("G", values, tolerance)

    n_x = X.shape[0]
    def point(i):  # noqa: E306
        b, rest = divmod(i, n_x)
        r_i, o_i = divmod(rest, omegas.shape[0])
        return {
            "r": float(radii[r_i]),
            "direction": tuple(float(v) for v in omegas[o_i]),
            "ball_sample": int(b),
            "y_alpha_norm": float(np.linalg.norm(Y[b] * fractional_weights(es, cb.alpha, cb.delta))),
        }

    order = [int(np.argmin(values)), int(np.argmax(values))]
    if condition is None:
        order += [int(i) for i in np.flatnonzero(np.abs(values) <= tolerance)[:MAX_WITNESSES]]
    seen, wit = set(), []
    for i in order:
        if i not in seen:
            seen.add(i)
            wit.append((point(i), float(values[i])))
    return ConditionVerdict(
        family="G",
        condition=condition,
        holds=holds,
        witnesses=tuple(wit),
        radius_R=float(R_candidate),
        tolerance=tolerance,
        margin=margin,
        sample_count=values.size,
        notes=("verified at sampling resolution",) if holds else (),
        ball_radius=float(ball_radius_alpha),
    )


@dataclass(frozen=True)
class SearchSpec:
    r_start: float = 0.125
    factor: float = 2.0
    r_cap: float = 1e4
    n_ball: int = 64
    rng_seed: int = 0
    tolerance: float = TOLERANCE
    # a radius is accepted only if it also passes with this many further seeds
    confirm_seeds: int = 3


@dataclass(frozen=True)
class IsolatingNeighborhood:
    """``N = {|Qu|_alpha <= R_Q} x {|Pu|_H <= R_P}``."""

    R_Q: float
    R_P: float
    R1: float
    condition: str | None
    decomposition: Decomposition
    constants: ConstantsBundle
    verdict: ConditionVerdict | None = field(default=None, compare=False)

    def contains(self, C: np.ndarray, es: EigenSystem) -> np.ndarray:
        """Membership of coefficient rows (broadcast over leading axes)."""
        C = np.asarray(C, dtype=float)
        w = fractional_weights(es, self.constants.alpha, self.constants.delta)
        q = self.decomposition.masks["Q"]
        p = self.decomposition.masks["P"]
        qn = np.linalg.norm(C[..., q] * w[q], axis=-1)
        pn = np.linalg.norm(C[..., p], axis=-1)
        return (qn <= self.R_Q) & (pn <= self.R_P)

    def sample(self, es: EigenSystem, n: int, rng: np.random.Generator, shrink: float = 1.0) -> np.ndarray:
        """Uniform points of ``shrink * N`` (product of the two balls)."""
        d = self.decomposition
        Y = sample_alpha_ball(es, d, self.constants.alpha, self.constants.delta, shrink * self.R_Q, n, rng)
        p = list(d.idx0)
        g = rng.standard_normal((n, len(p)))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        g *= rng.random((n, 1)) ** (1.0 / max(1, len(p)))
        Y[:, p] = shrink * self.R_P * g
        return Y


def search_G_radius(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    grid: QuadratureGrid,
    ball_radius_alpha: float,
    cb: ConstantsBundle,
    search_spec: SearchSpec | None = None,
) -> ConditionVerdict:
    """First passing verdict on the geometric radius grid of ``search_spec``."""
    spec = search_spec or SearchSpec()
    r = spec.r_start
    last = None
    while r <= spec.r_cap * (1 + 1e-12):
        first = None
        for extra in range(spec.confirm_seeds + 1):
            v = check_G_direct(
                model, es, d, grid, ball_radius_alpha, r, n_samples=spec.n_ball,
                rng_seed=spec.rng_seed + extra, tolerance=spec.tolerance, cb=cb,
            )
            if not v.holds or (first is not None and v.condition != first.condition):
                last = v
                break
            first = first or v
        else:
            return first
        r *= spec.factor
    raise ConditionNotVerified(
        f"{model.label}: no radius up to {spec.r_cap:g} gives a uniform sign of <F(x+y), x>"
        + (f" (pairings from {last.witnesses[0][1]:.3g} to {last.witnesses[1][1]:.3g})" if last else "")
    )


def build_isolating_neighborhood(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    cb: ConstantsBundle,
    grid: QuadratureGrid,
    search_spec: SearchSpec | None = None,
) -> IsolatingNeighborhood:
    """``R_Q = R1 + 1`` and the smallest grid radius ``R_P`` where a G-condition passes."""
    r1 = apriori_radius_R1(model, es, d, cb)
    R_Q = r1 + 1.0
    v = search_G_radius(model, es, d, grid, R_Q, cb, search_spec)
    return IsolatingNeighborhood(R_Q, v.radius_R, r1, v.condition, d, cb, v)


def neighborhood_box(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    cb: ConstantsBundle,
    R_P: float,
) -> IsolatingNeighborhood:
    """The product set with ``R_Q = R1 + 1`` and a prescribed ``R_P``, without any sign check.

    Used where no G-condition holds, to ask whether trajectories stay in a
    bounded set at all.
    """
    if not R_P > 0:
        raise InvalidArgument("R_P must be positive")
    r1 = apriori_radius_R1(model, es, d, cb)
    return IsolatingNeighborhood(r1 + 1.0, float(R_P), r1, None, d, cb, None)
