"""Predicted Conley indices, the connecting-orbit criterion and sampled block checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conditions import (
    G_CONDITIONS,
    TOLERANCE,
    ConditionVerdict,
    IsolatingNeighborhood,
    sample_alpha_ball,
)
from .errors import BlockVerificationFailed, Inapplicable, InvalidArgument, NonhyperbolicOrigin
from .homotopy import HomotopyType, equal, smash, sphere
from .nonlinearity import NonlinearityModel, realization
from .quadrature import QuadratureGrid
from .semiflow import IntegratorConfig, boundary_derivatives, integrate_bounded
from .spectral import ConstantsBundle, Decomposition, EigenSystem, decompose, fractional_weights

HYPERBOLICITY_TOL = 1e-9

# sign conditions that imply the geometric ones
_LIFTS = {"LL1": "G1", "LL2": "G2", "SR1": "G1", "SR2": "G2"}


def lift_to_G(verdict: ConditionVerdict) -> ConditionVerdict:
    """Turn a held LL/SR verdict into the G-verdict it implies, recording the source."""
    if verdict.family == "G":
        return verdict
    if not verdict.holds or verdict.condition not in _LIFTS:
        raise Inapplicable(f"verdict {verdict.condition!r} (holds={verdict.holds}) implies no G-condition")
    return ConditionVerdict(
        family="G",
        condition=_LIFTS[verdict.condition],
        holds=True,
        witnesses=verdict.witnesses,
        radius_R=None,
        tolerance=verdict.tolerance,
        margin=verdict.margin,
        sample_count=verdict.sample_count,
        notes=verdict.notes + (f"lifted from {verdict.condition}",),
    )


def index_of_bounded_invariant_set(d: Decomposition, verdict: ConditionVerdict) -> HomotopyType:
    if verdict.family != "G" or verdict.condition not in G_CONDITIONS or not verdict.holds:
        raise Inapplicable("the index of K needs a held G1 or G2 verdict")
    return sphere(d.d_k if verdict.condition == "G1" else d.d_km1)


def _check_hyperbolic(es: EigenSystem, mu: float, tol: float):
    lam = np.asarray(es.distinct_eigenvalues)
    close = np.flatnonzero(np.abs(lam - mu) <= tol)
    if close.size:
        raise NonhyperbolicOrigin(
            f"lambda + nu = {mu:g} coincides with eigenvalue lambda_{int(close[0]) + 1} = {lam[close[0]]:g}"
        )


def index_of_origin(es: EigenSystem, lam: float, nu: float, tol: float = HYPERBOLICITY_TOL) -> HomotopyType:
    """``Sigma^b`` with ``b`` the number of modes (with multiplicity) below ``lam + nu``."""
    mu = lam + nu
    _check_hyperbolic(es, mu, tol)
    return sphere(int(np.sum(es.mode_eigenvalues < mu)))


@dataclass(frozen=True)
class CriterionDecision:
    existence: str  # "EXISTS" or "INCONCLUSIVE"
    case: str | None
    condition: str
    provenance: str
    h_K: HomotopyType
    h_0: HomotopyType
    lam: float
    nu: float
    level_l: int
    failed_hypothesis: str | None = None


def _failed(cond, prov, h_K, h_0, lam, nu, l, why):
    return CriterionDecision("INCONCLUSIVE", None, cond, prov, h_K, h_0, lam, nu, l, why)


def connecting_orbit_criterion(
    es: EigenSystem, k: int, nu: float, verdict: ConditionVerdict, tol: float = HYPERBOLICITY_TOL
) -> CriterionDecision:
    """Match the four index-comparison cases literally.

    With ``lambda = lambda_k`` and ``mu = lambda + nu`` lying strictly between
    consecutive distinct eigenvalues ``lambda_l < mu < lambda_{l+1}`` (``l = 0``
    when ``mu < lambda_1``):

    * (i)   G1, ``l >= 1`` and ``lambda_l != lambda``
    * (ii)  G1, ``l = 0``
    * (iii) G2, ``l >= 1`` and ``lambda_{l+1} != lambda``
    * (iv)  G2, ``l = 0`` and ``lambda != lambda_1``

    The truncated spectrum stands for the full one, so ``mu`` above the
    largest retained eigenvalue still has an upper neighbour.
    """
    g = lift_to_G(verdict)
    provenance = g.notes[-1] if g.notes and g.notes[-1].startswith("lifted") else "direct G check"
    d = decompose(es, k)
    lam = d.lam
    mu = lam + nu
    h_0 = index_of_origin(es, lam, nu, tol)
    h_K = index_of_bounded_invariant_set(d, g)
    levels = np.asarray(es.distinct_eigenvalues)
    l = int(np.sum(levels < mu))  # 1-based index of the level just below mu
    cond = g.condition
    args = (cond, provenance, h_K, h_0, lam, nu, l)
    if cond == "G1":
        if l == 0:
            case = "ii"
        elif l != k:
            case = "i"
        else:
            return _failed(*args, "lambda_l != lambda")
    else:
        if l == 0:
            if k == 1:
                return _failed(*args, "lambda != lambda_1")
            case = "iv"
        elif l + 1 != k:
            case = "iii"
        else:
            return _failed(*args, "lambda != lambda_l")
    if equal(h_K, h_0):
        return _failed(*args, "h(K) != h(0)")
    return CriterionDecision("EXISTS", case, cond, provenance, h_K, h_0, lam, nu, l)


# --- sampled checks of the proof ingredients ---------------------------------

@dataclass(frozen=True)
class BlockReport:
    exit_set: str  # "FULL_BOUNDARY" or "EMPTY"
    margin: float
    min_derivative: float
    max_derivative: float
    n_samples: int
    s_values: tuple[float, ...]
    R_P: float


def boundary_samples(
    es: EigenSystem,
    d: Decomposition,
    R_P: float,
    n: int,
    rng: np.random.Generator,
    R_Q: float = 0.0,
    cb: ConstantsBundle | None = None,
) -> np.ndarray:
    """Points with ``|Pu| = R_P`` exactly and ``Qu`` uniform in the alpha-ball of radius ``R_Q``."""
    cb = cb or ConstantsBundle.for_decomposition(d)
    C = sample_alpha_ball(es, d, cb.alpha, cb.delta, R_Q, n, rng)
    p = list(d.idx0)
    if len(p) == 1:
        C[:, p[0]] = R_P * np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    else:
        w = rng.standard_normal((n, len(p)))
        C[:, p] = R_P * w / np.linalg.norm(w, axis=1, keepdims=True)
    return C


def verify_isolating_block(
    model: NonlinearityModel,
    es: EigenSystem,
    d: Decomposition,
    s_values,
    R_P: float,
    n_boundary_samples: int,
    grid: QuadratureGrid,
    R_Q: float = 0.0,
    expected: str | None = None,
    cb: ConstantsBundle | None = None,
    rng_seed: int = 0,
    tolerance: float = TOLERANCE,
) -> BlockReport:
    """Sign of ``d/dt |Pu|^2`` on sampled points of ``N1 x dN2`` for every ``s``.

    A uniformly positive sign makes the whole kernel sphere the exit set,
    a uniformly negative one makes it empty.  ``expected`` (``"G1"``/``"G2"``)
    pins the sign the verdict predicts.
    """
    if expected not in (None, "G1", "G2"):
        raise InvalidArgument("expected must be G1, G2 or None")
    rng = np.random.default_rng(rng_seed)
    C = boundary_samples(es, d, R_P, n_boundary_samples, rng, R_Q, cb)
    real = realization(es, grid)
    s_values = tuple(float(s) for s in s_values)
    vals = np.array([boundary_derivatives(model, d, s, C, real) for s in s_values])
    pos = bool(np.all(vals > tolerance))
    neg = bool(np.all(vals < -tolerance))
    if (expected == "G1" and not pos) or (expected == "G2" and not neg) or not (pos or neg):
        bad = vals <= tolerance if (expected == "G1" or (expected is None and vals.max() > 0)) else vals >= -tolerance
        witnesses = []
        for si, ci in zip(*np.nonzero(bad)):
            witnesses.append({"s": s_values[si], "state": C[ci].tolist(), "derivative": float(vals[si, ci])})
            if len(witnesses) >= 8:
                break
        raise BlockVerificationFailed(
            f"boundary derivative ranges over [{vals.min():.4g}, {vals.max():.4g}]: no uniform sign",
            witnesses,
        )
    return BlockReport(
        exit_set="FULL_BOUNDARY" if pos else "EMPTY",
        margin=float(np.min(np.abs(vals))),
        min_derivative=float(vals.min()),
        max_derivative=float(vals.max()),
        n_samples=int(vals.size),
        s_values=s_values,
        R_P=float(R_P),
    )


@dataclass(frozen=True)
class LinearIndexReport:
    index: HomotopyType
    growing: tuple[int, ...]
    decaying: tuple[int, ...]
    neutral: tuple[int, ...]
    horizon_T: float
    consistent: bool
    min_growth: float
    max_decay: float


def linear_index_check(
    es: EigenSystem, d: Decomposition, lam: float, horizon_T: float = 1.0
) -> tuple[HomotopyType, LinearIndexReport]:
    """Index of the origin for the linear flow on the Q-part: ``Sigma^{dim X-}``.

    Confirms that ``exp((lam - lambda_i) T) > 1`` exactly on the lower modes and
    ``< 1`` exactly on the upper ones.
    """
    if not horizon_T > 0:
        raise InvalidArgument("horizon must be positive")
    factors = np.exp((lam - es.mode_eigenvalues) * horizon_T)
    q = np.flatnonzero(d.masks["Q"])
    growing = tuple(int(i) for i in q if factors[i] > 1.0)
    decaying = tuple(int(i) for i in q if factors[i] < 1.0)
    neutral = tuple(int(i) for i in q if factors[i] == 1.0)
    consistent = growing == d.idx_minus and decaying == d.idx_plus and not neutral
    report = LinearIndexReport(
        index=sphere(len(growing)),
        growing=growing,
        decaying=decaying,
        neutral=neutral,
        horizon_T=float(horizon_T),
        consistent=consistent,
        min_growth=float(factors[list(growing)].min()) if growing else float("nan"),
        max_decay=float(factors[list(decaying)].max()) if decaying else float("nan"),
    )
    return sphere(d.dim_Xminus), report


def assembled_index(es: EigenSystem, d: Decomposition, condition: str) -> HomotopyType:
    """Index of K assembled as (linear Q-part index) smash (kernel-flow index).

    The kernel flow contributes ``Sigma^{dim X0}`` when the kernel sphere is
    the exit set and ``Sigma^0`` when it is entered.
    """
    linear, _ = linear_index_check(es, d, d.lam)
    kernel = sphere(d.dim_X0) if condition == "G1" else sphere(0)
    return smash(linear, kernel)


@dataclass(frozen=True)
class ContinuationReport:
    """Trajectories from ``shrink * N`` followed for every ``s``.

    ``q_exits`` counts runs whose Q-part left ``N1`` (never allowed);
    ``p_exits`` counts runs that crossed the kernel sphere, which is allowed
    only when it is the exit set.
    """

    s_values: tuple[float, ...]
    n_starts: int
    q_exits: dict = field(default_factory=dict)
    p_exits: dict = field(default_factory=dict)
    max_q_alpha: dict = field(default_factory=dict)
    exit_set: str = "FULL_BOUNDARY"

    @property
    def passed(self) -> bool:
        if any(self.q_exits.values()):
            return False
        return self.exit_set == "FULL_BOUNDARY" or not any(self.p_exits.values())


def continuation_check(
    model: NonlinearityModel,
    es: EigenSystem,
    N: IsolatingNeighborhood,
    s_values,
    n_starts: int,
    cfg: IntegratorConfig,
    grid: QuadratureGrid,
    exit_set: str,
    rng_seed: int = 0,
    shrink: float = 0.9,
) -> ContinuationReport:
    """No trajectory started in ``shrink * N`` may touch the Q-boundary of N.

    The unstable coordinates are re-chosen by bounded tracking, since a plain
    forward run along them leaves every bounded set.
    """
    d = N.decomposition
    w = fractional_weights(es, N.constants.alpha, N.constants.delta)
    q, p = d.masks["Q"], d.masks["P"]
    q_exits, p_exits, max_q = {}, {}, {}
    for s in s_values:
        C0 = N.sample(es, n_starts, np.random.default_rng(rng_seed), shrink)
        run = integrate_bounded(model, es, d, d.lam, float(s), C0, cfg, grid)
        qn = np.linalg.norm(run.states[:, :, q] * w[q], axis=-1)
        pn = np.linalg.norm(run.states[:, :, p], axis=-1)
        q_exits[float(s)] = int(np.sum(np.any(qn > N.R_Q, axis=0)))
        p_exits[float(s)] = int(np.sum(np.any(pn > N.R_P, axis=0)))
        max_q[float(s)] = float(qn.max())
    return ContinuationReport(tuple(float(s) for s in s_values), n_starts, q_exits, p_exits, max_q, exit_set)
