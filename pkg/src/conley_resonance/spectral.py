"""Diagonal model of the sectorial operator and its resonant splitting.

The operator is represented by its eigenpairs.  A state is a coefficient
vector in the (L2-orthonormal) eigenbasis, so inner products in H are plain
dot products of coefficients and every spectral projection is a mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import IllPosedBackwardFlow, InvalidArgument, InvalidOperator, UnsupportedRealization

ANALYTIC_SINE = "analytic_sine"
ABSTRACT = "abstract"

PARTS = ("P", "Qplus", "Qminus", "Q")


@dataclass(frozen=True)
class EigenSystem:
    """Ascending distinct eigenvalues with multiplicities.

    ``basis`` is either ``ANALYTIC_SINE`` (Dirichlet sine modes on
    ``(0, length)``) or ``ABSTRACT`` (no spatial realization).
    """

    distinct_eigenvalues: tuple[float, ...]
    multiplicities: tuple[int, ...]
    basis: str = ABSTRACT
    length: float | None = None

    def __post_init__(self):
        lam = tuple(float(v) for v in self.distinct_eigenvalues)
        mult = tuple(int(m) for m in self.multiplicities)
        object.__setattr__(self, "distinct_eigenvalues", lam)
        object.__setattr__(self, "multiplicities", mult)
        if not lam:
            raise InvalidArgument("an eigen system needs at least one eigenvalue")
        if len(lam) != len(mult):
            raise InvalidArgument("eigenvalues and multiplicities differ in length")
        if any(not math.isfinite(v) for v in lam):
            raise InvalidArgument("eigenvalues must be finite")
        if any(b <= a for a, b in zip(lam, lam[1:])):
            raise InvalidArgument("distinct eigenvalues must be strictly increasing")
        if any(m < 1 for m in mult):
            raise InvalidArgument("multiplicities must be positive")
        if self.basis not in (ANALYTIC_SINE, ABSTRACT):
            raise InvalidArgument(f"unknown basis {self.basis!r}")
        if self.basis == ANALYTIC_SINE:
            if self.length is None or not self.length > 0:
                raise InvalidArgument("sine basis needs a positive domain length")
            if lam[0] <= 0:
                raise InvalidArgument("Dirichlet spectrum must be positive")
            if any(m != 1 for m in mult):
                raise InvalidArgument("sine modes are simple")

    @classmethod
    def abstract(cls, eigenvalues: Iterable[float], multiplicities: Iterable[int] | None = None):
        lam = tuple(eigenvalues)
        mult = tuple(multiplicities) if multiplicities is not None else (1,) * len(lam)
        return cls(lam, mult, ABSTRACT, None)

    @property
    def n_modes(self) -> int:
        return sum(self.multiplicities)

    @property
    def n_levels(self) -> int:
        return len(self.distinct_eigenvalues)

    @cached_property
    def mode_eigenvalues(self) -> np.ndarray:
        """Eigenvalue of each retained mode, nondecreasing."""
        out = np.repeat(np.array(self.distinct_eigenvalues), self.multiplicities)
        out.setflags(write=False)
        return out

    @cached_property
    def mode_levels(self) -> np.ndarray:
        """Index into ``distinct_eigenvalues`` for each mode."""
        out = np.repeat(np.arange(self.n_levels), self.multiplicities)
        out.setflags(write=False)
        return out

    @property
    def modes(self) -> list[tuple[float, int]]:
        # sine modes are identified by their wave number j (phi_j); abstract
        # modes by their position
        ids = range(1, self.n_modes + 1)
        return [(float(v), j) for v, j in zip(self.mode_eigenvalues, ids)]

    @property
    def wave_numbers(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1, dtype=float)

    def eigenfunctions(self, x: np.ndarray) -> np.ndarray:
        """Values ``phi_j(x)``, shape ``(n_modes, len(x))``."""
        self._require_sine()
        x = np.asarray(x, dtype=float)
        k = self.wave_numbers[:, None] * (np.pi / self.length)
        return math.sqrt(2.0 / self.length) * np.sin(k * x[None, :])

    def eigenfunction_derivatives(self, x: np.ndarray) -> np.ndarray:
        self._require_sine()
        x = np.asarray(x, dtype=float)
        k = self.wave_numbers[:, None] * (np.pi / self.length)
        return math.sqrt(2.0 / self.length) * k * np.cos(k * x[None, :])

    def _require_sine(self):
        if self.basis != ANALYTIC_SINE:
            raise UnsupportedRealization("abstract eigen systems have no spatial realization")


def build_laplacian_1d(n_modes: int, length: float) -> EigenSystem:
    """Dirichlet ``-d^2/dx^2`` on ``(0, length)`` truncated to ``n_modes`` modes."""
    if not isinstance(n_modes, (int, np.integer)) or n_modes < 1:
        raise InvalidArgument(f"n_modes must be a positive integer, got {n_modes!r}")
    if not length > 0:
        raise InvalidArgument(f"length must be positive, got {length!r}")
    j = np.arange(1, int(n_modes) + 1, dtype=float)
    lam = (j * np.pi / float(length)) ** 2
    return EigenSystem(tuple(lam), (1,) * int(n_modes), ANALYTIC_SINE, float(length))


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Coordinates of a Galerkin state in the eigenbasis."""

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float).ravel()
        if not np.all(np.isfinite(c)):
            raise InvalidArgument("state coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def zeros(cls, n_modes: int) -> "SpectralState":
        return cls(np.zeros(n_modes))

    @classmethod
    def mode(cls, n_modes: int, index: int, scale: float = 1.0) -> "SpectralState":
        """``scale`` times the basis vector at 0-based position ``index``."""
        c = np.zeros(n_modes)
        c[index] = scale
        return cls(c)

    def __len__(self) -> int:
        return self.coefficients.size

    def __add__(self, other: "SpectralState") -> "SpectralState":
        _same_size(self, other)
        return SpectralState(self.coefficients + other.coefficients)

    def __sub__(self, other: "SpectralState") -> "SpectralState":
        _same_size(self, other)
        return SpectralState(self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> "SpectralState":
        return SpectralState(self.coefficients * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralState":
        return SpectralState(-self.coefficients)

    def dot(self, other: "SpectralState") -> float:
        _same_size(self, other)
        return float(self.coefficients @ other.coefficients)

    def h_norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def allclose(self, other: "SpectralState", atol: float = 1e-12) -> bool:
        return len(self) == len(other) and bool(
            np.allclose(self.coefficients, other.coefficients, rtol=0.0, atol=atol)
        )


def _same_size(a: SpectralState, b: SpectralState):
    if len(a) != len(b):
        raise InvalidArgument(f"state sizes differ: {len(a)} vs {len(b)}")


@dataclass(frozen=True)
class Decomposition:
    """Splitting of the modes into kernel, lower and upper parts around ``lambda_k``."""

    k: int
    lam: float
    idx0: tuple[int, ...]
    idx_minus: tuple[int, ...]
    idx_plus: tuple[int, ...]
    dim_X0: int
    dim_Xminus: int
    d_k: int
    d_km1: int
    spectral_gap_c: float
    n_modes: int

    @cached_property
    def masks(self) -> dict[str, np.ndarray]:
        out = {}
        for name, idx in (("P", self.idx0), ("Qminus", self.idx_minus), ("Qplus", self.idx_plus)):
            m = np.zeros(self.n_modes, dtype=bool)
            m[list(idx)] = True
            m.setflags(write=False)
            out[name] = m
        q = out["Qminus"] | out["Qplus"]
        q.setflags(write=False)
        out["Q"] = q
        return out

    @property
    def dim_Xplus(self) -> int:
        return len(self.idx_plus)


def decompose(es: EigenSystem, k: int) -> Decomposition:
    """Split the modes of ``es`` at the resonant level ``k`` (1-based)."""
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= es.n_levels:
        raise InvalidArgument(f"k must lie in 1..{es.n_levels}, got {k!r}")
    k = int(k)
    levels = es.mode_levels
    idx0 = tuple(int(i) for i in np.flatnonzero(levels == k - 1))
    idx_minus = tuple(int(i) for i in np.flatnonzero(levels < k - 1))
    idx_plus = tuple(int(i) for i in np.flatnonzero(levels > k - 1))
    mult = es.multiplicities
    d_k = sum(mult[:k])
    d_km1 = sum(mult[: k - 1])
    lam = es.distinct_eigenvalues
    gaps = []
    if k >= 2:
        gaps.append(lam[k - 1] - lam[k - 2])
    if k < es.n_levels:
        gaps.append(lam[k] - lam[k - 1])
    gap = min(gaps) if gaps else math.inf
    return Decomposition(
        k=k,
        lam=lam[k - 1],
        idx0=idx0,
        idx_minus=idx_minus,
        idx_plus=idx_plus,
        dim_X0=len(idx0),
        dim_Xminus=len(idx_minus),
        d_k=d_k,
        d_km1=d_km1,
        spectral_gap_c=gap,
        n_modes=es.n_modes,
    )


@dataclass(frozen=True)
class ConstantsBundle:
    alpha: float
    delta: float = 0.0
    M: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not 0.75 < self.alpha < 1.0:
            raise InvalidArgument(f"alpha must lie in (3/4, 1), got {self.alpha}")
        if self.delta < 0:
            raise InvalidArgument("delta must be nonnegative")
        if self.M < 1:
            raise InvalidArgument("M must be at least 1")
        if not self.c > 0:
            raise InvalidArgument("decay rate c must be positive")

    @classmethod
    def for_decomposition(cls, d: Decomposition, alpha: float = 0.8, delta: float = 0.0):
        # exact constants for a diagonal self-adjoint operator
        return cls(alpha=alpha, delta=delta, M=1.0, c=d.spectral_gap_c)


def project(u: SpectralState, d: Decomposition, part: str) -> SpectralState:
    if part not in PARTS:
        raise InvalidArgument(f"part must be one of {PARTS}, got {part!r}")
    if len(u) != d.n_modes:
        raise InvalidArgument(f"state has {len(u)} modes, decomposition {d.n_modes}")
    return SpectralState(np.where(d.masks[part], u.coefficients, 0.0))


def fractional_weights(es: EigenSystem, alpha: float, delta: float = 0.0) -> np.ndarray:
    """Diagonal of ``(A + delta)^alpha``."""
    shifted = es.mode_eigenvalues + delta
    if shifted[0] <= 0:
        raise InvalidOperator(
            f"A + delta is not positive definite (lambda_1 + delta = {shifted[0]:g})"
        )
    return shifted**alpha


def fractional_norm(u: SpectralState, es: EigenSystem, cb: ConstantsBundle) -> float:
    w = fractional_weights(es, cb.alpha, cb.delta)
    if len(u) != w.size:
        raise InvalidArgument("state size does not match the eigen system")
    return float(np.linalg.norm(w * u.coefficients))


def embedding_constants(es: EigenSystem, d: Decomposition, cb: ConstantsBundle) -> tuple[float, float]:
    """``(C, C')`` with ``|x| <= C |x|_alpha`` on X and ``|x|_alpha <= C'|x|`` on X-."""
    w = fractional_weights(es, cb.alpha, cb.delta)
    c_embed = float(np.max(1.0 / w))
    c_minus = float(np.max(w[list(d.idx_minus)])) if d.idx_minus else 0.0
    return c_embed, c_minus


def semigroup_factors(es: EigenSystem, lam: float, t: float) -> np.ndarray:
    return np.exp((lam - es.mode_eigenvalues) * t)


def shifted_semigroup_apply(
    u: SpectralState, t: float, lam: float, es: EigenSystem
) -> SpectralState:
    """Apply ``e^{lam t} S_A(t)`` mode-wise.

    Negative times are only defined on modes with eigenvalue at most ``lam``,
    where the semigroup extends to a group.
    """
    if len(u) != es.n_modes:
        raise InvalidArgument("state size does not match the eigen system")
    if t < 0:
        upper = es.mode_eigenvalues > lam
        if np.any(u.coefficients[upper] != 0.0):
            raise IllPosedBackwardFlow(
                "backward flow requested on modes above the resonant eigenvalue"
            )
        # the upper factors overflow and multiply zeros; skip them
        out = np.zeros(es.n_modes)
        out[~upper] = np.exp((lam - es.mode_eigenvalues[~upper]) * t) * u.coefficients[~upper]
        return SpectralState(out)
    return SpectralState(semigroup_factors(es, lam, t) * u.coefficients)
