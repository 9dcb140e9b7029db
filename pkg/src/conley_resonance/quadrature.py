"""Composite Gauss-Legendre rules on an interval."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidArgument


@dataclass(frozen=True)
class QuadratureGrid:
    """Composite Gauss-Legendre rule with ``panels`` equal panels of ``order`` nodes."""

    length: float
    order: int = 8
    panels: int = 32

    def __post_init__(self):
        if not self.length > 0:
            raise InvalidArgument("quadrature interval must have positive length")
        if self.order < 1 or self.panels < 1:
            raise InvalidArgument("order and panels must be positive")

    @property
    def rule(self) -> tuple[str, int, int]:
        return ("COMPOSITE_GAUSS", self.order, self.panels)

    @cached_property
    def _nodes_weights(self) -> tuple[np.ndarray, np.ndarray]:
        xg, wg = np.polynomial.legendre.leggauss(self.order)
        h = self.length / self.panels
        left = h * np.arange(self.panels)
        nodes = (left[:, None] + 0.5 * h * (xg[None, :] + 1.0)).ravel()
        weights = np.tile(0.5 * h * wg, self.panels)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        return nodes, weights

    @property
    def nodes(self) -> np.ndarray:
        return self._nodes_weights[0]

    @property
    def weights(self) -> np.ndarray:
        return self._nodes_weights[1]

    @property
    def size(self) -> int:
        return self.order * self.panels

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integrate samples at the nodes along the last axis."""
        return np.asarray(values) @ self.weights

    def refined(self, factor: int = 2) -> "QuadratureGrid":
        return QuadratureGrid(self.length, self.order, self.panels * factor)


def default_grid(length: float, n_modes: int = 1) -> QuadratureGrid:
    # keep at least one panel per half-wave of the highest product mode
    # sin(j x) sin(k x) with j, k <= n_modes
    panels = max(32, 2 * n_modes)
    return QuadratureGrid(float(length), 8, int(panels))
