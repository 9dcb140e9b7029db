"""Symbolic pointed homotopy types: the zero type and finite wedges of spheres."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class HomotopyType:
    """Wedge of spheres, stored as the sorted tuple of sphere dimensions.

    The empty wedge is the zero type, so ``HomotopyType(())`` is ``ZERO``.
    Equality of instances is equality of the normalized multisets.
    """

    dims: tuple[int, ...] = ()

    def __post_init__(self):
        dims = tuple(sorted(int(d) for d in self.dims))
        if any(d < 0 for d in dims):
            raise ValueError("sphere dimensions must be nonnegative")
        object.__setattr__(self, "dims", dims)

    @property
    def is_zero(self) -> bool:
        return not self.dims

    def __str__(self) -> str:
        if self.is_zero:
            return "0"
        return " v ".join(f"Sigma^{d}" for d in self.dims)

    def __repr__(self) -> str:
        return f"HomotopyType({str(self)!r})"


ZERO = HomotopyType(())


def sphere(d: int) -> HomotopyType:
    return HomotopyType((d,))


def wedge_of(dims: Iterable[int]) -> HomotopyType:
    return HomotopyType(tuple(dims))


def wedge(h1: HomotopyType, h2: HomotopyType) -> HomotopyType:
    return HomotopyType(h1.dims + h2.dims)


def smash(h1: HomotopyType, h2: HomotopyType) -> HomotopyType:
    # Sigma^a ^ Sigma^b = Sigma^(a+b), distributed over the wedge summands
    return HomotopyType(tuple(a + b for a in h1.dims for b in h2.dims))


def equal(h1: HomotopyType, h2: HomotopyType) -> bool:
    return h1.dims == h2.dims


_SUMMAND = re.compile(r"^Sigma\^(\d+)$")


def parse(text: str) -> HomotopyType:
    """Inverse of ``str``: ``"0"``, ``"Sigma^2"``, ``"Sigma^1 v Sigma^2"``."""
    text = text.strip()
    if text == "0":
        return ZERO
    dims = []
    for part in text.split(" v "):
        m = _SUMMAND.match(part.strip())
        if m is None:
            raise ValueError(f"cannot parse homotopy type {text!r}")
        dims.append(int(m.group(1)))
    return HomotopyType(tuple(dims))
