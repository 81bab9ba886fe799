"""Finite abelian groups as products of cyclic factors.

A group Z_{n_1} x ... x Z_{n_k} is described by its factor list.  Elements
and characters are residue vectors of the same shape; both are indexed by
mixed-radix integers in [0, N) so that functions on the group live in flat
dense arrays.

The dual group is identified with the group itself through the
coordinate-wise pairing

    <xi, x> = sum_i xi_i * x_i / n_i   (mod 1),

a rational with denominator L = lcm(n_i).  All pairings are computed as
integer numerators over L, so comparisons against rational thresholds
(Bohr membership, regularity windows) are exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "GroupSpec",
    "Element",
    "Character",
    "add",
    "negate",
    "pairing",
    "pairing_fraction",
    "torus_norm",
    "torus_norm_fraction",
    "translate_mask",
]

_GROUP_NAME_RE = re.compile(r"^Z(\d+)(?:[xX]Z(\d+))*$")


class GroupSpec:
    """A finite abelian group given as a product of cyclic factors.

    Immutable after construction; derived tables (coordinate matrix,
    radix weights) are built once and shared.
    """

    __slots__ = ("factors", "N", "L", "_weights", "_coords")

    def __init__(self, factors: Sequence[int]):
        factors = tuple(int(n) for n in factors)
        if not factors:
            raise ValueError("a group needs at least one cyclic factor")
        if any(n < 1 for n in factors):
            raise ValueError(f"cyclic orders must be >= 1, got {factors}")
        self.factors = factors
        self.N = math.prod(factors)
        self.L = reduce(math.lcm, factors)
        # Mixed-radix weights: index = sum coords[i] * weights[i], last
        # coordinate fastest (row-major).
        weights = [1] * len(factors)
        for i in range(len(factors) - 2, -1, -1):
            weights[i] = weights[i + 1] * factors[i + 1]
        self._weights = tuple(weights)
        coords = np.empty((self.N, len(factors)), dtype=np.int64)
        idx = np.arange(self.N)
        for i, (w, n) in enumerate(zip(weights, factors)):
            coords[:, i] = (idx // w) % n
        coords.setflags(write=False)
        self._coords = coords

    # -- identification -----------------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupSpec) and self.factors == other.factors

    def __hash__(self) -> int:
        return hash(self.factors)

    def __repr__(self) -> str:
        return f"GroupSpec({list(self.factors)})"

    @property
    def name(self) -> str:
        return "x".join(f"Z{n}" for n in self.factors)

    @classmethod
    def parse(cls, text: str) -> "GroupSpec":
        """Parse a specification string like ``Z6xZ4`` or ``Z101``."""
        text = text.strip()
        if not _GROUP_NAME_RE.match(text):
            raise ValueError(f"cannot parse group specification {text!r}")
        return cls([int(part) for part in re.findall(r"\d+", text)])

    def to_json(self) -> dict:
        return {"factors": list(self.factors)}

    @classmethod
    def from_json(cls, data: dict) -> "GroupSpec":
        return cls(data["factors"])

    # -- element indexing ---------------------------------------------------

    def index_of(self, coords: Sequence[int]) -> int:
        if len(coords) != len(self.factors):
            raise ValueError("coordinate shape mismatch")
        return sum((c % n) * w for c, n, w in zip(coords, self.factors, self._weights))

    def coords_of(self, index: int) -> tuple[int, ...]:
        return tuple(int(c) for c in self._coords[index])

    def all_coords(self) -> np.ndarray:
        """Read-only (N, k) matrix of all element coordinate vectors."""
        return self._coords

    def element(self, coords: Sequence[int]) -> "Element":
        return Element(self, tuple(c % n for c, n in zip(coords, self.factors)))

    def character(self, coords: Sequence[int]) -> "Character":
        return Character(self, tuple(c % n for c, n in zip(coords, self.factors)))

    def element_by_index(self, index: int) -> "Element":
        return Element(self, self.coords_of(index))

    def character_by_index(self, index: int) -> "Character":
        return Character(self, self.coords_of(index))

    def elements(self) -> Iterator["Element"]:
        for i in range(self.N):
            yield self.element_by_index(i)

    def zero(self) -> "Element":
        return Element(self, (0,) * len(self.factors))

    # -- group law on indices ------------------------------------------------

    def add_indices(self, i: int, j: int) -> int:
        a, b = self._coords[i], self._coords[j]
        return int(np.dot((a + b) % self.factors, self._weights))

    def negate_index(self, i: int) -> int:
        a = self._coords[i]
        return int(np.dot((-a) % self.factors, self._weights))

    def translation_perm(self, t_index: int) -> np.ndarray:
        """Permutation p with p[i] = index of (element_i + t)."""
        shifted = (self._coords + self._coords[t_index]) % np.asarray(self.factors)
        return shifted @ np.asarray(self._weights)

    def negation_perm(self) -> np.ndarray:
        neg = (-self._coords) % np.asarray(self.factors)
        return neg @ np.asarray(self._weights)

    # -- pairing tables -------------------------------------------------------

    def pairing_numerators(self, char: "Character") -> np.ndarray:
        """Exact pairing numerators over L for every element.

        Entry n is the integer r with <char, element_n> = r / L, r in [0, L).
        """
        if char.group != self:
            raise ValueError("character belongs to a different group")
        mult = np.asarray(
            [xi * (self.L // n) for xi, n in zip(char.coords, self.factors)],
            dtype=np.int64,
        )
        return (self._coords @ mult) % self.L

    def torus_numerators(self, char: "Character") -> np.ndarray:
        """Numerators of ||<char, .>|| over L: min(r, L - r) per element."""
        r = self.pairing_numerators(char)
        return np.minimum(r, self.L - r)


@dataclass(frozen=True)
class Element:
    """A group element as a residue vector."""

    group: GroupSpec
    coords: tuple[int, ...]

    def __post_init__(self):
        if len(self.coords) != len(self.group.factors):
            raise ValueError("coordinate shape mismatch")
        if any(not (0 <= c < n) for c, n in zip(self.coords, self.group.factors)):
            object.__setattr__(
                self,
                "coords",
                tuple(c % n for c, n in zip(self.coords, self.group.factors)),
            )

    @property
    def index(self) -> int:
        return self.group.index_of(self.coords)

    def __add__(self, other: "Element") -> "Element":
        return add(self, other)

    def __neg__(self) -> "Element":
        return negate(self)


@dataclass(frozen=True)
class Character(Element):
    """A character, stored as its dual residue vector."""


def add(x: Element, y: Element) -> Element:
    """Component-wise sum modulo the factor orders."""
    if x.group != y.group:
        raise ValueError("elements belong to different groups")
    return Element(x.group, tuple((a + b) % n for a, b, n in zip(x.coords, y.coords, x.group.factors)))


def negate(x: Element) -> Element:
    return Element(x.group, tuple((-a) % n for a, n in zip(x.coords, x.group.factors)))


def pairing_fraction(xi: Character, x: Element) -> Fraction:
    """Exact value of <xi, x> in [0, 1) as a fraction over lcm(n_i)."""
    if xi.group != x.group:
        raise ValueError("character and element belong to different groups")
    g = xi.group
    r = sum(a * b * (g.L // n) for a, b, n in zip(xi.coords, x.coords, g.factors)) % g.L
    return Fraction(r, g.L)


def pairing(xi: Character, x: Element) -> float:
    """The torus pairing <xi, x> = sum_i xi_i x_i / n_i mod 1."""
    return float(pairing_fraction(xi, x))


def torus_norm_fraction(t: Fraction) -> Fraction:
    frac = t - (t.numerator // t.denominator)
    return min(frac, 1 - frac)


def torus_norm(t: float) -> float:
    """Distance from t to the nearest integer, in [0, 1/2]."""
    frac = t - math.floor(t)
    return min(frac, 1.0 - frac)


def translate_mask(mask: np.ndarray, group: GroupSpec, t_index: int) -> np.ndarray:
    """Indicator of (S + t) from the indicator of S."""
    out = np.zeros_like(mask)
    out[group.translation_perm(t_index)] = mask
    return out
