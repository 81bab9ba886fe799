"""Planar sets, corner counting, extremal search and constructions.

A corner is a triple {(k,m), (k+d,m), (k,m+d)} with d != 0; the integer
grid variant restricts to d > 0 and never wraps.  Both frames share one
bitset-backed set type, so the same counters serve Z_N x Z_N and
{0..n-1}^2 experiments.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from corners_lab.errors import PreconditionError
from corners_lab.groups import GroupSpec
from corners_lab.rng import SplitMix64

__all__ = [
    "Subset2D",
    "LPatternCount",
    "ExtremalResult",
    "count_corners",
    "count_l_pattern",
    "shear",
    "unshear",
    "extremal_search",
    "behrend_set",
    "ap3_free",
    "cornerfree_from_ap3free",
    "green_symmetrize",
]


class Subset2D:
    """A subset of G x G (mode ``group``) or of the n x n grid (``grid``).

    Membership lives in a row-major boolean matrix; cardinality is cached.
    Grid mode simply never wraps its shifts.
    """

    __slots__ = ("mode", "group", "n", "bits", "_card")

    def __init__(self, mode: str, bits: np.ndarray, group: GroupSpec | None = None):
        if mode not in ("group", "grid"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "group" and group is None:
            raise ValueError("group mode requires a GroupSpec")
        bits = np.ascontiguousarray(bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
            raise ValueError("bits must be a square boolean matrix")
        if mode == "group" and bits.shape[0] != group.N:
            raise ValueError("bit matrix side must equal |G|")
        self.mode = mode
        self.group = group if mode == "group" else None
        self.n = bits.shape[0]
        self.bits = bits
        self._card = int(bits.sum())

    # -- construction ---------------------------------------------------------

    @classmethod
    def empty(cls, side_or_group) -> "Subset2D":
        return cls._blank(side_or_group, fill=False)

    @classmethod
    def full(cls, side_or_group) -> "Subset2D":
        return cls._blank(side_or_group, fill=True)

    @classmethod
    def _blank(cls, side_or_group, fill: bool) -> "Subset2D":
        if isinstance(side_or_group, GroupSpec):
            n = side_or_group.N
            return cls("group", np.full((n, n), fill), group=side_or_group)
        n = int(side_or_group)
        return cls("grid", np.full((n, n), fill))

    @classmethod
    def random(cls, side_or_group, delta: float, seed: int) -> "Subset2D":
        """Independent inclusion with probability delta, SplitMix64-driven.

        Cells are drawn in row-major order, one double per cell, so any
        implementation of the documented generator reproduces the set.
        """
        if not 0.0 <= delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")
        blank = cls._blank(side_or_group, fill=False)
        gen = SplitMix64(seed)
        flat = np.fromiter(
            (gen.next_double() < delta for _ in range(blank.n * blank.n)),
            dtype=bool,
            count=blank.n * blank.n,
        )
        blank.bits = flat.reshape(blank.n, blank.n)
        blank._card = int(blank.bits.sum())
        return blank

    def with_bits(self, bits: np.ndarray) -> "Subset2D":
        return Subset2D(self.mode, bits, group=self.group)

    # -- basics ---------------------------------------------------------------

    @property
    def cardinality(self) -> int:
        return self._card

    def density(self) -> float:
        return self._card / self.n**2

    def __contains__(self, point: tuple[int, int]) -> bool:
        return bool(self.bits[point])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Subset2D)
            and self.mode == other.mode
            and self.n == other.n
            and np.array_equal(self.bits, other.bits)
        )

    def __repr__(self) -> str:
        frame = self.group.name if self.mode == "group" else f"{self.n}x{self.n} grid"
        return f"Subset2D({frame}, |A|={self._card})"

    # -- serialization ----------------------------------------------------------

    def to_json(self) -> dict:
        packed = np.packbits(self.bits.ravel())
        shape = list(self.group.factors) if self.mode == "group" else [self.n]
        return {
            "mode": self.mode,
            "shape": shape,
            "bits": base64.b64encode(packed.tobytes()).decode("ascii"),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Subset2D":
        mode = data["mode"]
        if mode == "group":
            group = GroupSpec(data["shape"])
            n = group.N
        else:
            group = None
            (n,) = data["shape"]
        raw = np.frombuffer(base64.b64decode(data["bits"]), dtype=np.uint8)
        flat = np.unpackbits(raw, count=n * n).astype(bool)
        return cls(mode, flat.reshape(n, n), group=group)


def _row_perms(A: Subset2D) -> list[np.ndarray]:
    """Translation permutations for every shift d (group mode)."""
    return [A.group.translation_perm(d) for d in range(A.n)]


def count_corners(A: Subset2D, d_policy: str | None = None) -> int:
    """Exact number of corner triples (k, m, d) in A.

    ``d_policy`` is ``nonzero`` (default for group mode) or ``positive``
    (default for grid mode, the L(N) convention).  Grid mode with
    ``nonzero`` also counts the reflected d < 0 corners.
    """
    if d_policy is None:
        d_policy = "nonzero" if A.mode == "group" else "positive"
    if d_policy not in ("nonzero", "positive"):
        raise ValueError(f"unknown d policy {d_policy!r}")
    bits = A.bits
    total = 0
    if A.mode == "group":
        if d_policy == "positive":
            raise ValueError("positive-d counting is a grid notion")
        perms = _row_perms(A)
        for d in range(1, A.n):
            p = perms[d]
            total += int((bits & bits[p, :] & bits[:, p]).sum())
        return total
    n = A.n
    for d in range(1, n):
        total += int((bits[: n - d, : n - d] & bits[d:, : n - d] & bits[: n - d, d:]).sum())
        if d_policy == "nonzero":
            total += int((bits[d:, d:] & bits[: n - d, d:] & bits[d:, : n - d]).sum())
    return total


@dataclass
class LPatternCount:
    """Triple count sum over (s1, s2, r), with the r = 0 mass split out."""

    total: int
    r_zero: int

    @property
    def nonzero_r(self) -> int:
        return self.total - self.r_zero


def count_l_pattern(H: Subset2D, W: Subset2D, A: Subset2D) -> LPatternCount:
    """Count triples (s1, s2, r) with H(s1,s2), W(s1+r,s2+r), A(s1,s2+r).

    Group mode only; r runs over all of G and the degenerate r = 0
    contribution is reported rather than dropped.
    """
    if not (H.mode == W.mode == A.mode == "group"):
        raise ValueError("L-pattern counting is defined on the group frame")
    if not (H.group == W.group == A.group):
        raise ValueError("operands live on different groups")
    perms = _row_perms(H)
    total = 0
    r_zero = 0
    for r in range(H.n):
        p = perms[r]
        count = int((H.bits & W.bits[p, :][:, p] & A.bits[:, p]).sum())
        total += count
        if r == 0:
            r_zero = count
    return LPatternCount(total=total, r_zero=r_zero)


def shear(A: Subset2D) -> Subset2D:
    """The bijective change of variables (x, y) -> membership of (x+y, y)."""
    if A.mode != "group":
        raise ValueError("shear needs the group frame")
    out = np.empty_like(A.bits)
    for y in range(A.n):
        out[:, y] = A.bits[A.group.translation_perm(y), y]
    return A.with_bits(out)


def unshear(A: Subset2D) -> Subset2D:
    """Inverse of :func:`shear`: (x, y) -> membership of (x-y, y)."""
    if A.mode != "group":
        raise ValueError("unshear needs the group frame")
    out = np.empty_like(A.bits)
    for y in range(A.n):
        neg_y = A.group.negate_index(y)
        out[:, y] = A.bits[A.group.translation_perm(neg_y), y]
    return A.with_bits(out)


# -- extremal corner-free search ------------------------------------------------


@dataclass
class ExtremalResult:
    n: int
    mode: str
    max_size: int
    witness: Subset2D
    nodes_explored: int
    optimal: bool

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "mode": self.mode,
            "max_size": self.max_size,
            "witness": self.witness.to_json(),
            "nodes_explored": self.nodes_explored,
            "optimal": self.optimal,
            "density": self.max_size / self.n**2 if self.mode == "grid" else self.max_size / self.witness.n**2,
        }


def _corner_clauses(n: int, mode: str, group: GroupSpec | None) -> list[frozenset[int]]:
    """Deduplicated 3-cell corner constraints over flat cell indices."""
    clauses: set[frozenset[int]] = set()
    if mode == "group":
        side = group.N
        for k in range(side):
            for m in range(side):
                for d in range(1, side):
                    k2 = group.add_indices(k, d)
                    m2 = group.add_indices(m, d)
                    clauses.add(frozenset((k * side + m, k2 * side + m, k * side + m2)))
    else:
        for k in range(n):
            for m in range(n):
                for d in range(1, n - max(k, m)):
                    clauses.add(frozenset((k * n + m, (k + d) * n + m, k * n + (m + d))))
    return sorted(clauses, key=sorted)


def extremal_search(
    n: int,
    mode: str = "grid",
    budget: int | None = None,
    group: GroupSpec | None = None,
) -> ExtremalResult:
    """Largest corner-free subset of the n x n grid or of G x G.

    Exhaustive over all subsets when the frame has at most 16 cells;
    branch-and-bound (most-constrained cell first, cardinality pruning)
    beyond that.  A run that exhausts its node budget returns its best
    set flagged non-optimal instead of raising.
    """
    if mode == "group" and group is None:
        group = GroupSpec([n])
    side = group.N if mode == "group" else n
    cells = side * side
    clauses = _corner_clauses(n, mode, group)
    clause_masks = [sum(1 << c for c in cl) for cl in clauses]

    nodes = 0
    if cells <= 16:
        best_mask, best_size = 0, 0
        for mask in range(1 << cells):
            nodes += 1
            size = mask.bit_count()
            if size <= best_size:
                continue
            if all((mask & cm) != cm for cm in clause_masks):
                best_mask, best_size = mask, size
        witness_bits = np.array([(best_mask >> i) & 1 for i in range(cells)], dtype=bool)
        witness = Subset2D(mode, witness_bits.reshape(side, side), group=group)
        return ExtremalResult(n, mode, best_size, witness, nodes, optimal=True)

    # Branch and bound.  Order cells by descending clause degree so the
    # most constrained decisions come first.
    degree = [0] * cells
    for cl in clauses:
        for c in cl:
            degree[c] += 1
    order = sorted(range(cells), key=lambda c: (-degree[c], c))
    per_cell = [[cm for cm in clause_masks if (cm >> c) & 1] for c in range(cells)]
    budget = budget if budget is not None else 5_000_000

    best_mask = 0
    best_size = 0
    exhausted = False

    def dfs(pos: int, mask: int, size: int):
        nonlocal best_mask, best_size, nodes, exhausted
        if exhausted:
            return
        nodes += 1
        if nodes > budget:
            exhausted = True
            return
        if size + (cells - pos) <= best_size:
            return
        if pos == cells:
            best_mask, best_size = mask, size
            return
        cell = order[pos]
        with_cell = mask | (1 << cell)
        if all((with_cell & cm) != cm for cm in per_cell[cell]):
            dfs(pos + 1, with_cell, size + 1)
        dfs(pos + 1, mask, size)

    dfs(0, 0, 0)
    witness_bits = np.array([(best_mask >> i) & 1 for i in range(cells)], dtype=bool)
    witness = Subset2D(mode, witness_bits.reshape(side, side), group=group)
    return ExtremalResult(n, mode, best_size, witness, nodes, optimal=not exhausted)


# -- progression-free and corner-free constructions -----------------------------


def ap3_free(B: Iterable[int], modulus: int | None = None) -> bool:
    """Exhaustively check that B carries no 3-term arithmetic progression.

    ``modulus`` switches to progressions in Z_modulus.
    """
    items = sorted(set(int(b) for b in B))
    if modulus is None:
        present = set(items)
        for i, a in enumerate(items):
            for c in items[i + 1 :]:
                if (a + c) % 2 == 0 and (a + c) // 2 in present and (a + c) // 2 != a:
                    return False
        return True
    present = {b % modulus for b in items}
    for x in present:
        for d in range(1, modulus):
            if (x + d) % modulus in present and (x + 2 * d) % modulus in present:
                if d != 0 and (x + d) % modulus != x:
                    return False
    return True


def behrend_set(N: int) -> np.ndarray:
    """A 3-AP-free subset of {1..N} from sphere layers in digit coordinates.

    Writes candidates in base b with n digits below b/2 (so sums never
    carry) and keeps a largest sphere sum(x_i^2) = r^2; the (b, n, r)
    grid is swept deterministically and the biggest set wins.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    best: list[int] = [1]
    max_vectors = 400_000
    max_dim = max(2, int(math.log2(N)) + 2) if N > 1 else 2
    for n_dims in range(2, max_dim + 1):
        # Bases near N^(1/n): larger ones waste the top digit, smaller
        # ones truncate most vectors at the value <= N filter.
        b0 = max(3, round(N ** (1.0 / n_dims)))
        for b in range(max(3, b0 - 2), b0 + 4):
            m = (b + 1) // 2  # digits 0..m-1 keep x+y and 2z carry-free
            if m**n_dims > max_vectors or b ** (n_dims - 1) > N:
                continue
            spheres: dict[int, list[int]] = {}
            powers = [b**i for i in range(n_dims)]
            for digits in product(range(m), repeat=n_dims):
                value = sum(x * p for x, p in zip(digits, powers)) + 1
                if value > N:
                    continue
                spheres.setdefault(sum(x * x for x in digits), []).append(value)
            for members in spheres.values():
                if len(members) > len(best):
                    best = members
    return np.asarray(sorted(best), dtype=np.int64)


def cornerfree_from_ap3free(B: Iterable[int], N: int, mode: str = "grid") -> Subset2D:
    """Lift a progression-free difference set to a corner-free planar set.

    Output is {(x, y) : x - y in B}; a corner (k, m, d) would force the
    progression {k-m-d, k-m, k-m+d} inside B, so none exists for d != 0.
    """
    B = sorted(set(int(b) for b in B))
    if mode == "grid":
        if any(not (-(N - 1) <= b <= N - 1) for b in B):
            raise PreconditionError("difference values must lie in (-N, N) for the grid")
        if not ap3_free(B):
            raise PreconditionError("B contains a 3-term arithmetic progression")
        x = np.arange(N)
        bits = np.isin(x[:, None] - x[None, :], B)
        return Subset2D("grid", bits)
    if mode == "group":
        group = GroupSpec([N])
        residues = sorted({b % N for b in B})
        if not ap3_free(residues, modulus=N):
            raise PreconditionError("B contains a 3-term progression modulo N")
        x = np.arange(N)
        bits = np.isin((x[:, None] - x[None, :]) % N, residues)
        return Subset2D("group", bits, group=group)
    raise ValueError(f"unknown mode {mode!r}")


def green_symmetrize(A: Subset2D, N: int) -> Subset2D:
    """Pass to A ∩ (s - A) for the most popular sum s, killing d < 0 corners.

    Input is a subset of {-N..N}^2 (stored 0-based with offset N) free of
    d > 0 corners; the output is corner-free for every d != 0, contained
    in A, and of size at least |A|^2 / (4N+1)^2 >= delta^2 (2N+1)^2 / 4.
    """
    if A.mode != "grid" or A.n != 2 * N + 1:
        raise PreconditionError("expected a grid subset of side 2N+1")
    if count_corners(A, d_policy="positive") != 0:
        raise PreconditionError("input has a corner with d > 0")
    if A.cardinality == 0:
        raise PreconditionError("input set is empty")
    pts = np.argwhere(A.bits)
    sums: dict[tuple[int, int], int] = {}
    for x, y in pts:
        for u, v in pts:
            key = (int(x + u), int(y + v))
            sums[key] = sums.get(key, 0) + 1
    # Most popular sum; ties break to the lexicographically smallest so the
    # construction is deterministic.
    top = max(sums.values())
    s = min(k for k, c in sums.items() if c == top)
    bits = np.zeros_like(A.bits)
    side = A.n
    for x, y in pts:
        u, v = s[0] - int(x), s[1] - int(y)
        if 0 <= u < side and 0 <= v < side and A.bits[u, v]:
            bits[x, y] = True
    out = A.with_bits(bits)
    if count_corners(out, d_policy="nonzero") != 0:
        raise AssertionError("symmetrized set still has a corner")
    if out.cardinality * (4 * N + 1) ** 2 < A.cardinality**2:
        raise AssertionError("symmetrized set is smaller than the sum-popularity bound")
    return out
