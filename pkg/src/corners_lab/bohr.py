"""Bohr sets: exact construction, regularity, attendants, smoothing.

A Bohr set Lambda(S, eps) collects the n in G with ||<xi, n>|| < eps for
every character xi in the generative set S.  All pairings are integers
over L = lcm of the factor orders, so membership, cardinality counts and
the regularity window checks below are exact rational comparisons - the
strict inequality in the definition never flips from rounding.

Regularity here is checked on the closed radius window
[eps(1 - k/(100d)), eps(1 + k/(100d))]: the cardinality function of the
radius is a step function whose sup/inf over the window are attained at
the endpoints, so two exact counts decide the property.  The closed
window is marginally stronger than the open one, which makes the
Lambda+/Lambda- cardinality bounds strict rather than knife-edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from corners_lab.errors import ConstantsInfeasibleError, PreconditionError
from corners_lab.groups import Character, Element, GroupSpec

__all__ = [
    "BohrSpec",
    "BohrReport",
    "ConvSupportStats",
    "bohr_members",
    "member_indices",
    "bohr_size",
    "size_at_radius",
    "check_regular",
    "find_regular_epsilon",
    "attendant",
    "is_attendant",
    "plus_minus",
    "conv_support_stats",
    "local_density",
    "local_density_table",
    "local_density_table_2d",
    "smoothing_defect",
    "bohr_report",
    "DEFAULT_KAPPA",
]

DEFAULT_KAPPA = Fraction(1, 8)

# phi tables keyed by (factors, character coords); read-mostly, populated
# once per generative set (safe under the GIL: worst case two threads
# compute the same immutable array).
_PHI_CACHE: dict = {}


def _phi(group: GroupSpec, chars: tuple[Character, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Per-element max torus numerator over S, plus its sorted copy."""
    key = (group.factors, tuple(c.coords for c in chars))
    hit = _PHI_CACHE.get(key)
    if hit is None:
        if chars:
            phi = np.zeros(group.N, dtype=np.int64)
            for c in chars:
                np.maximum(phi, group.torus_numerators(c), out=phi)
        else:
            phi = np.zeros(group.N, dtype=np.int64)
        phi.setflags(write=False)
        hit = (phi, np.sort(phi))
        _PHI_CACHE[key] = hit
    return hit


def _strict_threshold(eps: Fraction, L: int) -> int:
    """Largest integer t with t/L < eps."""
    return (eps.numerator * L - 1) // eps.denominator


@dataclass(frozen=True)
class BohrSpec:
    """Bohr set specification: generative characters, radius, translate.

    ``eps`` and ``kappa`` are stored as exact fractions (floats convert
    losslessly).  A translate never materializes a second membership
    table; every size or regularity question is translation-invariant.
    """

    group: GroupSpec
    chars: tuple[Character, ...]
    eps: Fraction
    kappa: Fraction = DEFAULT_KAPPA
    translate: Element | None = None

    def __post_init__(self):
        object.__setattr__(self, "chars", tuple(self.chars))
        object.__setattr__(self, "eps", Fraction(self.eps))
        object.__setattr__(self, "kappa", Fraction(self.kappa))
        if self.eps <= 0:
            raise ValueError("radius must be positive")
        if not (0 < self.kappa < 1):
            raise ValueError("kappa must lie in (0, 1)")
        for c in self.chars:
            if c.group != self.group:
                raise ValueError("generative character from a different group")

    @property
    def d(self) -> int:
        return len(self.chars)

    @property
    def effective_d(self) -> int:
        """Dimension used in window rules; a dimension-0 set behaves as 1.

        Matches seeding the iteration with the zero character, whose
        constraint is vacuous.
        """
        return max(self.d, 1)

    @property
    def window(self) -> Fraction:
        """Half-width kappa*eps/(100 d) of the regularity window."""
        return self.kappa * self.eps / (100 * self.effective_d)

    def translated(self, t: Element | None) -> "BohrSpec":
        return replace(self, translate=t)

    def untranslated(self) -> "BohrSpec":
        return replace(self, translate=None)

    def describe(self) -> dict:
        return {
            "group": self.group.to_json(),
            "chars": [list(c.coords) for c in self.chars],
            "eps": [self.eps.numerator, self.eps.denominator],
            "kappa": [self.kappa.numerator, self.kappa.denominator],
            "translate": None if self.translate is None else list(self.translate.coords),
        }


@dataclass
class BohrReport:
    """Size and regularity summary of one Bohr set."""

    size: int
    lower_bound: float
    regular: bool
    plus_size: int
    minus_size: int
    dimension: int
    eps: Fraction

    def to_json(self) -> dict:
        return {
            "size": self.size,
            "lower_bound": self.lower_bound,
            "regular": self.regular,
            "plus_size": self.plus_size,
            "minus_size": self.minus_size,
            "dimension": self.dimension,
            "eps": [self.eps.numerator, self.eps.denominator],
        }


def size_at_radius(spec: BohrSpec, eps: Fraction) -> int:
    """|Lambda(S, eps)| by exact counting, independent of translate."""
    _, sorted_phi = _phi(spec.group, spec.chars)
    k = _strict_threshold(Fraction(eps), spec.group.L)
    return int(np.searchsorted(sorted_phi, k, side="right"))


def bohr_size(spec: BohrSpec) -> int:
    return size_at_radius(spec, spec.eps)


def bohr_members(spec: BohrSpec) -> np.ndarray:
    """Boolean membership mask over element indices (translated if set)."""
    phi, _ = _phi(spec.group, spec.chars)
    k = _strict_threshold(spec.eps, spec.group.L)
    mask = phi <= k
    if spec.translate is not None:
        out = np.zeros_like(mask)
        out[spec.group.translation_perm(spec.translate.index)] = mask
        return out
    return mask


def member_indices(spec: BohrSpec) -> np.ndarray:
    return np.nonzero(bohr_members(spec))[0]


def check_regular(spec: BohrSpec) -> bool:
    """Exact endpoint check of the regularity window.

    The radius-to-size map is a nondecreasing step function, so its
    extremes over the window are the two endpoint counts; both are
    compared to (1 +- kappa)|Lambda| in exact rational arithmetic.
    """
    if spec.d == 0:
        return True
    size = bohr_size(spec)
    if size == 0:
        return False
    lo = size_at_radius(spec, spec.eps - spec.window)
    hi = size_at_radius(spec, spec.eps + spec.window)
    return (1 - spec.kappa) * size < lo and hi < (1 + spec.kappa) * size


def _plateau_midpoints(group: GroupSpec, chars: Sequence[Character], lo: Fraction, hi: Fraction) -> list[Fraction]:
    """Midpoints of the cardinality plateaus of Lambda(S, .) inside (lo, hi).

    The radii where the cardinality changes are exactly the attained
    values of max_xi ||xi . n||, so the scan grid is exact, not sampled.
    """
    _, sorted_phi = _phi(group, chars)
    L = group.L
    breaks = [Fraction(int(t), L) for t in np.unique(sorted_phi)]
    bounds = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    return [(a + b) / 2 for a, b in zip(bounds, bounds[1:])]


def _find_regular_in(
    group: GroupSpec,
    chars: tuple[Character, ...],
    lo: Fraction,
    hi: Fraction,
    kappa: Fraction,
) -> Fraction:
    candidates = _plateau_midpoints(group, chars, lo, hi)
    for eps1 in sorted(candidates, reverse=True):
        if check_regular(BohrSpec(group, chars, eps1, kappa)):
            return eps1
    raise ConstantsInfeasibleError(
        f"no regular radius on the breakpoint-midpoint grid in ({lo}, {hi}); "
        f"scanned {len(candidates)} plateau midpoints",
        diagnostics={"lo": str(lo), "hi": str(hi), "candidates": len(candidates)},
    )


def find_regular_epsilon(
    group: GroupSpec,
    chars: Iterable[Character],
    eps,
    kappa=DEFAULT_KAPPA,
) -> Fraction:
    """A radius eps1 in (eps/2, eps) at which Lambda(S, eps1) is regular.

    Scans the exact plateau midpoints in descending order and verifies
    each with the endpoint check; exhaustion raises instead of silently
    returning an unverified radius.
    """
    eps = Fraction(eps)
    kappa = Fraction(kappa)
    chars = tuple(chars)
    if not (0 < eps <= 1):
        raise PreconditionError(f"eps must lie in (0, 1], got {eps}")
    if not chars:
        return eps * 3 / 4
    return _find_regular_in(group, chars, eps / 2, eps, kappa)


def attendant(spec: BohrSpec, eps, *, extra_chars: Iterable[Character] = ()) -> BohrSpec:
    """A regular Bohr set with radius in [eps*eps0/2, eps*eps0].

    The generative set stays fixed unless ``extra_chars`` adjoins new
    characters (needed when a Fourier increment grows the dimension).
    """
    eps = Fraction(eps)
    if not check_regular(spec):
        raise PreconditionError("attendants are defined for regular Bohr sets only")
    chars = tuple(spec.chars) + tuple(c for c in extra_chars if c not in spec.chars)
    if not chars:
        return BohrSpec(spec.group, (), eps * spec.eps * 3 / 4, spec.kappa)
    eps1 = _find_regular_in(spec.group, chars, eps * spec.eps / 2, eps * spec.eps, spec.kappa)
    return BohrSpec(spec.group, chars, eps1, spec.kappa)


def is_attendant(parent: BohrSpec, child: BohrSpec, eps=None) -> bool:
    """Whether ``child`` is an eps-attendant of ``parent``.

    With ``eps`` omitted, accepts any regular child with a superset
    generative set and radius at most the parent's.
    """
    if parent.group != child.group:
        return False
    if not set(parent.chars) <= set(child.chars):
        return False
    if not check_regular(child):
        return False
    if eps is None:
        return child.eps <= parent.eps
    eps = Fraction(eps)
    return eps * parent.eps / 2 <= child.eps <= eps * parent.eps


def plus_minus(spec: BohrSpec) -> tuple[BohrSpec, BohrSpec]:
    """The enlarged/shrunk companions at radii (1 +- kappa/(100 d)) eps."""
    if spec.d == 0:
        return spec, spec
    w = spec.window
    return (
        replace(spec, eps=spec.eps + w),
        replace(spec, eps=spec.eps - w),
    )


def _require_attendant(lam: BohrSpec, lam_p: BohrSpec, eps: Fraction, what: str) -> None:
    if not check_regular(lam):
        raise PreconditionError(f"{what}: the base Bohr set is not regular")
    if not is_attendant(lam, lam_p, eps):
        raise PreconditionError(f"{what}: second argument is not a {eps}-attendant")


@dataclass
class ConvSupportStats:
    """Sizes and L1 defect of the indicator convolution Lambda * Lambda'."""

    support_size: int
    full_count: int
    l1_defect: Fraction
    lam_size: int
    lamp_size: int
    kappa: Fraction
    support_bound_ok: bool = field(init=False)
    full_bound_ok: bool = field(init=False)
    defect_bound_ok: bool = field(init=False)

    def __post_init__(self):
        self.support_bound_ok = self.support_size <= (1 + self.kappa) * self.lam_size
        self.full_bound_ok = self.full_count > (1 - self.kappa) * self.lam_size
        self.defect_bound_ok = self.l1_defect < 2 * self.kappa * self.lam_size


def indicator_convolution(group: GroupSpec, a_mask: np.ndarray, b_mask: np.ndarray) -> np.ndarray:
    """Integer table (A * B)(n) = #{(s, t) in A x B : s + t = n}."""
    counts = np.zeros(group.N, dtype=np.int64)
    a_idx = np.nonzero(a_mask)[0]
    for t in np.nonzero(b_mask)[0]:
        counts[group.translation_perm(int(t))[a_idx]] += 1
    return counts


def conv_support_stats(lam: BohrSpec, lam_p: BohrSpec) -> ConvSupportStats:
    """Exact support/plateau statistics of Lambda * Lambda'.

    Requires a regular base set and a kappa/(100 d)-attendant; the three
    returned quantities come with their proved bounds pre-evaluated.
    """
    eps1 = lam.kappa / (100 * lam.effective_d)
    _require_attendant(lam, lam_p, eps1, "conv_support_stats")
    lam_mask = bohr_members(lam.untranslated())
    lamp_mask = bohr_members(lam_p.untranslated())
    counts = indicator_convolution(lam.group, lam_mask, lamp_mask)
    lamp_size = int(lamp_mask.sum())
    defect_num = int(np.abs(counts - lamp_size * lam_mask).sum())
    return ConvSupportStats(
        support_size=int((counts > 0).sum()),
        full_count=int((counts == lamp_size).sum()),
        l1_defect=Fraction(defect_num, lamp_size),
        lam_size=int(lam_mask.sum()),
        lamp_size=lamp_size,
        kappa=lam.kappa,
    )


def _translated_indices(spec: BohrSpec, t_index: int) -> np.ndarray:
    base = member_indices(spec.untranslated())
    return spec.group.translation_perm(t_index)[base]


def local_density(E: np.ndarray, spec: BohrSpec, translate=None) -> float:
    """Relative density of E on a translated Bohr set.

    1D masks use |E ∩ (Lambda+x)| / |Lambda|; 2D arrays use the product
    window (Lambda+x1) x (Lambda+x2) with |Lambda|^2 in the denominator.
    """
    E = np.asarray(E)
    size = bohr_size(spec)
    if size == 0:
        raise PreconditionError("local density over an empty Bohr set")
    if E.ndim == 1:
        t = 0 if translate is None else int(translate)
        idx = _translated_indices(spec, t)
        return float(E[idx].sum() / size)
    if E.ndim == 2:
        t1, t2 = (0, 0) if translate is None else (int(translate[0]), int(translate[1]))
        idx1 = _translated_indices(spec, t1)
        idx2 = _translated_indices(spec, t2)
        return float(E[np.ix_(idx1, idx2)].sum() / size**2)
    raise ValueError("E must be a 1D mask or a 2D array")


def local_density_table(E: np.ndarray, spec: BohrSpec) -> np.ndarray:
    """Integer counts |E ∩ (Lambda+n)| for every translate n at once."""
    E = np.asarray(E, dtype=np.int64)
    group = spec.group
    counts = np.zeros(group.N, dtype=np.int64)
    for s in member_indices(spec.untranslated()):
        counts += E[group.translation_perm(int(s))]
    return counts


def local_density_table_2d(E: np.ndarray, spec: BohrSpec) -> np.ndarray:
    """Counts |E ∩ (Lambda+n1) x (Lambda+n2)| for all (n1, n2), separably."""
    E = np.asarray(E, dtype=np.int64)
    group = spec.group
    idx = member_indices(spec.untranslated())
    partial = np.zeros_like(E)
    for s in idx:
        partial += E[group.translation_perm(int(s)), :]
    counts = np.zeros_like(E)
    for s in idx:
        counts += partial[:, group.translation_perm(int(s))]
    return counts


@dataclass
class SmoothingReport:
    density: float
    smoothed_mean: float
    defect: float
    bound: float
    ok: bool


def smoothing_defect(E: np.ndarray, lam: BohrSpec, lam_p: BohrSpec, translate=None) -> SmoothingReport:
    """Defect between a local density and its attendant-smoothed mean.

    Bounded by 4*kappa in the planar case (2*kappa for 1D masks) when
    Lambda' is a kappa/(100 d)-attendant; the bound is part of the report
    so callers can assert it.
    """
    eps1 = lam.kappa / (100 * lam.effective_d)
    _require_attendant(lam, lam_p, eps1, "smoothing_defect")
    E = np.asarray(E)
    lam_size = bohr_size(lam)
    lamp_size = bohr_size(lam_p)
    if E.ndim == 2:
        t1, t2 = (0, 0) if translate is None else (int(translate[0]), int(translate[1]))
        idx1 = _translated_indices(lam, t1)
        idx2 = _translated_indices(lam, t2)
        density = float(E[np.ix_(idx1, idx2)].sum() / lam_size**2)
        table = local_density_table_2d(E, lam_p)
        mean = float(table[np.ix_(idx1, idx2)].sum() / (lam_size**2 * lamp_size**2))
        bound = float(4 * lam.kappa)
    elif E.ndim == 1:
        t = 0 if translate is None else int(translate)
        idx = _translated_indices(lam, t)
        density = float(E[idx].sum() / lam_size)
        table = local_density_table(E, lam_p)
        mean = float(table[idx].sum() / (lam_size * lamp_size))
        bound = float(2 * lam.kappa)
    else:
        raise ValueError("E must be a 1D mask or a 2D array")
    defect = abs(density - mean)
    return SmoothingReport(density, mean, defect, bound, defect <= bound)


def bohr_report(spec: BohrSpec) -> BohrReport:
    """Cardinality, the eps^d N lower bound, regularity and companions."""
    size = bohr_size(spec)
    plus, minus = plus_minus(spec)
    lower = spec.eps**spec.d * spec.group.N
    report = BohrReport(
        size=size,
        lower_bound=float(lower),
        regular=check_regular(spec),
        plus_size=bohr_size(plus),
        minus_size=bohr_size(minus),
        dimension=spec.d,
        eps=spec.eps,
    )
    if size < lower:  # exact comparison; the estimate is unconditional
        raise AssertionError(f"size {size} fell below the eps^d N bound {lower}")
    return report
