"""Uniformity diagnostics: Fourier bias, box norms, localized norms.

The box (rectilinear) norm of f : G x G -> C is the fourth root of

    sum_{x,x',y,y'} f(x,y) conj(f(x',y)) conj(f(x,y')) f(x',y')

which measures correlation with product structure; a set whose balanced
function has small box norm behaves like a random set in corner counts.
Two independent groupings of the quadruple sum (row Gram and column
Gram) are implemented and must agree, and every predicate reports its
measured quantity next to the verdict - thresholds never clamp silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from corners_lab.bohr import (
    BohrSpec,
    bohr_members,
    bohr_size,
    is_attendant,
    local_density_table,
    member_indices,
)
from corners_lab.errors import PreconditionError
from corners_lab.groups import Character, GroupSpec
from corners_lab.spectral import DenseMap, DenseMap2D, balanced, dft, max_fourier_coeff

__all__ = [
    "UniformityReport",
    "AeUniformityReport",
    "is_alpha_uniform",
    "box_norm4",
    "box_norm4_pairform",
    "box_norm",
    "rect_alpha_uniform",
    "localized_box_norm4",
    "ae_uniformity",
    "rect_aae_uniform",
    "conv_deviation_exceptions",
    "intermediate_omegas",
]


@dataclass
class UniformityReport:
    """Measured uniformity quantities for one planar set."""

    alpha_bias: float
    box_norm4: float
    rect_ratio: float
    verdicts: dict

    def to_json(self) -> dict:
        return {
            "alpha_bias": self.alpha_bias,
            "box_norm4": self.box_norm4,
            "rect_ratio": self.rect_ratio,
            "verdicts": dict(self.verdicts),
        }


@dataclass
class AeUniformityReport:
    """The three translate-localized uniformity conditions for Q inside a
    Bohr set, measured against an attendant."""

    bad_set_size: int
    mean_square_dev: float
    global_bias: float
    attendant: dict
    alpha: float
    lam_size: int
    lamp_size: int
    bad_bound_ok: bool = field(init=False)
    mean_sq_ok: bool = field(init=False)
    bias_ok: bool = field(init=False)
    uniform: bool = field(init=False)

    def __post_init__(self):
        self.bad_bound_ok = self.bad_set_size <= self.alpha * self.lam_size
        self.mean_sq_ok = self.mean_square_dev <= self.alpha**2
        self.bias_ok = self.global_bias <= self.alpha * self.lam_size
        self.uniform = self.bad_bound_ok and self.mean_sq_ok and self.bias_ok

    def to_json(self) -> dict:
        return {
            "bad_set_size": self.bad_set_size,
            "mean_square_dev": self.mean_square_dev,
            "global_bias": self.global_bias,
            "attendant": self.attendant,
            "alpha": self.alpha,
            "uniform": self.uniform,
        }


def is_alpha_uniform(f: DenseMap, lam: np.ndarray, alpha: float) -> tuple[bool, float, Character]:
    """Whether sup |fhat| <= alpha |Lambda| for f supported on Lambda.

    Returns the verdict, the measured bias sup|fhat| / |Lambda| and a
    maximizing character.
    """
    lam = np.asarray(lam, dtype=bool)
    size = int(lam.sum())
    if size == 0:
        raise PreconditionError("ambient set is empty")
    if np.any(np.abs(f.values[~lam]) > 0):
        raise PreconditionError("f does not vanish off the ambient set")
    if np.any(np.abs(f.values) > 1 + 1e-12):
        raise PreconditionError("f must map into the closed unit disk")
    xi, mag = max_fourier_coeff(f)
    bias = mag / size
    return bias <= alpha, bias, xi


def _as_matrix(f) -> np.ndarray:
    if isinstance(f, DenseMap2D):
        return f.values
    return np.ascontiguousarray(f, dtype=np.complex128)


def box_norm4(f) -> float:
    """Fourth power of the box norm, grouped over row pairs.

    Equals sum_{x,x'} |sum_y f(x,y) conj(f(x',y))|^2, which expands to
    the defining quadruple sum; always real and nonnegative.
    """
    F = _as_matrix(f)
    gram = F @ F.conj().T
    return float(np.sum(np.abs(gram) ** 2))


def box_norm4_pairform(f) -> float:
    """Fourth power of the box norm, grouped over column pairs.

    Evaluates sum_{m,p} |sum_k f(k,m) conj(f(k,p))|^2 in O(N^3); must
    agree with :func:`box_norm4` to float precision.
    """
    F = _as_matrix(f)
    gram = F.conj().T @ F
    return float(np.sum(np.abs(gram) ** 2))


def box_norm(f) -> float:
    return box_norm4(f) ** 0.25


def rect_alpha_uniform(A, E1: np.ndarray, E2: np.ndarray, alpha: float) -> UniformityReport:
    """Rectilinear alpha-uniformity of a planar set inside E1 x E2.

    The verdict compares box_norm4(balanced) / (|E1|^2 |E2|^2) against
    alpha; the 2D Fourier bias of the balanced function is reported as a
    companion diagnostic.
    """
    from corners_lab.spectral import balanced2d

    bits = A.bits if hasattr(A, "bits") else np.asarray(A, dtype=bool)
    E1 = np.asarray(E1, dtype=bool)
    E2 = np.asarray(E2, dtype=bool)
    f = balanced2d(bits, E1, E2)
    denom = float(int(E1.sum()) ** 2 * int(E2.sum()) ** 2)
    bn4 = box_norm4(f)
    ratio = bn4 / denom
    fhat_mag = float(np.abs(np.fft.fft2(f)).max()) if getattr(A, "mode", "grid") == "grid" else _group_bias_2d(f, A.group)
    bias = fhat_mag / (int(E1.sum()) * int(E2.sum()))
    return UniformityReport(
        alpha_bias=bias,
        box_norm4=bn4,
        rect_ratio=ratio,
        verdicts={"rect_alpha_uniform": bool(ratio <= alpha), "alpha": alpha},
    )


def _group_bias_2d(f: np.ndarray, group: GroupSpec) -> float:
    shaped = f.reshape(group.factors + group.factors)
    return float(np.abs(np.fft.fftn(shaped)).max())


def localized_box_norm4(
    f,
    lam1: BohrSpec,
    lam2: BohrSpec,
    lam_p: BohrSpec,
    method: str = "auto",
) -> float:
    """Box norm of f localized to windows of the attendant Lambda'.

    Evaluates

        sum_{i in L1} sum_{j in L2} sum_k sum_{m,u}
            L'(m-k-i) L'(u-k-i) |sum_r L'(k+r-j) f(r,m) f(r,u)|^2.

    ``direct`` is the six-level definitional loop (trusted oracle, small
    N only); ``factored`` contracts the same sum through convolution
    tables and must match it.  ``auto`` picks direct for N <= 64.
    """
    F = _as_matrix(f)
    group = lam1.group
    N = group.N
    if F.shape != (N, N):
        raise ValueError("f must be an |G| x |G| array")
    if not is_attendant(lam1.untranslated(), lam_p.untranslated()):
        raise PreconditionError("Lambda' is not an attendant of Lambda_1")
    if method == "auto":
        method = "direct" if N <= 64 else "factored"

    l1_idx = member_indices(lam1)
    l2_idx = member_indices(lam2)
    lp_idx = member_indices(lam_p)
    perms = [group.translation_perm(t) for t in range(N)]

    if method == "direct":
        total = 0.0
        for i in l1_idx:
            for j in l2_idx:
                for k in range(N):
                    ki = perms[k][i]  # k + i
                    window = perms[ki][lp_idx]  # m, u run over k + i + L'
                    r_window = perms[group.negate_index(k)][perms[j][lp_idx]]  # j - k + L'
                    sub = F[np.ix_(r_window, window)]
                    inner = sub[:, :, None] * sub[:, None, :]  # (r, m, u)
                    total += float((np.abs(inner.sum(axis=0)) ** 2).sum())
        return float(total)

    if method != "factored":
        raise ValueError(f"unknown method {method!r}")

    # C(a, b) = sum_{i in L1} L'(a - i) L'(b - i)
    lp_mask = bohr_members(lam_p.untranslated()).astype(np.float64)
    C = np.zeros((N, N))
    for i in l1_idx:
        shifted = lp_mask[perms[group.negate_index(int(i))]]  # L'(x - i)
        C += np.outer(shifted, shifted)
    l2_mask = bohr_members(lam2).astype(np.float64)
    neg_perm = group.negation_perm()
    total = 0.0
    cols = [m for m in range(N) if np.any(F[:, m])]
    for m in cols:
        for u in cols:
            prod = F[:, m] * F[:, u]
            # g(t) = sum_{rho in L'} prod(t + rho)
            g = np.zeros(N, dtype=np.complex128)
            for rho in lp_idx:
                g += prod[perms[int(rho)]]
            # h(k) = sum_j L2(j) |g(j - k)|^2
            gsq = np.abs(g) ** 2
            h = np.zeros(N)
            for j in l2_idx:
                h += gsq[perms[int(j)]][neg_perm]
            # sum_k C(m - k, u - k) h(k)
            mk = np.array([perms[group.negate_index(k)][m] for k in range(N)])
            uk = np.array([perms[group.negate_index(k)][u] for k in range(N)])
            total += float(np.dot(C[mk, uk], h))
    return float(total)


def ae_uniformity(Q: np.ndarray, lam: BohrSpec, lam_p: BohrSpec, alpha: float) -> AeUniformityReport:
    """Translate-localized uniformity of Q inside a Bohr set.

    Measures, against the attendant Lambda': the number of translates
    whose local balanced function has large Fourier sup norm, the mean
    square local density deviation, and the global Fourier bias.  The
    verdict is the conjunction of the three threshold checks.
    """
    group = lam.group
    Q = np.asarray(Q, dtype=bool)
    lam_mask = bohr_members(lam)
    if np.any(Q & ~lam_mask):
        raise PreconditionError("Q is not contained in the Bohr set")
    if not is_attendant(lam.untranslated(), lam_p.untranslated()):
        raise PreconditionError("second Bohr set is not an attendant")
    lam_idx = np.nonzero(lam_mask)[0]
    lam_size = lam_idx.size
    lamp_mask = bohr_members(lam_p.untranslated()).astype(np.float64)
    lamp_size = bohr_size(lam_p)
    delta = Q.sum() / lam_size

    # Per-translate local balanced functions, transformed in one batch.
    qf = Q.astype(np.float64)
    rows = np.empty((lam_size, group.N))
    for row, m in enumerate(lam_idx):
        shifted = lamp_mask[group.translation_perm(group.negate_index(int(m)))]  # L'(x - m)
        rows[row] = (qf - delta) * shifted
    axes = tuple(range(1, 1 + len(group.factors)))
    spectra = np.fft.fftn(rows.reshape((lam_size,) + group.factors), axes=axes)
    sup_norms = np.abs(spectra).reshape(lam_size, -1).max(axis=1)
    bad = int((sup_norms >= alpha * lamp_size).sum())

    counts = local_density_table(Q, lam_p)
    local = counts[lam_idx] / lamp_size
    mean_sq = float(np.mean(np.abs(local - delta) ** 2))

    global_bias = float(np.abs(dft(balanced(Q, lam_mask, group)).values).max())

    return AeUniformityReport(
        bad_set_size=bad,
        mean_square_dev=mean_sq,
        global_bias=global_bias,
        attendant=lam_p.describe(),
        alpha=float(alpha),
        lam_size=lam_size,
        lamp_size=lamp_size,
    )


@dataclass
class RectAaeReport:
    bad_slice_indices: list[int]
    threshold: float
    norms: dict[int, float]
    alpha1: float
    lam1_size: int
    uniform: bool = field(init=False)

    def __post_init__(self):
        self.uniform = len(self.bad_slice_indices) <= self.alpha1 * self.lam1_size


def rect_aae_uniform(
    A,
    lam1: BohrSpec,
    lam2: BohrSpec,
    lam_p: BohrSpec,
    lam_pe: BohrSpec,
    alpha: float,
    alpha1: float,
    E1: np.ndarray | None = None,
    E2: np.ndarray | None = None,
) -> RectAaeReport:
    """Slice-wise localized uniformity of a planar set.

    For each l in Lambda_1 the slice function f_l(s) = f(s1 + l, s2) L'(s1)
    is measured in the localized box norm over Lambda' x Lambda_2 with
    attendant Lambda'_eps; the bad set B collects slices whose norm
    exceeds alpha beta1^2 beta2^2 |L'_eps|^4 |L'|^2 |Lambda_2|, and the
    verdict is |B| <= alpha1 |Lambda_1|.
    """
    group = lam1.group
    bits = A.bits if hasattr(A, "bits") else np.asarray(A, dtype=bool)
    lam1_mask = bohr_members(lam1)
    lam2_mask = bohr_members(lam2)
    E1 = lam1_mask if E1 is None else np.asarray(E1, dtype=bool)
    E2 = lam2_mask if E2 is None else np.asarray(E2, dtype=bool)
    if not is_attendant(lam1.untranslated(), lam_p.untranslated()):
        raise PreconditionError("Lambda' is not an attendant of Lambda_1")
    if not is_attendant(lam_p.untranslated(), lam_pe.untranslated()):
        raise PreconditionError("Lambda'_eps is not an attendant of Lambda'")
    beta1 = E1.sum() / lam1_mask.sum()
    beta2 = E2.sum() / lam2_mask.sum()
    delta = bits.sum() / (E1.sum() * E2.sum())
    f = (bits.astype(np.float64) - delta) * np.outer(E1, E2)
    lp_mask = bohr_members(lam_p.untranslated())
    threshold = float(
        alpha
        * beta1**2
        * beta2**2
        * bohr_size(lam_pe) ** 4
        * bohr_size(lam_p) ** 2
        * int(lam2_mask.sum())
    )
    norms: dict[int, float] = {}
    bad: list[int] = []
    for l in member_indices(lam1):
        slice_f = f[group.translation_perm(int(l)), :] * lp_mask[:, None]
        norm4 = localized_box_norm4(slice_f, lam_p, lam2, lam_pe)
        norms[int(l)] = norm4
        if norm4 > threshold:
            bad.append(int(l))
    return RectAaeReport(
        bad_slice_indices=bad,
        threshold=threshold,
        norms=norms,
        alpha1=float(alpha1),
        lam1_size=int(lam1_mask.sum()),
    )


@dataclass
class ConvDeviationReport:
    exceptions: int
    bound: float
    deviation_threshold: float
    max_deviation: float
    ok: bool


def conv_deviation_exceptions(
    E: np.ndarray,
    lam_p: BohrSpec,
    g: np.ndarray,
    alpha: float,
) -> ConvDeviationReport:
    """Count k where (E*g)(k) strays from delta (Lambda'*g)(k).

    Requires E to be a measured alpha-uniform subset of Lambda'; then all
    but alpha^(2/3) |supp g| points deviate by at most alpha^(2/3) |L'|.
    """
    group = lam_p.group
    E = np.asarray(E, dtype=bool)
    lamp_mask = bohr_members(lam_p)
    if np.any(E & ~lamp_mask):
        raise PreconditionError("E is not contained in the Bohr set")
    f = balanced(E, lamp_mask, group)
    uniform, bias, _ = is_alpha_uniform(f, lamp_mask, alpha)
    if not uniform:
        raise PreconditionError("E is not alpha-uniform at the stated alpha", measured=bias)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (group.N,):
        raise ValueError("g must assign a value to every group element")
    if np.any(np.abs(g) > 1 + 1e-12):
        raise PreconditionError("g must map into [-1, 1]")
    support = int(np.count_nonzero(g))
    lamp_size = int(lamp_mask.sum())
    delta = E.sum() / lamp_size

    def conv(am, bm):
        fa = np.fft.fftn(np.asarray(am, dtype=np.float64).reshape(group.factors))
        fb = np.fft.fftn(bm.reshape(group.factors))
        return np.real(np.fft.ifftn(fa * fb)).ravel()

    dev = np.abs(conv(E, g) - delta * conv(lamp_mask, g))
    threshold = alpha ** (2 / 3) * lamp_size
    exceptions = int((dev > threshold + 1e-9).sum())
    bound = alpha ** (2 / 3) * support
    return ConvDeviationReport(
        exceptions=exceptions,
        bound=bound,
        deviation_threshold=threshold,
        max_deviation=float(dev.max()) if dev.size else 0.0,
        ok=exceptions <= bound,
    )


@dataclass
class IntermediateReport:
    omega1: np.ndarray
    omega2: np.ndarray
    omega_tilde: np.ndarray
    lam_size: int
    alpha: float
    hypothesis_mean_sq: float
    hypothesis_bad_count: int
    part1_ok: bool = field(init=False)
    part2_ok: bool = field(init=False)
    part3_ok: bool = field(init=False)

    def __post_init__(self):
        root = self.alpha**0.5 * self.lam_size
        self.part1_ok = self.omega1.size <= 4 * root
        self.part2_ok = self.omega2.size <= 4 * root
        self.part3_ok = self.omega_tilde.size <= 8 * root


def intermediate_omegas(
    Q: np.ndarray,
    lam: BohrSpec,
    lam_p: BohrSpec,
    lam_pp: BohrSpec,
    alpha: float,
) -> IntermediateReport:
    """Exception sets for the two-scale localization argument.

    Omega_1: translates with large local density drift at either scale;
    Omega_2: translates with a large localized Fourier coefficient;
    Omega_tilde: translates s where (Q - s) ∩ Lambda' fails to be
    (8 alpha^(1/4), eps)-uniform, witnessed by Lambda'' as attendant.
    The report carries the measured hypotheses alongside the bounds.
    """
    group = lam.group
    Q = np.asarray(Q, dtype=bool)
    lam_mask = bohr_members(lam)
    if np.any(Q & ~lam_mask):
        raise PreconditionError("Q is not contained in the Bohr set")
    lam_idx = np.nonzero(lam_mask)[0]
    lam_size = lam_idx.size
    lamp_mask = bohr_members(lam_p.untranslated())
    lamp_size = int(lamp_mask.sum())
    lampp_size = bohr_size(lam_pp)
    delta = Q.sum() / lam_size
    root = alpha**0.5
    quarter = alpha**0.25

    dens_p = local_density_table(Q, lam_p) / lamp_size
    dens_pp = local_density_table(Q, lam_pp) / lampp_size
    sq_dev = np.abs(dens_pp - delta) ** 2
    # windowed mean of sq_dev over L' + s, all s at once
    win = np.zeros(group.N)
    for t in np.nonzero(lamp_mask)[0]:
        win += sq_dev[group.translation_perm(int(t))]
    win /= lamp_size

    omega1 = lam_idx[(np.abs(dens_p[lam_idx] - delta) >= 4 * root) | (win[lam_idx] >= 4 * root)]

    qf = Q.astype(np.float64)
    rows = np.empty((lam_size, group.N))
    for row, s in enumerate(lam_idx):
        shifted = lamp_mask[group.translation_perm(group.negate_index(int(s)))].astype(np.float64)
        rows[row] = (qf - delta) * shifted
    axes = tuple(range(1, 1 + len(group.factors)))
    spectra = np.fft.fftn(rows.reshape((lam_size,) + group.factors), axes=axes)
    sup_norms = np.abs(spectra).reshape(lam_size, -1).max(axis=1)
    omega2 = lam_idx[sup_norms >= 4 * quarter * lamp_size]

    tilde = []
    for s in lam_idx:
        q_s = qf[group.translation_perm(int(s))].astype(bool) & lamp_mask  # (Q - s) ∩ L'
        report = ae_uniformity(q_s, lam_p.untranslated(), lam_pp.untranslated(), 8 * quarter)
        if not report.uniform:
            tilde.append(int(s))
    omega_tilde = np.asarray(tilde, dtype=np.int64)

    hyp_mean_sq = float(np.mean(np.abs(dens_pp[lam_idx] - delta) ** 2))
    rows_pp = np.empty((lam_size, group.N))
    lampp_mask = bohr_members(lam_pp.untranslated()).astype(np.float64)
    for row, s in enumerate(lam_idx):
        shifted = lampp_mask[group.translation_perm(group.negate_index(int(s)))]
        rows_pp[row] = (qf - delta) * shifted
    spectra_pp = np.fft.fftn(rows_pp.reshape((lam_size,) + group.factors), axes=axes)
    hyp_bad = int((np.abs(spectra_pp).reshape(lam_size, -1).max(axis=1) >= alpha * lampp_size).sum())

    return IntermediateReport(
        omega1=omega1,
        omega2=omega2,
        omega_tilde=omega_tilde,
        lam_size=lam_size,
        alpha=float(alpha),
        hypothesis_mean_sq=hyp_mean_sq,
        hypothesis_bad_count=hyp_bad,
    )
