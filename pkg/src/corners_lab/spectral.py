"""Discrete Fourier transform, convolution and balanced functions on G.

Conventions are unnormalized in the forward direction:

    fhat(xi) = sum_x f(x) e(-<xi, x>),       e(t) = exp(2 pi i t)

so Parseval reads sum |f|^2 = (1/N) sum |fhat|^2 and the transform of a
convolution is the pointwise product of transforms.  Characters share the
mixed-radix indexing of elements, which makes the transform a tensor
product of per-factor cyclic DFTs; it is evaluated with numpy's FFT and
cross-checked against the definitional double loop in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from corners_lab.groups import Character, GroupSpec

__all__ = [
    "DenseMap",
    "DenseMap2D",
    "dft",
    "idft",
    "convolve",
    "balanced",
    "balanced2d",
    "max_fourier_coeff",
    "values_to_json",
    "values_from_json",
]


@dataclass
class DenseMap:
    """A complex-valued function on G, one value per element index."""

    group: GroupSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.group.N,):
            raise ValueError(f"expected {self.group.N} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values.view(np.float64))):
            raise ValueError("values must be finite")

    @classmethod
    def indicator(cls, group: GroupSpec, mask: np.ndarray) -> "DenseMap":
        return cls(group, np.asarray(mask, dtype=np.complex128))

    def l2_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


@dataclass
class DenseMap2D:
    """A complex-valued function on G x G, stored as an (N, N) array."""

    group: GroupSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.complex128)
        n = self.group.N
        if self.values.shape == (n * n,):
            self.values = self.values.reshape(n, n)
        if self.values.shape != (n, n):
            raise ValueError(f"expected an ({n}, {n}) array, got {self.values.shape}")
        if not np.all(np.isfinite(self.values.view(np.float64))):
            raise ValueError("values must be finite")


def dft(f: DenseMap) -> DenseMap:
    """Forward transform; entry xi is sum_x f(x) e(-<xi, x>)."""
    shaped = f.values.reshape(f.group.factors)
    return DenseMap(f.group, np.fft.fftn(shaped).ravel())


def idft(fhat: DenseMap) -> DenseMap:
    """Inverse of :func:`dft`; recovers f exactly up to float error."""
    shaped = fhat.values.reshape(fhat.group.factors)
    return DenseMap(fhat.group, np.fft.ifftn(shaped).ravel())


def convolve(f: DenseMap, g: DenseMap) -> DenseMap:
    """(f*g)(n) = sum_s f(s) g(n-s), evaluated through the transform."""
    if f.group != g.group:
        raise ValueError("convolution operands live on different groups")
    fh = np.fft.fftn(f.values.reshape(f.group.factors))
    gh = np.fft.fftn(g.values.reshape(g.group.factors))
    return DenseMap(f.group, np.fft.ifftn(fh * gh).ravel())


def balanced(A: np.ndarray, lam: np.ndarray, group: GroupSpec) -> DenseMap:
    """Balanced function of A inside lam: (A(s) - delta) * lam(s).

    delta is the relative density |A| / |lam|; the result sums to zero and
    vanishes off lam.
    """
    A = np.asarray(A, dtype=bool)
    lam = np.asarray(lam, dtype=bool)
    if A.shape != (group.N,) or lam.shape != (group.N,):
        raise ValueError("masks must have one entry per group element")
    if not lam.any():
        raise ValueError("ambient set is empty")
    if np.any(A & ~lam):
        raise ValueError("A is not contained in the ambient set")
    delta = A.sum() / lam.sum()
    return DenseMap(group, (A.astype(np.complex128) - delta) * lam)


def balanced2d(A: np.ndarray, E1: np.ndarray, E2: np.ndarray, group: GroupSpec | None = None) -> np.ndarray:
    """Balanced function of a planar set A inside the product E1 x E2.

    Accepts and returns plain (n1, n2) float arrays so it works for both
    group and grid frames; wrap in :class:`DenseMap2D` when the frame is a
    group.
    """
    A = np.asarray(A, dtype=bool)
    E1 = np.asarray(E1, dtype=bool)
    E2 = np.asarray(E2, dtype=bool)
    if A.shape != (E1.size, E2.size):
        raise ValueError("A must be indexed by (E1 side, E2 side)")
    box = np.outer(E1, E2)
    if np.any(A & ~box):
        raise ValueError("A is not contained in E1 x E2")
    denom = int(E1.sum()) * int(E2.sum())
    if denom == 0:
        raise ValueError("E1 x E2 is empty")
    delta = A.sum() / denom
    return (A.astype(np.float64) - delta) * box


def max_fourier_coeff(f: DenseMap) -> tuple[Character, float]:
    """A character maximizing |fhat| and the maximum magnitude.

    Ties break toward the smallest character index.
    """
    mags = np.abs(dft(f).values)
    best = int(np.argmax(mags))  # argmax returns the first maximizer
    return f.group.character_by_index(best), float(mags[best])


def values_to_json(values: np.ndarray) -> list[list[float]]:
    """Serialize complex values as [re, im] pairs in element-index order."""
    flat = np.asarray(values, dtype=np.complex128).ravel()
    return [[float(v.real), float(v.imag)] for v in flat]


def values_from_json(data: list[list[float]]) -> np.ndarray:
    return np.asarray([complex(re, im) for re, im in data], dtype=np.complex128)
