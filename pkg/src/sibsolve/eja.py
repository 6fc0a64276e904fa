"""Second-order cone algebra kernel.

Everything downstream is built on the algebra of the cone

    Q^{d+1} = { (bar, head) in R^d x R : ||bar|| <= head },

and on products C = Q^{d+1} x ... x Q^{d+1} of n copies with a common d.
An element ``(bar, head)`` has exactly two eigenvalues,

    lambda_1 = (head + ||bar||) / sqrt(2),
    lambda_2 = (head - ||bar||) / sqrt(2),

with idempotents q_1 = (u, 1)/sqrt(2) and q_2 = (-u, 1)/sqrt(2) where
u = bar/||bar||.  The bilinear product, trace, exponential and spectral
norm used by the game solver all reduce to closed forms in these
quantities; the functions below implement exactly those forms and
nothing more.

All operations are pure functions on immutable values: safe to call from
any number of threads.  Arithmetic is plain float64 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)

# Below this, bar is treated as the zero vector and the idempotent
# direction falls back to the first standard basis vector.  The division
# bar/||bar|| is stable for anything larger (denormal guard only).
_ZERO_BAR_THRESHOLD = 1e-300


@dataclass
class SocElement:
    """One element (bar, head) of R^d x R."""

    bar: np.ndarray
    head: float

    def __post_init__(self):
        self.bar = np.asarray(self.bar, dtype=np.float64)
        if self.bar.ndim != 1 or self.bar.size < 1:
            raise ValueError("bar must be a 1-d vector with at least one entry")
        self.head = float(self.head)
        if not (np.all(np.isfinite(self.bar)) and math.isfinite(self.head)):
            raise ValueError("SocElement entries must be finite")

    @property
    def d(self) -> int:
        return self.bar.shape[0]


@dataclass
class SocSpectrum:
    """Spectral decomposition of a SocElement.

    ``lambda1 >= lambda2`` always; ``u`` is the unit idempotent direction,
    so the element reconstructs as lambda1*q1 + lambda2*q2 with
    q1 = (u, 1)/sqrt(2), q2 = (-u, 1)/sqrt(2).
    """

    lambda1: float
    lambda2: float
    u: np.ndarray


def spectral_decompose(x: SocElement) -> SocSpectrum:
    """Eigenvalues and idempotent direction of a cone element.

    When ``bar`` vanishes the direction is chosen as the first standard
    basis vector, which keeps every downstream output deterministic.
    """
    nrm = float(np.linalg.norm(x.bar))
    if nrm <= _ZERO_BAR_THRESHOLD:
        u = np.zeros(x.d)
        u[0] = 1.0
    else:
        u = x.bar / nrm
    return SocSpectrum(
        lambda1=(x.head + nrm) / SQRT2,
        lambda2=(x.head - nrm) / SQRT2,
        u=u,
    )


def soc_reconstruct(s: SocSpectrum) -> SocElement:
    """Inverse of spectral_decompose: lambda1*q1 + lambda2*q2."""
    bar = (s.lambda1 - s.lambda2) / SQRT2 * s.u
    head = (s.lambda1 + s.lambda2) / SQRT2
    return SocElement(bar, head)


def soc_exp(x: SocElement) -> SocElement:
    """Exponential exp(lambda1)*q1 + exp(lambda2)*q2.

    May return +inf heads for |lambda| beyond ~709; callers that
    accumulate unbounded exponents must normalize in log domain first
    (the game solver does).
    """
    s = spectral_decompose(x)
    e1 = math.exp(s.lambda1)
    e2 = math.exp(s.lambda2)
    bar = (e1 - e2) / SQRT2 * s.u
    head = (e1 + e2) / SQRT2
    # the reconstruction can overshoot the cone boundary by an ulp when
    # exp(lambda2) underflows next to exp(lambda1); membership must hold
    # under the same norm in_cone evaluates
    if math.isfinite(head):
        for _ in range(8):
            nrm = float(np.sqrt(np.einsum("j,j->", bar, bar)))
            if nrm <= head:
                break
            bar = bar * (head / nrm)
    return SocElement(bar, head)


def soc_jordan(x: SocElement, y: SocElement) -> SocElement:
    """Bilinear product (x0*ybar + y0*xbar, x.y) / sqrt(2)."""
    if x.d != y.d:
        raise ValueError(f"dimension mismatch: {x.d} vs {y.d}")
    bar = (x.head * y.bar + y.head * x.bar) / SQRT2
    head = (float(x.bar @ y.bar) + x.head * y.head) / SQRT2
    return SocElement(bar, head)


def soc_identity(d: int) -> SocElement:
    """Identity element (0, sqrt(2)) with both eigenvalues equal to 1."""
    return SocElement(np.zeros(d), SQRT2)


class ProductElement:
    """Concatenation of n SocElements with a common bar dimension d.

    Stored as a (n, d) array of bar parts plus a (n,) array of heads so
    the game solver can treat a full iterate as two contiguous buffers.
    """

    __slots__ = ("bars", "heads")

    def __init__(self, bars, heads):
        bars = np.asarray(bars, dtype=np.float64)
        heads = np.asarray(heads, dtype=np.float64)
        if bars.ndim != 2 or heads.ndim != 1 or bars.shape[0] != heads.shape[0]:
            raise ValueError("bars must be (n, d) and heads (n,)")
        if bars.shape[0] < 1 or bars.shape[1] < 1:
            raise ValueError("need n >= 1 blocks and d >= 1")
        self.bars = bars
        self.heads = heads

    @property
    def n(self) -> int:
        return self.bars.shape[0]

    @property
    def d(self) -> int:
        return self.bars.shape[1]

    @classmethod
    def _wrap(cls, bars, heads) -> "ProductElement":
        """Unchecked constructor for hot paths; inputs must already be
        float64 arrays of matching shape."""
        obj = cls.__new__(cls)
        obj.bars = bars
        obj.heads = heads
        return obj

    @classmethod
    def from_blocks(cls, blocks) -> "ProductElement":
        blocks = list(blocks)
        if not blocks:
            raise ValueError("need at least one block")
        d = blocks[0].d
        if any(b.d != d for b in blocks):
            raise ValueError("block dimensions must be homogeneous")
        return cls(np.stack([b.bar for b in blocks]), np.array([b.head for b in blocks]))

    @classmethod
    def identity(cls, n: int, d: int) -> "ProductElement":
        return cls(np.zeros((n, d)), np.full(n, SQRT2))

    @classmethod
    def zero(cls, n: int, d: int) -> "ProductElement":
        return cls(np.zeros((n, d)), np.zeros(n))

    def blocks(self):
        return [SocElement(self.bars[i].copy(), self.heads[i]) for i in range(self.n)]

    def trace(self) -> float:
        # Sum of the 2n eigenvalues; the bar parts cancel block-wise.
        return SQRT2 * float(self.heads.sum())

    def jordan(self, other: "ProductElement") -> "ProductElement":
        _check_compat(self, other)
        bars = (self.heads[:, None] * other.bars + other.heads[:, None] * self.bars) / SQRT2
        heads = (
            np.einsum("ij,ij->i", self.bars, other.bars) + self.heads * other.heads
        ) / SQRT2
        return ProductElement(bars, heads)

    def __repr__(self):
        return f"ProductElement(n={self.n}, d={self.d})"


def _check_compat(x: ProductElement, y: ProductElement):
    if x.bars.shape != y.bars.shape:
        raise ValueError(f"shape mismatch: {x.bars.shape} vs {y.bars.shape}")


def trace_inner(x: ProductElement, y: ProductElement) -> float:
    """Canonical trace inner product; equals the flat Euclidean dot product."""
    _check_compat(x, y)
    return float(np.einsum("ij,ij->", x.bars, y.bars) + x.heads @ y.heads)


def _row_norms(bars: np.ndarray) -> np.ndarray:
    # cheaper than np.linalg.norm(axis=1) for the small arrays in the hot loop
    return np.sqrt(np.einsum("ij,ij->i", bars, bars))


def block_eigenvalues(x: ProductElement):
    """Per-block (lambda1, lambda2) arrays, shape (n,) each."""
    nrms = _row_norms(x.bars)
    return (x.heads + nrms) / SQRT2, (x.heads - nrms) / SQRT2


def spectral_norm(x: ProductElement) -> float:
    """Maximum magnitude over all 2n eigenvalues.

    Per block this is (||bar|| + |head|)/sqrt(2), so a single pass over
    row norms suffices.
    """
    nrms = _row_norms(x.bars)
    return float((nrms + np.abs(x.heads)).max() / SQRT2)


def in_cone(x: ProductElement, tol: float) -> bool:
    """True iff every block satisfies ||bar_i|| <= head_i + tol."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    nrms = _row_norms(x.bars)
    return bool(np.all(nrms <= x.heads + tol))


def product_exp(x: ProductElement) -> ProductElement:
    """Block-wise exponential (concatenation of the per-block exponentials)."""
    return ProductElement.from_blocks([soc_exp(b) for b in x.blocks()])
