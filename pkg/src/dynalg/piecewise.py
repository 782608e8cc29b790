"""Compactly supported piecewise polynomials in one real variable.

Every time profile in the package (densities, potential windows, loops,
test paths) is a :class:`PiecewisePoly`.  Each piece stores its
coefficients in the local variable ``u = t - lo``, which keeps products,
shifts and integrals free of the cancellation that absolute-time
coefficients suffer away from the origin.  The tuple constructor accepts
absolute-time coefficients; :meth:`PiecewisePoly.from_local` takes local
ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

__all__ = ["Piece", "PiecewisePoly", "refine", "shift_coeffs"]


def shift_coeffs(coeffs: Sequence[float], origin: float) -> np.ndarray:
    """Coefficients of ``q(u) = p(u + origin)``."""
    c = np.asarray(coeffs, dtype=float)
    if origin == 0.0 or c.size <= 1:
        return c.copy()
    # q_k = Σ_{j≥k} C(j, k) p_j origin^{j-k}
    n = c.size
    j = np.arange(n)
    binom = _pascal(n)
    powers = np.triu(float(origin) ** np.clip(j[None, :] - j[:, None], 0, None))
    return (binom * powers) @ c


_PASCAL: dict[int, np.ndarray] = {}


def _pascal(n: int) -> np.ndarray:
    """Upper-triangular ``C(j, k)`` indexed ``[k, j]``."""
    if n not in _PASCAL:
        m = np.zeros((n, n))
        for jj in range(n):
            for kk in range(jj + 1):
                m[kk, jj] = math.comb(jj, kk)
        _PASCAL[n] = m
    return _PASCAL[n]


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    c = [float(v) for v in coeffs]
    while len(c) > 1 and c[-1] == 0.0:
        c.pop()
    return tuple(c) if c else (0.0,)


def _local_integral(coeffs: np.ndarray, length: float) -> float:
    """Integral over ``[0, length]`` of a polynomial in the local variable."""
    c = np.asarray(coeffs, dtype=float)
    k = np.arange(1, c.size + 1)
    return float(np.sum(c * length**k / k))


@dataclass(frozen=True)
class Piece:
    """Polynomial ``Σ_k local[k] (t - lo)^k`` on ``[lo, hi)``."""

    lo: float
    hi: float
    local: tuple[float, ...]

    @property
    def coeffs(self) -> np.ndarray:
        """Coefficients in absolute ``t``."""
        return shift_coeffs(self.local, -self.lo)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def integral(self, weight_power: int = 0) -> float:
        """``∫_lo^hi t**weight_power p(t) dt``."""
        c = np.asarray(self.local, dtype=float)
        if weight_power:
            c = P.polymul(c, P.polypow([self.lo, 1.0], weight_power))
        return _local_integral(c, self.length)

    def value_at(self, t) -> np.ndarray:
        return P.polyval(np.asarray(t, dtype=float) - self.lo, self.local)

    def end_values(self) -> tuple[float, float]:
        """Limits at ``lo`` from the right and ``hi`` from the left."""
        return float(self.local[0]), float(P.polyval(self.length, self.local))

    def rebased(self, origin: float) -> np.ndarray:
        """Coefficients in ``t - origin``."""
        return shift_coeffs(self.local, origin - self.lo)

    @property
    def degree(self) -> int:
        return len(self.local) - 1


@dataclass(frozen=True)
class PiecewisePoly:
    """Piecewise polynomial that vanishes identically outside its pieces.

    Pieces are half-open intervals ``[lo, hi)``, sorted and pairwise
    disjoint.  Zero-width pieces and identically zero polynomials are
    dropped on construction, so the empty profile is the zero function.
    """

    pieces: tuple[Piece, ...] = ()

    def __post_init__(self):
        cleaned = []
        for pc in self.pieces:
            if not isinstance(pc, Piece):
                lo, hi, coeffs = pc
                pc = Piece(float(lo), float(hi), _trim(shift_coeffs(coeffs, float(lo))))
            else:
                pc = Piece(float(pc.lo), float(pc.hi), _trim(pc.local))
            if not (np.isfinite(pc.lo) and np.isfinite(pc.hi)):
                raise ValueError("piece bounds must be finite")
            if pc.hi < pc.lo:
                raise ValueError(f"reversed piece [{pc.lo}, {pc.hi})")
            if pc.hi == pc.lo or all(v == 0.0 for v in pc.local):
                continue
            cleaned.append(pc)
        cleaned.sort(key=lambda pc: pc.lo)
        for left, right in zip(cleaned, cleaned[1:]):
            if right.lo < left.hi:
                raise ValueError(
                    f"overlapping pieces [{left.lo}, {left.hi}) and [{right.lo}, {right.hi})"
                )
        object.__setattr__(self, "pieces", tuple(cleaned))

    # -- construction -----------------------------------------------------
    @classmethod
    def from_pieces(cls, pieces: Iterable) -> "PiecewisePoly":
        return cls(tuple(pieces))

    @classmethod
    def from_local(cls, pieces: Iterable) -> "PiecewisePoly":
        """Pieces ``(lo, hi, local)`` with coefficients in ``t - lo``."""
        return cls(tuple(Piece(float(lo), float(hi), _trim(c)) for lo, hi, c in pieces))

    @classmethod
    def constant(cls, value: float, lo: float, hi: float) -> "PiecewisePoly":
        return cls(((lo, hi, (value,)),))

    @classmethod
    def zero(cls) -> "PiecewisePoly":
        return cls(())

    # -- basic queries ----------------------------------------------------
    def is_zero(self) -> bool:
        return not self.pieces

    @property
    def support(self) -> tuple[float, float] | None:
        if not self.pieces:
            return None
        return self.pieces[0].lo, self.pieces[-1].hi

    @property
    def breakpoints(self) -> np.ndarray:
        pts = [v for pc in self.pieces for v in (pc.lo, pc.hi)]
        return np.unique(np.asarray(pts, dtype=float))

    @property
    def degree(self) -> int:
        return max((pc.degree for pc in self.pieces), default=0)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for pc in self.pieces:
            mask = (t >= pc.lo) & (t < pc.hi)
            if np.any(mask):
                out[mask] = pc.value_at(t[mask])
        return out if out.ndim else float(out)

    def piece_at(self, t: float) -> Piece | None:
        for pc in self.pieces:
            if pc.lo <= t < pc.hi:
                return pc
        return None

    # -- integrals --------------------------------------------------------
    def integral(self) -> float:
        return float(sum(pc.integral() for pc in self.pieces))

    def moment(self, k: int) -> float:
        """``∫ t**k p(t) dt`` over the support."""
        return float(sum(pc.integral(k) for pc in self.pieces))

    def integral_between(self, lo: float, hi: float) -> float:
        return self.restricted(lo, hi).integral()

    # -- algebra ----------------------------------------------------------
    def __neg__(self) -> "PiecewisePoly":
        return self.scaled(-1.0)

    def scaled(self, factor: float) -> "PiecewisePoly":
        if factor == 0.0:
            return PiecewisePoly()
        return PiecewisePoly(
            tuple(Piece(pc.lo, pc.hi, tuple(factor * c for c in pc.local)) for pc in self.pieces)
        )

    def __mul__(self, other):
        if isinstance(other, PiecewisePoly):
            return self.product(other)
        return self.scaled(float(other))

    __rmul__ = __mul__

    def __add__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        if not isinstance(other, PiecewisePoly):
            return NotImplemented
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        out = []
        for lo, hi, (a, b) in refine((self, other)):
            out.append((lo, hi, P.polyadd(a, b)))
        return PiecewisePoly.from_local(_merge_zero_gaps(out))

    def __sub__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return self + (-other)

    def product(self, other: "PiecewisePoly") -> "PiecewisePoly":
        out = []
        for lo, hi, (a, b) in refine((self, other), hull="intersection"):
            out.append((lo, hi, P.polymul(a, b)))
        return PiecewisePoly.from_local(out)

    def shifted(self, tau: float) -> "PiecewisePoly":
        """The profile ``t ↦ p(t - tau)``."""
        if tau == 0.0:
            return self
        return PiecewisePoly(tuple(Piece(pc.lo + tau, pc.hi + tau, pc.local) for pc in self.pieces))

    def derivative(self) -> "PiecewisePoly":
        return PiecewisePoly(
            tuple(Piece(pc.lo, pc.hi, _trim(P.polyder(pc.local))) for pc in self.pieces)
        )

    def restricted(self, lo: float, hi: float) -> "PiecewisePoly":
        out = []
        for pc in self.pieces:
            a, b = max(pc.lo, lo), min(pc.hi, hi)
            if b > a:
                out.append(Piece(a, b, tuple(pc.rebased(a))))
        return PiecewisePoly(tuple(out))

    def compose(self, outer: Sequence[float], lo: float, hi: float) -> "PiecewisePoly":
        """``outer(p(t))`` restricted to ``[lo, hi)``.

        Outside the pieces of ``p`` the inner value is zero, so the result
        equals ``outer(0)`` there; ``lo``/``hi`` keep the result compact.
        """
        outer_poly = Polynomial(np.asarray(outer, dtype=float))
        out = []
        for a, b, (c,) in refine((self,), lo=lo, hi=hi):
            out.append((a, b, outer_poly(Polynomial(c)).coef))
        return PiecewisePoly.from_local(out)

    # -- comparison -------------------------------------------------------
    def allclose(self, other: "PiecewisePoly", atol: float = 1e-12) -> bool:
        """Pointwise coefficient comparison on the common refinement."""
        for lo, hi, (a, b) in refine((self, other)):
            diff = P.polysub(a, b)
            scale = max(1.0, hi - lo)
            if np.any(np.abs(diff) * scale ** np.arange(diff.size) > atol):
                return False
        return True


def _merge_zero_gaps(pieces):
    return tuple((lo, hi, c) for lo, hi, c in pieces if np.any(np.asarray(c) != 0.0))


def refine(
    pps: Sequence[PiecewisePoly],
    lo: float | None = None,
    hi: float | None = None,
    hull: str = "union",
):
    """Common refinement of several profiles.

    Yields ``(a, b, [coeffs_0, coeffs_1, ...])`` over elementary intervals,
    coefficients taken in ``t - a``,
    on which every profile is a single polynomial (zero polynomial where a
    profile has no piece).  By default the intervals cover the union of
    the supports; ``hull="intersection"`` keeps only intervals where every
    profile has a piece, and explicit ``lo``/``hi`` cover that window.
    """
    pts = [lo, hi] if lo is not None else []
    for pp in pps:
        pts.extend(pp.breakpoints.tolist())
    if not pts:
        return []
    pts = np.unique(np.asarray(pts, dtype=float))
    if lo is not None:
        pts = pts[(pts >= lo) & (pts <= hi)]
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (a + b)
        coeffs = []
        present = 0
        for pp in pps:
            pc = pp.piece_at(mid)
            if pc is None:
                coeffs.append(np.zeros(1))
            else:
                coeffs.append(pc.rebased(a))
                present += 1
        if hull == "intersection" and present < len(pps):
            continue
        if lo is None and hull == "union" and present == 0:
            continue
        out.append((float(a), float(b), coeffs))
    return out
