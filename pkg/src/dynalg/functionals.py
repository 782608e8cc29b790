"""Perturbation functionals, loops, and their exact calculus.

A :class:`Functional` describes a perturbation ``F[x]`` of orbits ``x(t)``::

    F[x] = ∫ f(t)·x(t) dt + c + Σ_k ∫ g_k(t) V_k(x(t) + s_k(t)) dt

with a piecewise-polynomial density ``f``, a constant ``c`` and windowed
catalog potentials ``V_k`` (optionally evaluated along a loop shift
``s_k``).  Units are fixed by ``ħ = 1`` and unit mass.

Two conventions exist for the constant attached to a linear functional.
The default (``"consistent"``) is ``h(f) = -K(f, f)/4`` with the kernel
``K(f, g) = ∬ |s - s'| f(s)·g(s') ds ds'``; ``"printed"`` gives
``+K(f, f)/2``.  Only the consistent choice makes moment-equivalent
densities produce the same operation, see :func:`h_constant`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate

from .errors import DimensionMismatch, DomainTooSmall, LoopError, MomentMismatch
from .piecewise import Piece, PiecewisePoly, refine

__all__ = [
    "PolynomialShape",
    "GaussianShape",
    "PotentialTerm",
    "LoopPath",
    "SampledPath",
    "Functional",
    "moments",
    "kernel_integral",
    "h_constant",
    "delta_pairing",
    "linear_functional",
    "constant_functional",
    "add",
    "moment_equivalent",
    "loop_from_difference",
    "boundary_action",
    "shift_by_loop",
    "time_translate",
    "evaluate",
    "H_CONVENTIONS",
]

H_CONVENTIONS = ("consistent", "printed")

Density = Union[PiecewisePoly, Sequence[PiecewisePoly]]


def _as_tuple(f: Density) -> tuple[PiecewisePoly, ...]:
    if isinstance(f, PiecewisePoly):
        return (f,)
    return tuple(f)


def _check_dims(f, g):
    if len(f) != len(g):
        raise DimensionMismatch(f"dimension {len(f)} vs {len(g)}")


# ---------------------------------------------------------------------------
# potential catalog


@dataclass(frozen=True)
class PolynomialShape:
    """``V(x) = Σ_i p(x_i)`` with ``p`` of degree at most four."""

    coeffs: tuple[float, ...]
    kind: str = field(default="polynomial", init=False, repr=False)

    def __post_init__(self):
        c = tuple(float(v) for v in self.coeffs)
        if len(c) > 5:
            raise ValueError("polynomial potentials are limited to degree 4")
        object.__setattr__(self, "coeffs", c)

    def values(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return P.polyval(points, self.coeffs).sum(axis=-1)

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.coeffs)

    def params(self) -> dict:
        return {"coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class GaussianShape:
    """``V(x) = A exp(-|x - c|² / (2 w²))``."""

    amplitude: float
    center: tuple[float, ...]
    width: float
    kind: str = field(default="gaussian", init=False, repr=False)

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("Gaussian width must be positive")
        center = self.center
        if np.isscalar(center):
            center = (center,)
        object.__setattr__(self, "center", tuple(float(v) for v in center))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "width", float(self.width))

    def values(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        r2 = ((points - np.asarray(self.center)) ** 2).sum(axis=-1)
        return self.amplitude * np.exp(-r2 / (2.0 * self.width**2))

    def is_zero(self) -> bool:
        return self.amplitude == 0.0

    def params(self) -> dict:
        return {"amplitude": self.amplitude, "center": list(self.center), "width": self.width}


Shape = Union[PolynomialShape, GaussianShape]


# ---------------------------------------------------------------------------
# paths


def _continuity_defect(pp: PiecewisePoly) -> float:
    """Largest jump of ``pp`` across its breakpoints (outside = 0)."""
    worst = 0.0
    prev_hi, prev_val = None, 0.0
    for pc in pp.pieces:
        start, end = pc.end_values()
        left = prev_val if prev_hi == pc.lo else 0.0
        worst = max(worst, abs(start - left))
        if prev_hi is not None and prev_hi != pc.lo:
            worst = max(worst, abs(prev_val))
        prev_hi, prev_val = pc.hi, end
    return max(worst, abs(prev_val))


@dataclass(frozen=True)
class LoopPath:
    """Compactly supported C¹ deformation ``x₀(t)`` of orbits."""

    components: tuple[PiecewisePoly, ...]
    tol: float = field(default=1e-9, compare=False, repr=False)

    def __post_init__(self):
        comps = _as_tuple(self.components)
        object.__setattr__(self, "components", comps)
        for comp in comps:
            scale = max(1.0, max((abs(v) for pc in comp.pieces for v in pc.local), default=0.0))
            if _continuity_defect(comp) > self.tol * scale:
                raise LoopError("loop is discontinuous")
            if _continuity_defect(comp.derivative()) > self.tol * scale:
                raise LoopError("loop velocity is discontinuous")

    @classmethod
    def zero(cls, dim: int = 1) -> "LoopPath":
        return cls(tuple(PiecewisePoly() for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.components)

    @cached_property
    def velocity(self) -> tuple[PiecewisePoly, ...]:
        return tuple(c.derivative() for c in self.components)

    @cached_property
    def acceleration(self) -> tuple[PiecewisePoly, ...]:
        return tuple(c.derivative() for c in self.velocity)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    @property
    def support(self):
        return _hull(c.support for c in self.components)

    def __call__(self, t) -> np.ndarray:
        """Values with the component axis last."""
        return np.stack([np.asarray(c(t), dtype=float) for c in self.components], axis=-1)

    def __add__(self, other: "LoopPath") -> "LoopPath":
        _check_dims(self.components, other.components)
        return LoopPath(tuple(a + b for a, b in zip(self.components, other.components)))

    def shifted(self, tau: float) -> "LoopPath":
        return LoopPath(tuple(c.shifted(tau) for c in self.components))


@dataclass(frozen=True)
class SampledPath:
    """A test orbit ``x(t)`` defined on ``interval``."""

    components: tuple[PiecewisePoly, ...]
    interval: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "components", _as_tuple(self.components))
        object.__setattr__(self, "interval", (float(self.interval[0]), float(self.interval[1])))

    @property
    def dim(self) -> int:
        return len(self.components)

    def plus_loop(self, loop: LoopPath) -> "SampledPath":
        _check_dims(self.components, loop.components)
        return SampledPath(tuple(a + b for a, b in zip(self.components, loop.components)), self.interval)

    def velocity(self) -> tuple[PiecewisePoly, ...]:
        return tuple(c.derivative() for c in self.components)


def _hull(supports):
    supports = [s for s in supports if s is not None]
    if not supports:
        return None
    return min(s[0] for s in supports), max(s[1] for s in supports)


# ---------------------------------------------------------------------------
# functionals


@dataclass(frozen=True)
class PotentialTerm:
    """``∫ window(t) · V(x(t) + shift(t)) dt``."""

    window: PiecewisePoly
    shape: Shape
    shift: LoopPath | None = None

    def __post_init__(self):
        if self.shift is not None and self.shift.is_zero():
            object.__setattr__(self, "shift", None)

    def is_zero(self) -> bool:
        return self.window.is_zero() or self.shape.is_zero()

    def with_window(self, window: PiecewisePoly) -> "PotentialTerm":
        return PotentialTerm(window, self.shape, self.shift)


@dataclass(frozen=True)
class Functional:
    """Perturbation functional; immutable and hashable by value."""

    dim: int = 1
    density: tuple[PiecewisePoly, ...] = ()
    constant: float = 0.0
    potentials: tuple[PotentialTerm, ...] = ()

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be at least 1")
        density = _as_tuple(self.density) if self.density else ()
        if not density:
            density = tuple(PiecewisePoly() for _ in range(self.dim))
        if len(density) != self.dim:
            raise DimensionMismatch(f"density has {len(density)} components, dim is {self.dim}")
        object.__setattr__(self, "density", density)
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "potentials", _merge_potentials(self.potentials))
        for term in self.potentials:
            if isinstance(term.shape, GaussianShape) and len(term.shape.center) != self.dim:
                raise DimensionMismatch("Gaussian center does not match dim")
            if term.shift is not None and term.shift.dim != self.dim:
                raise DimensionMismatch("shift loop does not match dim")

    @property
    def is_linear(self) -> bool:
        return not self.potentials

    @property
    def is_constant(self) -> bool:
        return self.is_linear and all(c.is_zero() for c in self.density)

    @property
    def support(self) -> tuple[float, float] | None:
        return _hull([c.support for c in self.density] + [t.window.support for t in self.potentials])

    def __add__(self, other: "Functional") -> "Functional":
        return add(self, other)

    def __neg__(self) -> "Functional":
        return Functional(
            self.dim,
            tuple(-c for c in self.density),
            -self.constant,
            tuple(t.with_window(-t.window) for t in self.potentials),
        )

    def __sub__(self, other: "Functional") -> "Functional":
        return add(self, -other)

    def with_constant(self, constant: float) -> "Functional":
        return Functional(self.dim, self.density, constant, self.potentials)


def _merge_potentials(terms) -> tuple[PotentialTerm, ...]:
    merged: dict = {}
    for term in terms:
        key = (term.shape, term.shift)
        merged[key] = merged[key] + term.window if key in merged else term.window
    out = []
    for (shape, shift), window in merged.items():
        term = PotentialTerm(window, shape, shift)
        if not term.is_zero():
            out.append(term)
    return tuple(out)


# ---------------------------------------------------------------------------
# moments and kernels


def moments(f: Density) -> tuple[np.ndarray, np.ndarray]:
    """Zeroth and first moments ``(∫f, ∫t·f)`` per component."""
    f = _as_tuple(f)
    a = np.array([c.moment(0) for c in f])
    b = np.array([c.moment(1) for c in f])
    return a, b


def _diagonal_block(p_local: np.ndarray, q_local: np.ndarray, length: float) -> float:
    """``∬_{[0,L]²} |u - v| p(u) q(v) du dv`` in closed form."""
    q0 = P.polyint(q_local)
    q1 = P.polyint(P.polymulx(q_local))
    q0_end = P.polyval(length, q0)
    q1_end = P.polyval(length, q1)
    # inner(u) = 2u·Q0(u) - 2·Q1(u) + Q1(L) - u·Q0(L)
    inner = P.polysub(2.0 * P.polymulx(q0), 2.0 * q1)
    inner = P.polyadd(inner, [q1_end, -q0_end])
    anti = P.polyint(P.polymul(p_local, inner))
    return float(P.polyval(length, anti))


def _kernel_1d(f: PiecewisePoly, g: PiecewisePoly) -> float:
    cells = refine((f, g))
    if not cells:
        return 0.0
    diag = 0.0
    m0f, m1f, m0g, m1g = (np.zeros(len(cells)) for _ in range(4))
    for i, (lo, hi, (pf, pg)) in enumerate(cells):
        diag += _diagonal_block(pf, pg, hi - lo)
        pf_piece, pg_piece = Piece(lo, hi, tuple(pf)), Piece(lo, hi, tuple(pg))
        m0f[i], m1f[i] = pf_piece.integral(), pf_piece.integral(1)
        m0g[i], m1g[i] = pg_piece.integral(), pg_piece.integral(1)
    before_f0 = np.concatenate([[0.0], np.cumsum(m0f)[:-1]])
    before_f1 = np.concatenate([[0.0], np.cumsum(m1f)[:-1]])
    before_g0 = np.concatenate([[0.0], np.cumsum(m0g)[:-1]])
    before_g1 = np.concatenate([[0.0], np.cumsum(m1g)[:-1]])
    # f earlier than g: |s - s'| = s' - s;  g earlier than f: s - s'.
    off = np.sum(before_f0 * m1g - before_f1 * m0g) + np.sum(before_g0 * m1f - before_g1 * m0f)
    return float(diag + off)


def kernel_integral(f: Density, g: Density) -> float:
    """``K(f, g) = ∬ |s - s'| f(s)·g(s') ds ds'`` summed over components."""
    f, g = _as_tuple(f), _as_tuple(g)
    _check_dims(f, g)
    return float(sum(_kernel_1d(a, b) for a, b in zip(f, g)))


def h_constant(f: Density, convention: str = "consistent") -> float:
    """Canonical constant attached to the linear functional with density ``f``.

    ``"consistent"`` returns ``-K(f, f)/4``: with it the time-ordered
    exponential of ``∫ f·Q(t)`` is exactly the Weyl operator
    ``exp(i(a·Q + b·P))``, so the constant of ``F_f + F_g`` picks up
    ``-⟨f, Δg⟩/2`` when ``f`` is later than ``g``.  ``"printed"`` returns
    ``+K(f, f)/2`` and is kept for comparison only.
    """
    k = kernel_integral(f, f)
    if convention == "consistent":
        return -0.25 * k
    if convention == "printed":
        return 0.5 * k
    raise ValueError(f"unknown h convention {convention!r}")


def delta_pairing(f: Density, g: Density) -> float:
    """``⟨f, Δg⟩ = ∬ f(s)·(s' - s)·g(s') ds ds'``.

    The kernel separates on every pair of pieces, so the value is the
    sum of ``M0(p)M1(q) - M1(p)M0(q)`` over piece pairs.
    """
    f, g = _as_tuple(f), _as_tuple(g)
    _check_dims(f, g)
    total = 0.0
    for a, b in zip(f, g):
        if a.is_zero() or b.is_zero():
            continue
        m0f = np.array([pc.integral() for pc in a.pieces])
        m1f = np.array([pc.integral(1) for pc in a.pieces])
        m0g = np.array([pc.integral() for pc in b.pieces])
        m1g = np.array([pc.integral(1) for pc in b.pieces])
        total += float(np.sum(np.outer(m0f, m1g) - np.outer(m1f, m0g)))
    return total


# ---------------------------------------------------------------------------
# constructors and algebra


def linear_functional(
    f: Density,
    constant: float | None = None,
    convention: str = "consistent",
    dim: int = 1,
) -> Functional:
    """``F_f[x] = ∫ f·x dt + c``.

    ``constant=None`` selects the canonical ``h(f)`` of the given
    convention; a number is used verbatim.  ``dim`` only matters for an
    empty density, which yields a central functional.
    """
    f = _as_tuple(f)
    if not f:
        return Functional(dim, (), 0.0 if constant is None else float(constant))
    c = h_constant(f, convention) if constant is None else float(constant)
    return Functional(len(f), f, c)


def constant_functional(value: float, dim: int = 1) -> Functional:
    return Functional(dim, (), float(value))


def add(F1: Functional, F2: Functional) -> Functional:
    if F1.dim != F2.dim:
        raise DimensionMismatch(f"dimension {F1.dim} vs {F2.dim}")
    return Functional(
        F1.dim,
        tuple(a + b for a, b in zip(F1.density, F2.density)),
        F1.constant + F2.constant,
        F1.potentials + F2.potentials,
    )


def moment_equivalent(f: Density, f_prime: Density, rtol: float = 1e-12) -> bool:
    f, f_prime = _as_tuple(f), _as_tuple(f_prime)
    if len(f) != len(f_prime):
        return False
    a, b = moments(f)
    a2, b2 = moments(f_prime)
    scale = max(1.0, *np.abs(np.concatenate([a, b, a2, b2])))
    return bool(np.all(np.abs(a - a2) <= rtol * scale) and np.all(np.abs(b - b2) <= rtol * scale))


def _loop_component(h: PiecewisePoly) -> PiecewisePoly:
    """``x(t) = ∫_{-∞}^t (t - s) h(s) ds`` for a density with vanishing moments."""
    pieces = []
    c0 = c1 = 0.0  # running ∫h and ∫s·h up to the current point
    prev_hi = None
    for pc in h.pieces:
        if prev_hi is not None and pc.lo > prev_hi:
            pieces.append((prev_hi, pc.lo, (prev_hi * c0 - c1, c0)))
        q = np.asarray(pc.local, dtype=float)
        h0 = P.polyadd(P.polyint(q), [c0])  # ∫h up to t, in u = t - lo
        h1 = P.polyadd(P.polyint(P.polymul([pc.lo, 1.0], q)), [c1])
        pieces.append((pc.lo, pc.hi, P.polysub(P.polymul([pc.lo, 1.0], h0), h1)))
        c0 = float(P.polyval(pc.length, h0))
        c1 = float(P.polyval(pc.length, h1))
        prev_hi = pc.hi
    return PiecewisePoly.from_local(pieces)


def loop_from_difference(f: Density, f_prime: Density) -> LoopPath:
    """Loop with ``ẍ₀ = f' - f`` joining two moment-equivalent densities."""
    f, f_prime = _as_tuple(f), _as_tuple(f_prime)
    _check_dims(f, f_prime)
    if not moment_equivalent(f, f_prime):
        raise MomentMismatch("zeroth/first moments differ; the loop would not close")
    return LoopPath(tuple(_loop_component(b - a) for a, b in zip(f, f_prime)))


def boundary_action(loop: LoopPath) -> Functional:
    """Boundary action of a loop after partial integration.

    Density ``-ẍ₀`` and constant ``½∫ẋ₀²``; the constant is explicit.
    """
    kinetic = 0.5 * sum(v.product(v).integral() for v in loop.velocity)
    return Functional(loop.dim, tuple(-a for a in loop.acceleration), kinetic)


def shift_by_loop(F: Functional, loop: LoopPath) -> Functional:
    """``F^{x₀}[x] = F[x + x₀]``."""
    if F.dim != loop.dim:
        raise DimensionMismatch(f"dimension {F.dim} vs {loop.dim}")
    if loop.is_zero():
        return F
    extra = sum(f.product(x).integral() for f, x in zip(F.density, loop.components))
    terms = tuple(
        PotentialTerm(t.window, t.shape, loop if t.shift is None else t.shift + loop)
        for t in F.potentials
    )
    return Functional(F.dim, F.density, F.constant + extra, terms)


def time_translate(F: Functional, tau: float) -> Functional:
    """Shift every time profile of ``F`` by ``tau``."""
    terms = tuple(
        PotentialTerm(t.window.shifted(tau), t.shape, None if t.shift is None else t.shift.shifted(tau))
        for t in F.potentials
    )
    return Functional(F.dim, tuple(c.shifted(tau) for c in F.density), F.constant, terms)


# ---------------------------------------------------------------------------
# evaluation on paths


def _term_on_path(term: PotentialTerm, x: SampledPath, epsabs: float) -> float:
    comps = x.components if term.shift is None else x.plus_loop(term.shift).components
    lo, hi = term.window.support
    if isinstance(term.shape, PolynomialShape):
        total = 0.0
        for comp in comps:
            total += term.window.product(comp.compose(term.shape.coeffs, lo, hi)).integral()
        return total

    breaks = np.unique(np.concatenate([c.breakpoints for c in comps] + [np.zeros(0)]))

    def integrand(t):
        pts = np.array([c(t) for c in comps])
        return term.window(t) * float(term.shape.values(pts))

    total = 0.0
    pieces = term.window.pieces
    for pc in pieces:
        inner = breaks[(breaks > pc.lo) & (breaks < pc.hi)]
        val, _ = integrate.quad(
            integrand,
            pc.lo,
            pc.hi,
            points=inner if inner.size else None,
            epsabs=epsabs / len(pieces),
            epsrel=1e-13,
            limit=400,
        )
        total += val
    return total


def evaluate(F: Functional, x: SampledPath, epsabs: float = 1e-10) -> float:
    """``F[x]``; polynomial parts exactly, Gaussian terms by adaptive quadrature."""
    if F.dim != x.dim:
        raise DimensionMismatch(f"dimension {F.dim} vs {x.dim}")
    supp = F.support
    if supp is not None and (supp[0] < x.interval[0] or supp[1] > x.interval[1]):
        raise DomainTooSmall(f"path interval {x.interval} does not cover support {supp}")
    value = F.constant
    value += sum(f.product(c).integral() for f, c in zip(F.density, x.components))
    for term in F.potentials:
        value += _term_on_path(term, x, epsabs)
    return float(value)
