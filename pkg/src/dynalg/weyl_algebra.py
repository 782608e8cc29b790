"""Words in the scattering symbols ``S(F)`` and their Weyl normal forms.

In the linear sector every operation is ``e^{iθ} exp(i(a·Q + b·P))`` and
composition follows the Weyl law

    W(θ1, v1) W(θ2, v2) = W(θ1 + θ2 - σ(v1, v2)/2, v1 + v2),
    σ((a1, b1), (a2, b2)) = a1·b2 - b1·a2 = ⟨f1, Δf2⟩.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, NotLinearSector
from .functionals import Functional, h_constant, moments

__all__ = [
    "WeylElement",
    "GroupWord",
    "reduce_phase",
    "weyl_of",
    "multiply",
    "inverse",
    "normalize",
    "fold",
    "group_commutator",
    "recover_commutators",
    "symplectic_form",
]


def reduce_phase(theta: float) -> float:
    """Representative of ``theta`` mod 2π in ``(-π, π]``."""
    r = math.remainder(theta, 2.0 * math.pi)
    return math.pi if r == -math.pi else r


def phase_distance(t1: float, t2: float) -> float:
    return abs(reduce_phase(t1 - t2))


@dataclass(frozen=True)
class WeylElement:
    """``e^{iθ} exp(i(a·Q + b·P))`` with the phase kept in ``(-π, π]``."""

    theta: float
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(v) for v in np.atleast_1d(self.a))
        b = tuple(float(v) for v in np.atleast_1d(self.b))
        if len(a) != len(b):
            raise DimensionMismatch("a and b must have equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "theta", reduce_phase(float(self.theta)))

    @classmethod
    def identity(cls, dim: int = 1) -> "WeylElement":
        return cls(0.0, (0.0,) * dim, (0.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.a)

    def __matmul__(self, other: "WeylElement") -> "WeylElement":
        return multiply(self, other)

    def isclose(self, other: "WeylElement", atol: float = 1e-12) -> bool:
        if self.dim != other.dim:
            return False
        return (
            phase_distance(self.theta, other.theta) <= atol
            and np.allclose(self.a, other.a, rtol=0, atol=atol)
            and np.allclose(self.b, other.b, rtol=0, atol=atol)
        )

    def to_json(self) -> dict:
        return {"theta": self.theta, "a": list(self.a), "b": list(self.b)}


@dataclass(frozen=True)
class GroupWord:
    """``e^{i·prefactor} Π S(F_k)^{±1}`` read left to right."""

    factors: tuple[tuple[Functional, int], ...] = ()
    prefactor: float = 0.0
    dim: int | None = field(default=None)

    def __post_init__(self):
        factors = tuple((F, int(e)) for F, e in self.factors)
        for _, e in factors:
            if e not in (1, -1):
                raise ValueError("exponents must be +1 or -1")
        dims = {F.dim for F, _ in factors}
        if len(dims) > 1:
            raise DimensionMismatch("factors of a word must share one dimension")
        dim = self.dim if self.dim is not None else (dims.pop() if dims else 1)
        if factors and factors[0][0].dim != dim:
            raise DimensionMismatch("declared dim does not match the factors")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "prefactor", reduce_phase(float(self.prefactor)))
        object.__setattr__(self, "dim", dim)

    def __add__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(self.factors + other.factors, self.prefactor + other.prefactor)

    def inverted(self) -> "GroupWord":
        return GroupWord(tuple((F, -e) for F, e in reversed(self.factors)), -self.prefactor, self.dim)


def symplectic_form(a1, b1, a2, b2) -> float:
    return float(np.dot(a1, b2) - np.dot(b1, a2))


def weyl_of(F: Functional) -> WeylElement:
    """Weyl element of a linear-sector functional.

    ``a`` and ``b`` are the moments of the density and ``θ = c - h(f)``
    with the consistent ``h``, so canonical ``F_f`` maps to a phase-free
    element whatever its support.
    """
    if not F.is_linear:
        raise NotLinearSector("functional has potential terms; only linear-sector words have a normal form")
    a, b = moments(F.density)
    theta = F.constant - h_constant(F.density, "consistent")
    return WeylElement(theta, tuple(a), tuple(b))


def multiply(w1: WeylElement, w2: WeylElement) -> WeylElement:
    if w1.dim != w2.dim:
        raise DimensionMismatch(f"dimension {w1.dim} vs {w2.dim}")
    sigma = symplectic_form(w1.a, w1.b, w2.a, w2.b)
    return WeylElement(
        w1.theta + w2.theta - 0.5 * sigma,
        tuple(np.add(w1.a, w2.a)),
        tuple(np.add(w1.b, w2.b)),
    )


def inverse(w: WeylElement) -> WeylElement:
    return WeylElement(-w.theta, tuple(-v for v in w.a), tuple(-v for v in w.b))


def fold(elements: Iterable[WeylElement], dim: int = 1) -> WeylElement:
    out = WeylElement.identity(dim)
    for w in elements:
        out = multiply(out, w)
    return out


def normalize(word: GroupWord) -> WeylElement:
    """Canonical form of a linear-sector word.

    Factors are folded left to right; central phases, including those of
    constant functionals, commute through to the prefactor.
    """
    elems = []
    for F, e in word.factors:
        w = weyl_of(F)
        elems.append(w if e == 1 else inverse(w))
    out = fold(elems, word.dim)
    return WeylElement(out.theta + word.prefactor, out.a, out.b)


def group_commutator(w1: WeylElement, w2: WeylElement) -> float:
    """Phase of ``w1 w2 w1⁻¹ w2⁻¹``."""
    c = multiply(multiply(multiply(w1, w2), inverse(w1)), inverse(w2))
    return c.theta


def recover_commutators(eps: float, dim: int = 1) -> np.ndarray:
    """``[Q_k, P_l]`` read off from group commutators of small displacements.

    For ``W1 = exp(iε Q_k)`` and ``W2 = exp(iε P_l)`` the group commutator
    is ``exp(-ε² [Q_k, P_l])``; its phase ``φ`` gives ``[Q_k, P_l] = -iφ/ε²``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        for l in range(dim):
            a1 = np.zeros(dim)
            b2 = np.zeros(dim)
            a1[k] = eps
            b2[l] = eps
            w1 = WeylElement(0.0, tuple(a1), (0.0,) * dim)
            w2 = WeylElement(0.0, (0.0,) * dim, tuple(b2))
            out[k, l] = -1j * group_commutator(w1, w2) / eps**2
    return out


def word_from_elements(functionals: Sequence[Functional], exponents: Sequence[int] | None = None) -> GroupWord:
    exponents = exponents or [1] * len(functionals)
    return GroupWord(tuple(zip(functionals, exponents)))
