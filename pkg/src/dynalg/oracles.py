"""Independent numerical routes used to cross-check the exact calculus.

Nothing here reuses the closed forms of :mod:`dynalg.functionals`: double
integrals go through tensor Gauss-Legendre rules (the diagonal cells of
``|s - s'|`` are split into triangles), path integrals through adaptive
quadrature, and Weyl normal forms through the explicit all-pairs sum.
"""
from __future__ import annotations

import functools
from typing import Sequence

import numpy as np
from scipy import integrate

from .functionals import LoopPath, SampledPath, _as_tuple
from .piecewise import PiecewisePoly
from .weyl_algebra import WeylElement, symplectic_form

_NODES = 8


@functools.lru_cache(maxsize=None)
def _leggauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def _gl(lo, hi, m: int = _NODES):
    """Gauss-Legendre nodes/weights on ``[lo, hi]``; broadcasts over array bounds."""
    xi, wi = _leggauss(m)
    lo, hi = np.asarray(lo, float)[..., None], np.asarray(hi, float)[..., None]
    half = 0.5 * (hi - lo)
    return lo + half * (xi + 1.0), half * wi


def _double_1d(f: PiecewisePoly, g: PiecewisePoly, absolute: bool) -> float:
    pts = np.unique(np.concatenate([f.breakpoints, g.breakpoints]))
    if pts.size < 2:
        return 0.0
    lo, hi = pts[:-1], pts[1:]
    s, ws = _gl(lo, hi)  # (cells, m)
    fs = f(s) * ws
    gs = g(s) * ws
    diff = s.ravel()[None, :] - s.ravel()[:, None]  # s' - s
    if not absolute:
        return float(fs.ravel() @ diff @ gs.ravel())
    kern = np.abs(diff)
    m = s.shape[1]
    mask = np.kron(np.eye(len(lo), dtype=bool), np.ones((m, m), dtype=bool))
    total = float(fs.ravel() @ np.where(mask, 0.0, kern) @ gs.ravel())
    # diagonal cells: integrate s' over [lo, s] and [s, hi] separately
    left, wl = _gl(np.broadcast_to(lo[:, None], s.shape), s)  # (cells, m, m)
    right, wr = _gl(s, np.broadcast_to(hi[:, None], s.shape))
    inner = np.sum((s[..., None] - left) * g(left) * wl, axis=-1)
    inner += np.sum((right - s[..., None]) * g(right) * wr, axis=-1)
    return total + float(np.sum(fs * inner))


def kernel_quadrature(f, g) -> float:
    """``∬ |s - s'| f(s)·g(s')`` by split Gauss-Legendre quadrature."""
    return sum(_double_1d(a, b, True) for a, b in zip(_as_tuple(f), _as_tuple(g)))


def pairing_quadrature(f, g) -> float:
    """``∬ f(s)·(s' - s)·g(s')`` by tensor Gauss-Legendre quadrature."""
    return sum(_double_1d(a, b, False) for a, b in zip(_as_tuple(f), _as_tuple(g)))


def normal_form_allpairs(elements: Sequence[WeylElement], dim: int = 1) -> WeylElement:
    """``Π W_k`` as ``θ = Σθ_k - ½ Σ_{i<j} σ(v_i, v_j)``, ``v = Σ v_k``."""
    if not elements:
        return WeylElement.identity(dim)
    theta = sum(w.theta for w in elements)
    for i, wi in enumerate(elements):
        for wj in elements[i + 1 :]:
            theta -= 0.5 * symplectic_form(wi.a, wi.b, wj.a, wj.b)
    a = np.sum([w.a for w in elements], axis=0)
    b = np.sum([w.b for w in elements], axis=0)
    return WeylElement(theta, tuple(a), tuple(b))


def lagrangian_difference(x: SampledPath, loop: LoopPath, chi: PiecewisePoly, potential) -> float:
    """``∫ [L(x + x₀) - L(x)] dt`` for ``L = ½ẋ² - χ(t)V(x)``.

    Integrated adaptively over the union of the loop and window supports.
    """
    supports = [s for s in (loop.support, chi.support) if s is not None]
    if not supports:
        return 0.0
    lo = min(s[0] for s in supports)
    hi = max(s[1] for s in supports)
    xs, vs = x.components, x.velocity()
    ls, lv = loop.components, loop.velocity

    def integrand(t):
        pos = np.array([c(t) for c in xs])
        vel = np.array([c(t) for c in vs])
        dpos = np.array([c(t) for c in ls])
        dvel = np.array([c(t) for c in lv])
        kinetic = 0.5 * np.sum((vel + dvel) ** 2) - 0.5 * np.sum(vel**2)
        pot = float(potential.values(pos + dpos)) - float(potential.values(pos))
        return kinetic - float(chi(t)) * pot

    breaks = np.unique(
        np.concatenate([c.breakpoints for c in (*xs, *ls, chi)] + [np.zeros(0)])
    )
    inner = breaks[(breaks > lo) & (breaks < hi)]
    val, _ = integrate.quad(
        integrand, lo, hi, points=inner if inner.size else None, epsabs=1e-12, epsrel=1e-12, limit=500
    )
    return float(val)
