"""Seeded random densities, loops, paths and states for property checks.

Densities have at most four pieces of degree at most three inside
``[-3, 3]``; loops are built from moment-matched density pairs.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import Polynomial
from scipy.interpolate import CubicSpline

from .functionals import (
    Functional,
    GaussianShape,
    LoopPath,
    PotentialTerm,
    SampledPath,
    linear_functional,
    loop_from_difference,
    moments,
)
from .piecewise import PiecewisePoly
from .schrodinger_lab import Grid, WaveState, coherent_state

SUPPORT = (-3.0, 3.0)
MAX_DISPLACEMENT = 3.0
# Propagated scenarios stay well inside the default [-20, 20) domain with
# this much momentum transfer over a six-unit time window.
NUMERIC_DISPLACEMENT = 0.5


def random_density(
    rng: np.random.Generator,
    max_pieces: int = 4,
    max_degree: int = 3,
    support: tuple[float, float] = SUPPORT,
    scale: float = 1.0,
) -> PiecewisePoly:
    k = int(rng.integers(1, max_pieces + 1))
    pts = np.sort(rng.uniform(*support, size=2 * k))
    pieces = []
    for lo, hi in zip(pts[::2], pts[1::2]):
        length = hi - lo
        if length < 0.05:
            continue
        deg = int(rng.integers(0, max_degree + 1))
        local = rng.uniform(-scale, scale, size=deg + 1) / length ** np.arange(deg + 1)
        pieces.append((lo, hi, local))
    if not pieces:
        return random_density(rng, max_pieces, max_degree, support, scale)
    return PiecewisePoly.from_local(pieces)


def bounded_density(rng: np.random.Generator, limit: float = MAX_DISPLACEMENT, **kw) -> PiecewisePoly:
    """Random density rescaled so that ``|a|, |b| <= limit``."""
    f = random_density(rng, **kw)
    a, b = moments(f)
    m = max(abs(a[0]), abs(b[0]))
    return f.scaled(limit / m) if m > limit else f


def random_bump_loop(
    rng: np.random.Generator,
    support: tuple[float, float] = SUPPORT,
    amplitude: float = 0.5,
    min_width: float = 1.5,
) -> PiecewisePoly:
    """``A (t-a)²(b-t)² q(t)`` normalized to peak ``|A|``; C¹ with compact support."""
    a, b = np.sort(rng.uniform(*support, size=2))
    if b - a < min_width:
        b = min(a + min_width + rng.uniform(0, 0.5), support[1] + 1.0)
        a = min(a, b - min_width)
    width = b - a
    q = Polynomial(rng.uniform(-1, 1, size=2))
    if abs(q(0.5)) < 0.2:
        q = q + 1.0
    # local variable u = t - a, rescaled to s = u / width ∈ [0, 1]
    shape = Polynomial([0.0, 0.0, 1.0]) * Polynomial([1.0, -1.0]) ** 2 * q
    s = np.linspace(0.0, 1.0, 201)
    peak = np.max(np.abs(shape(s)))
    amp = amplitude * rng.uniform(0.3, 1.0) * rng.choice([-1.0, 1.0])
    local = shape.coef * (amp / peak) / width ** np.arange(shape.coef.size)
    return PiecewisePoly.from_local(((a, b, local),))


def random_moment_matched_pair(rng: np.random.Generator, amplitude: float = 0.5):
    """``(f, f', x₀)`` with ``f' - f = ẍ₀`` for a random bump loop ``x₀``."""
    f = bounded_density(rng)
    bump = random_bump_loop(rng, amplitude=amplitude)
    f_prime = f + bump.derivative().derivative()
    return f, f_prime, LoopPath((bump,))


def random_loop(rng: np.random.Generator, amplitude: float = 0.5) -> LoopPath:
    """Loop reconstructed from a random moment-matched pair."""
    f, f_prime, _ = random_moment_matched_pair(rng, amplitude)
    return loop_from_difference(f, f_prime)


def random_path(rng: np.random.Generator, interval: tuple[float, float] = (-5.0, 5.0), knots: int = 6) -> SampledPath:
    """C² cubic-spline orbit on ``interval``."""
    t = np.linspace(*interval, knots)
    spline = CubicSpline(t, rng.uniform(-2, 2, size=knots))
    pieces = []
    for i in range(knots - 1):
        pieces.append((t[i], t[i + 1], spline.c[::-1, i]))
    return SampledPath((PiecewisePoly.from_local(pieces),), interval)


def random_gaussian_term(
    rng: np.random.Generator, support: tuple[float, float] = SUPPORT, scale: float = 0.5
) -> PotentialTerm:
    window = random_density(rng, max_pieces=2, max_degree=2, support=support, scale=scale)
    shape = GaussianShape(rng.uniform(0.2, 0.6), (rng.uniform(-1, 1),), rng.uniform(2.0, 3.0))
    return PotentialTerm(window, shape)


def random_linear_functional(rng: np.random.Generator, convention: str = "consistent") -> Functional:
    return linear_functional(bounded_density(rng), convention=convention)


def random_linear_gaussian_functional(rng: np.random.Generator, convention: str = "consistent") -> Functional:
    F = linear_functional(bounded_density(rng, limit=NUMERIC_DISPLACEMENT), convention=convention)
    return Functional(1, F.density, F.constant, (random_gaussian_term(rng),))


def random_state_params(rng: np.random.Generator, count: int = 3) -> list[tuple[float, float]]:
    """``(x̄, p̄)`` pairs for width-1 coherent test states."""
    return [(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)) for _ in range(count)]


def states_on(grid: Grid, params, width: float = 1.0) -> list[WaveState]:
    return [coherent_state(grid, x, p, width) for x, p in params]


def random_states(rng: np.random.Generator, grid: Grid, count: int = 3) -> list[WaveState]:
    return states_on(grid, random_state_params(rng, count))
