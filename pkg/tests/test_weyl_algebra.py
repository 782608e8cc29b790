import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynalg.errors import DimensionMismatch, NotLinearSector
from dynalg.functionals import (
    Functional,
    GaussianShape,
    LoopPath,
    PotentialTerm,
    constant_functional,
    linear_functional,
)
from dynalg.oracles import normal_form_allpairs
from dynalg.piecewise import PiecewisePoly
from dynalg.sampling import bounded_density, random_bump_loop, random_moment_matched_pair
from dynalg.weyl_algebra import (
    GroupWord,
    WeylElement,
    group_commutator,
    inverse,
    multiply,
    normalize,
    recover_commutators,
    reduce_phase,
    weyl_of,
    word_from_elements,
)

seeds = st.integers(0, 2**32 - 1)
finite = st.floats(-5, 5)
one = PiecewisePoly.constant(1.0, 0.0, 1.0)
late = PiecewisePoly.constant(1.0, 2.0, 3.0)


def element(theta, a, b):
    return WeylElement(theta, (a,), (b,))


elements = st.builds(element, finite, finite, finite)


def test_weyl_of_examples():
    assert weyl_of(linear_functional(one)).isclose(element(0.0, 1.0, 0.5))
    assert weyl_of(constant_functional(0.7)).isclose(element(0.7, 0.0, 0.0))
    loop = LoopPath((random_bump_loop(np.random.default_rng(5)),))
    assert weyl_of(linear_functional(loop.acceleration)).isclose(WeylElement.identity())


def test_weyl_of_rejects_potentials():
    term = PotentialTerm(one, GaussianShape(1.0, (0.0,), 1.0))
    with pytest.raises(NotLinearSector):
        weyl_of(Functional(1, (), 0.0, (term,)))


def test_multiply_examples():
    w = element(0.3, 1.2, -0.7)
    assert multiply(element(0, 1, 0), element(0, 0, 1)).isclose(element(-0.5, 1, 1))
    assert multiply(w, WeylElement.identity()).isclose(w)
    assert multiply(w, inverse(w)).isclose(WeylElement.identity())
    assert (w @ inverse(w)).isclose(WeylElement.identity())


def test_multiply_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        multiply(WeylElement.identity(1), WeylElement.identity(2))


def test_inverse_examples():
    assert inverse(WeylElement.identity()).isclose(WeylElement.identity())
    assert inverse(element(-0.5, 1, 1)).isclose(element(0.5, -1, -1))
    f = bounded_density(np.random.default_rng(9))
    assert inverse(weyl_of(linear_functional(f))).isclose(weyl_of(linear_functional(-f)))


def test_normalize_two_factor_word():
    early, future = linear_functional(one), linear_functional(late)
    future_first = normalize(word_from_elements([future, early]))
    assert future_first.isclose(element(1.0, 2.0, 3.0))
    # the opposite order carries the opposite cocycle phase
    assert normalize(word_from_elements([early, future])).isclose(element(-1.0, 2.0, 3.0))


def test_normalize_examples():
    F = linear_functional(bounded_density(np.random.default_rng(1)))
    assert normalize(GroupWord(((F, 1), (F, -1)))).isclose(WeylElement.identity())
    f = linear_functional(one)
    word = word_from_elements([constant_functional(0.3), f, constant_functional(0.4)])
    expected = weyl_of(f)
    assert normalize(word).isclose(WeylElement(expected.theta + 0.7, expected.a, expected.b))
    assert normalize(GroupWord()).isclose(WeylElement.identity())


def test_group_word_validation():
    F = linear_functional(one)
    with pytest.raises(ValueError):
        GroupWord(((F, 2),))
    with pytest.raises(DimensionMismatch):
        GroupWord(((F, 1), (linear_functional((one, one)), 1)))


def test_group_commutator_examples():
    eps = 1e-3
    assert group_commutator(element(0, eps, 0), element(0, 0, eps)) == pytest.approx(-1e-6, abs=1e-18)
    w = element(0.2, 0.7, -1.1)
    assert group_commutator(w, w) == 0.0
    w1 = WeylElement(0, (eps, 0.0), (0.0, 0.0))
    assert group_commutator(w1, WeylElement(0, (0.0, 0.0), (eps, 0.0))) == pytest.approx(-eps**2)
    assert group_commutator(w1, WeylElement(0, (0.0, 0.0), (0.0, eps))) == 0.0


def test_recover_commutators_examples():
    np.testing.assert_allclose(recover_commutators(1e-3), [[1j]], atol=1e-12)
    m = recover_commutators(1e-3, 2)
    assert m[0, 1] == 0 and m[1, 0] == 0
    ref = recover_commutators(1e-2, 3)
    for eps in (1e-3, 1e-4):
        np.testing.assert_allclose(recover_commutators(eps, 3), ref, atol=1e-10)
    with pytest.raises(ValueError):
        recover_commutators(0.0)


def test_phase_representative():
    assert reduce_phase(math.pi) == math.pi
    assert reduce_phase(-math.pi) == math.pi
    assert reduce_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert element(7.0, 0, 0).theta == pytest.approx(7.0 - 2 * math.pi)


@settings(max_examples=100, deadline=None)
@given(elements, elements, elements)
def test_multiply_associative(x, y, z):
    assert ((x @ y) @ z).isclose(x @ (y @ z), atol=1e-11)


def _word(rng, length):
    factors = []
    for _ in range(length):
        F = linear_functional(bounded_density(rng))
        if rng.uniform() < 0.3:
            F = F.with_constant(F.constant + rng.uniform(-1, 1))
        factors.append((F, int(rng.choice([1, -1]))))
    return GroupWord(tuple(factors), rng.uniform(-1, 1))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 20))
def test_word_times_inverse_is_identity(seed, length):
    w = _word(np.random.default_rng(seed), length)
    assert normalize(w + w.inverted()).isclose(WeylElement.identity(), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 12), st.integers(1, 12))
def test_normalize_is_homomorphism(seed, m, n):
    rng = np.random.default_rng(seed)
    u, v = _word(rng, m), _word(rng, n)
    assert normalize(u + v).isclose(multiply(normalize(u), normalize(v)), atol=1e-11)
    elems = [weyl_of(F) if e == 1 else inverse(weyl_of(F)) for F, e in u.factors]
    ref = normal_form_allpairs(elems)
    got = normalize(u)
    assert got.isclose(WeylElement(ref.theta + u.prefactor, ref.a, ref.b), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_moment_equivalent_densities_share_weyl_element(seed):
    f, fp, _ = random_moment_matched_pair(np.random.default_rng(seed))
    assert weyl_of(linear_functional(f)).isclose(weyl_of(linear_functional(fp)), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_causal_factorization_three_routes(seed):
    rng = np.random.default_rng(seed)
    split = rng.uniform(-1, 1)
    f = bounded_density(rng, support=(split, 3.0))
    g = bounded_density(rng, support=(-3.0, split))
    Ff, Fg = linear_functional(f), linear_functional(g)
    word = normalize(word_from_elements([Ff, Fg]))
    direct = weyl_of(Ff + Fg)
    cocycle = weyl_of(linear_functional(f + g))
    (a1,), (b1,) = weyl_of(Ff).a, weyl_of(Ff).b
    (a2,), (b2,) = weyl_of(Fg).a, weyl_of(Fg).b
    cocycle = WeylElement(cocycle.theta - 0.5 * (a1 * b2 - b1 * a2), cocycle.a, cocycle.b)
    assert word.isclose(direct, atol=1e-12)
    assert word.isclose(cocycle, atol=1e-12)


def test_euler_lagrange_identity_on_random_loops():
    rng = np.random.default_rng(11)
    for _ in range(100):
        loop = LoopPath((random_bump_loop(rng),))
        assert weyl_of(linear_functional(loop.acceleration)).isclose(WeylElement.identity(), atol=1e-12)
