import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dynalg.errors import OrderingViolation, SupportNotCovered, TailOverflow
from dynalg.functionals import (
    Functional,
    LoopPath,
    constant_functional,
    linear_functional,
    loop_from_difference,
)
from dynalg.piecewise import PiecewisePoly
from dynalg.sampling import random_linear_gaussian_functional, random_states
from dynalg.schrodinger_lab import (
    REFERENCE_WIDTH,
    Grid,
    PropagatorConfig,
    WaveState,
    check_causal_relation,
    check_dynamical_relation,
    coherent_state,
    evolve,
    free_evolve,
    free_provider,
    overlap,
    scattering,
    scattering_inverse,
    state_distance,
    weyl_apply,
)
from dynalg.suites import fitted_order
from dynalg.weyl_algebra import WeylElement, multiply

one = PiecewisePoly.constant(1.0, 0.0, 1.0)
late = PiecewisePoly.constant(1.0, 2.0, 3.0)


@pytest.fixture(scope="module")
def grid():
    return Grid()


@pytest.fixture(scope="module")
def psi(grid):
    return coherent_state(grid, 0.3, -0.2, 1.0)


@pytest.fixture(scope="module")
def scenario():
    rng = np.random.default_rng(17)
    return random_linear_gaussian_functional(rng), random_states(rng, Grid(), 1)[0]


# -- states ---------------------------------------------------------------------


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(n=1000)
    with pytest.raises(ValueError):
        Grid(length=0.0)
    g = Grid(n=8, x_min=-1.0, length=2.0)
    assert g.dx == 0.25
    wide = g.doubled()
    assert wide.dx == g.dx and wide.x_min == -2.0 and wide.length == 4.0


def test_coherent_state_examples(grid):
    ref = coherent_state(grid, 0.0, 0.0, REFERENCE_WIDTH)
    assert ref.norm == pytest.approx(1.0, abs=1e-12)
    s = coherent_state(grid, 1.3, -0.7, 1.0)
    assert s.expect_x() == pytest.approx(1.3, abs=1e-10)
    # momentum oracle: plain grid Fourier quadrature of the amplitudes
    spectrum = np.abs(np.fft.fft(s.psi)) ** 2
    k = 2 * np.pi * np.fft.fftfreq(grid.n, grid.dx)
    assert float(np.sum(k * spectrum) / np.sum(spectrum)) == pytest.approx(-0.7, abs=1e-10)
    assert s.expect_p() == pytest.approx(-0.7, abs=1e-10)


def test_coherent_state_tail_guard(grid):
    with pytest.raises(TailOverflow):
        coherent_state(grid, 17.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        coherent_state(grid, 0.0, 0.0, -1.0)


def test_wave_state_shape_checked(grid):
    with pytest.raises(ValueError):
        WaveState(grid, np.zeros(3))


def test_free_evolve_examples(grid, psi):
    assert state_distance(free_evolve(psi, 0.0), psi) == 0.0
    minimal = coherent_state(grid, 0.0, 0.0, REFERENCE_WIDTH)
    assert minimal.expect_x2() == pytest.approx(0.5, abs=1e-12)
    for t in (0.5, 1.0, 3.0):
        assert free_evolve(minimal, t).expect_x2() == pytest.approx((1 + t**2) / 2, abs=1e-8)
    back = free_evolve(free_evolve(psi, 2.7), -2.7)
    assert state_distance(back, psi) < 1e-12
    assert free_evolve(psi, 2.7).norm == pytest.approx(1.0, abs=1e-12)


# -- Weyl actions -----------------------------------------------------------------


def test_weyl_apply_examples(grid, psi):
    assert state_distance(weyl_apply(psi, 0.0, 0.0, 0.0), psi) == 0.0
    ref = coherent_state(grid, 0.0, 0.0, REFERENCE_WIDTH)
    got = abs(overlap(ref, weyl_apply(ref, 2.0, 0.0, 0.0)))
    # oracle: ∫ |ψ₀|² e^{2ix} dx for the analytic density
    density = lambda x: math.exp(-(x**2)) / math.sqrt(math.pi)
    oracle = integrate.quad(lambda x: density(x) * math.cos(2 * x), -np.inf, np.inf, epsabs=1e-14)[0]
    assert got == pytest.approx(oracle, abs=1e-12)
    assert got == pytest.approx(math.exp(-1.0), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3))
def test_weyl_apply_composition_matches_multiply(a1, b1, a2, b2, theta):
    g = Grid()
    psi = coherent_state(g, 0.1, 0.2, 1.0)
    w1, w2 = WeylElement(theta, (a1,), (b1,)), WeylElement(0.0, (a2,), (b2,))
    w = multiply(w1, w2)
    two_step = weyl_apply(weyl_apply(psi, a2, b2, 0.0), a1, b1, theta)
    one_step = weyl_apply(psi, w.a[0], w.b[0], w.theta)
    assert state_distance(two_step, one_step) < 1e-12


def test_weyl_apply_tail_guard(grid, psi):
    with pytest.raises(TailOverflow):
        weyl_apply(psi, 0.0, 18.0)


# -- propagation -------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        PropagatorConfig(dt=0.0)
    with pytest.raises(ValueError):
        PropagatorConfig(dt=0.3, t_i=0.0, t_f=1.0)
    with pytest.raises(ValueError):
        PropagatorConfig(scheme="euler")
    with pytest.raises(ValueError):
        PropagatorConfig(sign="plus")
    with pytest.raises(SupportNotCovered):
        scattering(coherent_state(Grid(), 0, 0, 1), linear_functional(late), PropagatorConfig(1e-2, -1.0, 1.0))


def test_evolve_examples(psi):
    cfg = PropagatorConfig(1e-2, -1.0, 2.0)
    free = free_evolve(psi, 3.0)
    assert state_distance(evolve(psi, Functional(), cfg), free) < 1e-12
    central = evolve(psi, constant_functional(0.7), cfg)
    expected = WaveState(psi.grid, free.psi * np.exp(0.7j))
    assert state_distance(central, expected) < 1e-12


def test_sign_convention_flips_potential(psi):
    cfg = PropagatorConfig(1e-2, -1.0, 2.0)
    F = linear_functional(one)
    s4 = scattering(psi, F, cfg)
    s2 = scattering(psi, linear_functional(-one, constant=-F.constant), PropagatorConfig(1e-2, -1.0, 2.0, sign="s2"))
    assert state_distance(s4, s2) < 1e-12


def _self_convergence(F, psi, scheme, dts):
    outs = [scattering(psi, F, PropagatorConfig(dt, -3.0, 3.0, scheme=scheme)) for dt in dts]
    diffs = [state_distance(a, b) for a, b in zip(outs, outs[1:])]
    return fitted_order(dts[:-1], diffs), outs


def test_strang_self_convergence(scenario):
    F, psi = scenario
    slope, outs = _self_convergence(F, psi, "strang", [8e-3, 4e-3, 2e-3, 1e-3])
    assert slope == pytest.approx(2.0, abs=0.05)
    for out in outs:
        assert out.norm == pytest.approx(psi.norm, abs=1e-12)


def test_trotter1_self_convergence(scenario):
    F, psi = scenario
    slope, outs = _self_convergence(F, psi, "trotter1", [4e-2, 2e-2, 1e-2, 5e-3])
    assert slope == pytest.approx(1.0, abs=0.05)
    for out in outs:
        assert out.norm == pytest.approx(psi.norm, abs=1e-12)


def test_scattering_examples(psi):
    cfg = PropagatorConfig(1e-3, -1.0, 2.0)
    assert state_distance(scattering(psi, Functional(), cfg), psi) < 1e-12
    out = scattering(psi, linear_functional(one), cfg)
    assert state_distance(out, weyl_apply(psi, 1.0, 0.5, 0.0)) < 1e-6


def test_scattering_window_independence(scenario):
    F, psi = scenario
    base = scattering(psi, F, PropagatorConfig(1e-3, -3.0, 3.0))
    wider = scattering(psi, F, PropagatorConfig(1e-3, -4.0, 4.0))
    assert state_distance(base, wider) < 1e-10


def test_printed_constant_leaves_three_quarter_kernel_phase(psi):
    cfg = PropagatorConfig(1e-3, -1.0, 2.0)
    out = scattering(psi, linear_functional(one, convention="printed"), cfg)
    phase = float(np.angle(overlap(weyl_apply(psi, 1.0, 0.5, 0.0), out)))
    assert phase == pytest.approx(0.75 / 3.0, abs=1e-4)


def test_scattering_inverse(scenario):
    F, psi = scenario
    cfg = PropagatorConfig(1e-3, -3.0, 3.0)
    back = scattering_inverse(scattering(psi, F, cfg), F, cfg)
    assert state_distance(back, psi) < 1e-12


def test_weyl_phase_coherence(psi):
    """Global phase of a causal product matches the normal form."""
    cfg = PropagatorConfig(1e-3, -1.0, 4.0)
    Ff, Fg = linear_functional(late), linear_functional(one)
    product = scattering(scattering(psi, Fg, cfg), Ff, cfg)
    oracle = weyl_apply(psi, 2.0, 3.0, 1.0)
    assert state_distance(product, oracle) < 1e-6
    assert abs(np.angle(overlap(oracle, product))) < 1e-6


# -- relations -------------------------------------------------------------------


def test_dynamical_relation_examples(scenario):
    F, psi = scenario
    cfg = PropagatorConfig(1e-3, -4.0, 4.0)
    assert check_dynamical_relation(free_provider, F, LoopPath.zero(), [psi], cfg) < 1e-12
    spread = PiecewisePoly.constant(0.5, -0.5, 1.5)
    loop = loop_from_difference(one, spread)
    linear = linear_functional(one)
    assert check_dynamical_relation(free_provider, linear, loop, [psi], cfg) < 1e-6
    # Gaussian-term functional with a small loop, second order in dt
    res = [check_dynamical_relation(free_provider, F, loop, [psi], cfg.with_dt(dt)) for dt in (2e-3, 1e-3)]
    assert res[1] < 1e-5
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.05)


def test_causal_relation_examples(scenario):
    F3, psi = scenario
    cfg = PropagatorConfig(1e-3, -4.0, 4.0)
    zero = Functional()
    assert check_causal_relation(free_provider, constant_functional(0.4), constant_functional(-1.1), zero, [psi], cfg) < 1e-12
    Ff, Fg = linear_functional(late), linear_functional(one)
    assert check_causal_relation(free_provider, Ff, Fg, zero, [psi], cfg) < 1e-6
    assert check_causal_relation(free_provider, Ff, Fg, F3, [psi], cfg) < 1e-5
    with pytest.raises(OrderingViolation):
        check_causal_relation(free_provider, Fg, Ff, zero, [psi], cfg)


def test_state_csv_dump(tmp_path, psi):
    path = tmp_path / "state.csv"
    psi.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,re_psi,im_psi"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 1] + 1j * data[:, 2], psi.psi)
