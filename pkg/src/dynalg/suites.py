"""Verification suites behind the command-line front end.

A suite draws its random functionals, loops and states from one seeded
generator, evaluates independent checks (possibly on several threads)
and returns a :class:`Report` whose records are sorted by name.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DynalgError, TailOverflow
from .functionals import (
    Functional,
    GaussianShape,
    LoopPath,
    PolynomialShape,
    PotentialTerm,
    boundary_action,
    delta_pairing,
    evaluate,
    kernel_integral,
    linear_functional,
    loop_from_difference,
    moment_equivalent,
    moments,
    shift_by_loop,
)
from .interaction import (
    InteractionScenario,
    InteractionSpec,
    free_relations,
    relative_scattering,
    verify_interacting_relations,
)
from .oracles import kernel_quadrature, lagrangian_difference, normal_form_allpairs, pairing_quadrature
from .piecewise import PiecewisePoly
from .sampling import (
    NUMERIC_DISPLACEMENT,
    bounded_density,
    random_bump_loop,
    random_density,
    random_gaussian_term,
    random_loop,
    random_moment_matched_pair,
    random_path,
    random_state_params,
    random_states,
    states_on,
)
from .schrodinger_lab import (
    Grid,
    PropagatorConfig,
    check_causal_relation,
    check_dynamical_relation,
    free_provider,
    overlap,
    scattering_many,
    state_distance,
    weyl_apply,
)
from .weyl_algebra import (
    GroupWord,
    WeylElement,
    inverse,
    normalize,
    phase_distance,
    recover_commutators,
    weyl_of,
)

SUITES = ("weyl", "loop", "causal", "moment", "euler_lagrange", "interaction", "convergence")

DEFAULT_TOLERANCES = {
    "algebraic": 1e-12,  # exact identities up to rounding
    "quadrature": 1e-10,  # closed form vs numerical quadrature
    "path": 1e-10,  # functional identities evaluated on paths
    "lagrangian": 1e-8,  # boundary action vs adaptive Lagrangian quadrature
    "oracle": 1e-6,  # propagator vs exact Weyl action
    "relation": 1e-5,  # numerical defining relations at the base dt
    "reduction": 1e-12,  # identical computations reached by two routes
    "unitarity": 1e-12,
    "order": 0.1,  # |measured order - expected order|
}
# categories overridden by --tol; the numerical ones scale with dt instead
EXACT_CATEGORIES = ("algebraic", "quadrature", "path")


@dataclass(frozen=True)
class Settings:
    suite: str = "weyl"
    seed: int = 0
    dt: float = 1e-3
    n: int = 2048
    x_min: float = -20.0
    length: float = 40.0
    scheme: str = "strang"
    h_convention: str = "consistent"
    sign_convention: str = "s4"
    tol: float | None = None
    tolerances: dict = field(default_factory=dict)

    def tolerance(self, category: str) -> float:
        if self.tol is not None and category in EXACT_CATEGORIES:
            return self.tol
        return float(self.tolerances.get(category, DEFAULT_TOLERANCES[category]))

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.x_min, self.length)

    def cfg(self, t_i: float = -4.0, t_f: float = 4.0, dt: float | None = None, scheme: str | None = None):
        return PropagatorConfig(
            dt=self.dt if dt is None else dt,
            t_i=t_i,
            t_f=t_f,
            scheme=scheme or self.scheme,
            sign=self.sign_convention,
        )

    def echo(self) -> dict:
        out = asdict(self)
        out["tolerances"] = {k: self.tolerance(k) for k in DEFAULT_TOLERANCES}
        del out["tol"]
        return out


@dataclass(frozen=True)
class Record:
    name: str
    residual: float | None
    tolerance: float
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.residual is not None and math.isfinite(self.residual) and self.residual <= self.tolerance

    def to_json(self) -> dict:
        out = {"name": self.name, "residual": self.residual, "tolerance": self.tolerance, "pass": self.passed}
        if self.error:
            out["error"] = self.error
        return out


@dataclass
class Report:
    settings: Settings
    records: list[Record]
    slopes: dict[str, float] = field(default_factory=dict)
    convergence: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def to_json(self, timings: bool = True) -> dict:
        out = {
            "scenario": self.settings.echo(),
            "records": [r.to_json() for r in sorted(self.records, key=lambda r: r.name)],
            "slopes": dict(sorted(self.slopes.items())),
            "convergence": {k: [list(p) for p in v] for k, v in sorted(self.convergence.items())},
            "overall": "pass" if self.passed else "fail",
        }
        if timings:
            out["timings"] = dict(sorted(self.timings.items()))
        return out


# A task returns records plus optional slopes/convergence series.
@dataclass
class Outcome:
    records: list[Record] = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)


Task = tuple[str, Callable[[], Outcome]]


def threads() -> int:
    try:
        return max(1, int(os.environ.get("DYNALG_THREADS", "1")))
    except ValueError:
        return 1


def _guarded(name: str, fn: Callable[[], Outcome], tol: float) -> tuple[Outcome, float]:
    start = time.perf_counter()
    try:
        out = fn()
    except (TailOverflow, DynalgError, ValueError) as exc:
        out = Outcome([Record(name, None, tol, f"{type(exc).__name__}: {exc}")])
    return out, time.perf_counter() - start


def fitted_order(dts, residuals) -> float:
    """Least-squares slope of ``log residual`` against ``log dt``."""
    return float(np.polyfit(np.log(dts), np.log(residuals), 1)[0])


def _rec(settings: Settings, name: str, residual: float, category: str) -> Record:
    return Record(name, float(residual), settings.tolerance(category))


# ---------------------------------------------------------------------------
# scenario builders (all randomness flows from one generator)


def _linear(rng, settings: Settings, **kw) -> Functional:
    return linear_functional(bounded_density(rng, **kw), convention=settings.h_convention)


def _linear_gaussian(rng, settings: Settings, support=(-3.0, 3.0)) -> Functional:
    F = _linear(rng, settings, limit=NUMERIC_DISPLACEMENT, support=support)
    return F + Functional(1, (), 0.0, (random_gaussian_term(rng, support),))


def _random_word(rng, settings: Settings, length: int) -> GroupWord:
    factors = []
    for _ in range(length):
        F = _linear(rng, settings)
        if rng.uniform() < 0.3:
            F = F.with_constant(F.constant + rng.uniform(-1, 1))
        factors.append((F, int(rng.choice([1, -1]))))
    return GroupWord(tuple(factors), rng.uniform(-1, 1))


def _causal_triple(rng, settings: Settings):
    split = rng.uniform(-1.0, 1.0)
    late, early = (split, 3.0), (-3.0, split)
    F1 = _linear(rng, settings, limit=NUMERIC_DISPLACEMENT, support=late)
    F1 = F1 + Functional(1, (), 0.0, (random_gaussian_term(rng, late),))
    F2 = _linear(rng, settings, limit=NUMERIC_DISPLACEMENT, support=early)
    F2 = F2 + Functional(1, (), 0.0, (random_gaussian_term(rng, early),))
    F3 = _linear_gaussian(rng, settings)
    return F1, F2, F3


# ---------------------------------------------------------------------------
# suites


def _weyl(settings: Settings, rng) -> list[Task]:
    words = [_random_word(rng, settings, 10) for _ in range(50)]
    long_words = [_random_word(rng, settings, int(rng.integers(1, 21))) for _ in range(50)]
    linear = [_linear(rng, settings) for _ in range(4)]
    states = random_states(rng, settings.grid, 2)

    def fold():
        worst = 0.0
        for w in words:
            elems = [weyl_of(F) if e == 1 else inverse(weyl_of(F)) for F, e in w.factors]
            ref = normal_form_allpairs(elems)
            got = normalize(w)
            ref_theta = ref.theta + w.prefactor
            worst = max(worst, phase_distance(got.theta, ref_theta), *np.abs(np.subtract(got.a, ref.a)),
                        *np.abs(np.subtract(got.b, ref.b)))
        return Outcome([_rec(settings, "weyl.normal_form_vs_allpairs", worst, "algebraic")])

    def inverse_words():
        worst = 0.0
        for w in long_words:
            got = normalize(w + w.inverted())
            worst = max(worst, abs(got.theta), *np.abs(got.a), *np.abs(got.b))
        return Outcome([_rec(settings, "weyl.word_times_inverse", worst, "algebraic")])

    def commutators():
        worst = 0.0
        for eps in (1e-2, 1e-3, 1e-4):
            worst = max(worst, float(np.max(np.abs(recover_commutators(eps, 3) - 1j * np.eye(3)))))
        return Outcome([_rec(settings, "weyl.commutators", worst, "algebraic")])

    def oracle():
        cfg = settings.cfg(-3.0, 3.0)
        dist = phase = 0.0
        for F in linear:
            (a,), (b,) = moments(F.density)
            out = scattering_many(states, F, cfg)
            for psi, got in zip(states, out):
                ref = weyl_apply(psi, a, b, 0.0)
                dist = max(dist, state_distance(ref, got))
                phase = max(phase, abs(float(np.angle(overlap(ref, got)))))
        return Outcome([
            _rec(settings, "weyl.scattering_vs_weyl", dist, "oracle"),
            _rec(settings, "weyl.residual_phase", phase, "oracle"),
        ])

    return [
        ("weyl.normal_form_vs_allpairs", fold),
        ("weyl.word_times_inverse", inverse_words),
        ("weyl.commutators", commutators),
        ("weyl.scattering_vs_weyl", oracle),
    ]


def _loop(settings: Settings, rng) -> list[Task]:
    pairs = [random_moment_matched_pair(rng) for _ in range(50)]
    paths = [random_path(rng) for _ in range(20)]
    scenarios = [(_linear_gaussian(rng, settings), random_loop(rng)) for _ in range(2)]
    states = random_states(rng, settings.grid, 2)

    def algebraic():
        weyl = recon = accel = 0.0
        for f, fp, bump in pairs:
            w1 = weyl_of(linear_functional(f, convention=settings.h_convention))
            w2 = weyl_of(linear_functional(fp, convention=settings.h_convention))
            weyl = max(weyl, phase_distance(w1.theta, w2.theta), *np.abs(np.subtract(w1.a, w2.a)),
                       *np.abs(np.subtract(w1.b, w2.b)))
            loop = loop_from_difference(f, fp)
            t = np.linspace(-4.0, 4.0, 401)
            recon = max(recon, float(np.max(np.abs(loop.components[0](t) - bump.components[0](t)))))
            diff = (fp - f) - loop.acceleration[0]
            accel = max(accel, float(np.max(np.abs(diff(t)))))
        return Outcome([
            _rec(settings, "loop.moment_equivalence", weyl, "algebraic"),
            _rec(settings, "loop.reconstruction", recon, "quadrature"),
            _rec(settings, "loop.acceleration", accel, "quadrature"),
        ])

    def path_identity():
        worst = 0.0
        for (f, fp, loop), x in zip(pairs, paths):
            F = linear_functional(f, convention=settings.h_convention)
            Fp = linear_functional(fp, convention=settings.h_convention)
            lhs = evaluate(F, x)
            rhs = evaluate(shift_by_loop(Fp, loop) + boundary_action(loop), x)
            worst = max(worst, abs(lhs - rhs))
        return Outcome([_rec(settings, "loop.path_identity", worst, "path")])

    def relation(i):
        def run():
            F, loop = scenarios[i]
            r = check_dynamical_relation(free_provider, F, loop, states, settings.cfg())
            return Outcome([_rec(settings, f"loop.relation_i.{i}", r, "relation")])

        return run

    return [
        ("loop.algebraic", algebraic),
        ("loop.path_identity", path_identity),
        *[(f"loop.relation_i.{i}", relation(i)) for i in range(len(scenarios))],
    ]


def _causal(settings: Settings, rng) -> list[Task]:
    linear_triples = []
    for _ in range(50):
        split = rng.uniform(-1, 1)
        linear_triples.append((
            _linear(rng, settings, support=(split, 3.0)),
            _linear(rng, settings, support=(-3.0, split)),
            _linear(rng, settings),
        ))
    triples = [_causal_triple(rng, settings) for _ in range(2)]
    states = random_states(rng, settings.grid, 2)

    def linear_sector():
        fact = comp = 0.0
        for F1, F2, F3 in linear_triples:
            lhs = weyl_of(F1 + F2 + F3)
            rhs = normalize(GroupWord(((F1 + F3, 1), (F3, -1), (F2 + F3, 1))))
            fact = max(fact, phase_distance(lhs.theta, rhs.theta), *np.abs(np.subtract(lhs.a, rhs.a)),
                       *np.abs(np.subtract(lhs.b, rhs.b)))
            # causal products compose without a cocycle correction
            both = normalize(GroupWord(((F1, 1), (F2, 1))))
            direct = weyl_of(F1 + F2)
            comp = max(comp, phase_distance(both.theta, direct.theta))
        return Outcome([
            _rec(settings, "causal.linear_factorization", fact, "algebraic"),
            _rec(settings, "causal.linear_composition", comp, "algebraic"),
        ])

    def relation(i):
        def run():
            F1, F2, F3 = triples[i]
            r = check_causal_relation(free_provider, F1, F2, F3, states, settings.cfg())
            return Outcome([_rec(settings, f"causal.relation_ii.{i}", r, "relation")])

        return run

    return [("causal.linear", linear_sector), *[(f"causal.relation_ii.{i}", relation(i)) for i in range(2)]]


def _moment(settings: Settings, rng) -> list[Task]:
    pairs = [(random_density(rng), random_density(rng)) for _ in range(200)]
    matched = [random_moment_matched_pair(rng) for _ in range(50)]

    def pairing():
        closed = quad = kern = sym = 0.0
        for f, g in pairs:
            (a0,), (a1,) = moments(f)
            (b0,), (b1,) = moments(g)
            p = delta_pairing(f, g)
            closed = max(closed, abs(p - (a0 * b1 - a1 * b0)))
            quad = max(quad, abs(p - pairing_quadrature(f, g)))
            k = kernel_integral(f, g)
            kern = max(kern, abs(k - kernel_quadrature(f, g)))
            sym = max(sym, abs(k - kernel_integral(g, f)), abs(p + delta_pairing(g, f)))
        return Outcome([
            _rec(settings, "moment.pairing_closed_form", closed, "algebraic"),
            _rec(settings, "moment.pairing_quadrature", quad, "quadrature"),
            _rec(settings, "moment.kernel_quadrature", kern, "quadrature"),
            _rec(settings, "moment.symmetries", sym, "algebraic"),
        ])

    def equivalence():
        misses = 0
        for f, fp, _ in matched:
            misses += not moment_equivalent(f, fp)
            misses += moment_equivalent(f, fp + PiecewisePoly.constant(1e-3, 0.0, 1.0))
        return Outcome([Record("moment.equivalence_classification", float(misses), 0.0)])

    return [("moment.pairing", pairing), ("moment.equivalence", equivalence)]


def _euler_lagrange(settings: Settings, rng) -> list[Task]:
    loops = [LoopPath((random_bump_loop(rng),)) for _ in range(100)]
    numeric = loops[:4]
    states = random_states(rng, settings.grid, 2)

    def algebraic():
        lin = bound = 0.0
        ident = WeylElement.identity()
        for loop in loops:
            w = weyl_of(linear_functional(loop.acceleration, convention=settings.h_convention))
            lin = max(lin, abs(w.theta), *np.abs(w.a), *np.abs(w.b))
            dl = boundary_action(loop)
            wb = weyl_of(dl)
            # the phase is a difference of two O(|dl.constant|) integrals
            scale = max(1.0, abs(dl.constant))
            bound = max(bound, phase_distance(wb.theta, ident.theta) / scale, *np.abs(wb.a), *np.abs(wb.b))
        return Outcome([
            _rec(settings, "euler_lagrange.weyl_identity", lin, "algebraic"),
            _rec(settings, "euler_lagrange.boundary_identity", bound, "algebraic"),
        ])

    def scattering():
        worst = 0.0
        for loop in numeric:
            F = linear_functional(loop.acceleration, convention=settings.h_convention)
            out = scattering_many(states, F, settings.cfg())
            worst = max(worst, *(state_distance(a, b) for a, b in zip(states, out)))
        return Outcome([_rec(settings, "euler_lagrange.scattering", worst, "oracle")])

    return [("euler_lagrange.algebraic", algebraic), ("euler_lagrange.scattering", scattering)]


INTERACTION_CORE = (-2.0, 2.0)
INTERACTION_SHAPES = {
    "quartic": PolynomialShape((0.0, 0.0, 0.0, 0.0, 0.1)),
    "gaussian": GaussianShape(0.5, (0.0,), 1.0),
}


def interaction_scenario(rng, settings: Settings, states) -> InteractionScenario:
    inner = (INTERACTION_CORE[0] + 0.5, INTERACTION_CORE[1] - 0.5)
    F = _linear(rng, settings, limit=1.0, support=inner)
    loop = LoopPath((random_bump_loop(rng, support=(inner[0], inner[1] - 1.0)),))
    split = rng.uniform(-0.5, 0.5)
    F1 = _linear(rng, settings, limit=1.0, support=(split, inner[1]))
    F2 = _linear(rng, settings, limit=1.0, support=(inner[0], split))
    F3 = Functional()
    return InteractionScenario(F, loop, F1, F2, F3, states, settings.cfg(-3.0, 3.0))


def _interaction(settings: Settings, rng) -> list[Task]:
    states = random_states(rng, settings.grid, 2)
    scenario = interaction_scenario(rng, settings, states)
    paths = [random_path(rng) for _ in range(20)]

    def relations(label):
        def run():
            spec = InteractionSpec.with_ramps(INTERACTION_SHAPES[label], INTERACTION_CORE)
            res = verify_interacting_relations(spec, scenario)
            return Outcome([
                _rec(settings, f"interaction.{label}.relation_i", res["relation_i"], "relation"),
                _rec(settings, f"interaction.{label}.relation_ii", res["relation_ii"], "relation"),
            ])

        return run

    def reduction():
        spec = InteractionSpec.with_ramps(PolynomialShape((0.0,)), INTERACTION_CORE)
        got = verify_interacting_relations(spec, scenario)
        ref = free_relations(scenario)
        worst = max(abs(got[k] - ref[k]) for k in ref)
        return Outcome([_rec(settings, "interaction.free_reduction", worst, "reduction")])

    def boundary():
        from .interaction import interacting_boundary_action

        worst = 0.0
        for label, shape in INTERACTION_SHAPES.items():
            spec = InteractionSpec.with_ramps(shape, INTERACTION_CORE)
            dl = interacting_boundary_action(scenario.loop, spec)
            for x in paths[:10]:
                ref = lagrangian_difference(x, scenario.loop, spec.chi, shape)
                worst = max(worst, abs(evaluate(dl, x) - ref))
        return Outcome([_rec(settings, "interaction.boundary_action", worst, "lagrangian")])

    def unitarity():
        spec = InteractionSpec.with_ramps(INTERACTION_SHAPES["quartic"], INTERACTION_CORE)
        worst = 0.0
        for psi in states:
            out = relative_scattering(psi, scenario.F, spec, scenario.cfg)
            worst = max(worst, abs(out.norm - psi.norm))
        return Outcome([_rec(settings, "interaction.unitarity", worst, "unitarity")])

    return [
        ("interaction.quartic", relations("quartic")),
        ("interaction.gaussian", relations("gaussian")),
        ("interaction.free_reduction", reduction),
        ("interaction.boundary_action", boundary),
        ("interaction.unitarity", unitarity),
    ]


def halvings(dt: float, count: int = 4) -> list[float]:
    return [dt / 2**k for k in range(count)]


def _convergence(settings: Settings, rng) -> list[Task]:
    F, loop = _linear_gaussian(rng, settings), random_loop(rng)
    G = _linear_gaussian(rng, settings)
    params = random_state_params(rng, 2)
    states = states_on(settings.grid, params)
    # same spacing, twice the extent: periodic wrap-around stays below the dt^2 signal
    wide = states_on(settings.grid.doubled(), params)

    def strang_order():
        dts = halvings(settings.dt)
        res = [check_dynamical_relation(free_provider, F, loop, wide, settings.cfg(dt=dt)) for dt in dts]
        slope = fitted_order(dts, res)
        return Outcome(
            [_rec(settings, "convergence.relation_i_order", abs(slope - 2.0), "order")],
            {"relation_i": slope},
            {"relation_i": list(zip(dts, res))},
        )

    def trotter_order():
        coarse = halvings(40 * settings.dt)
        ref = scattering_many(states, G, settings.cfg(-3.0, 3.0, dt=settings.dt / 4, scheme="strang"))
        res, drift = [], 0.0
        for dt in coarse:
            out = scattering_many(states, G, settings.cfg(-3.0, 3.0, dt=dt, scheme="trotter1"))
            res.append(max(state_distance(a, b) for a, b in zip(out, ref)))
            drift = max(drift, *(abs(o.norm - s.norm) for o, s in zip(out, states)))
        drift = max(drift, *(abs(o.norm - s.norm) for o, s in zip(ref, states)))
        slope = fitted_order(coarse, res)
        return Outcome(
            [
                _rec(settings, "convergence.trotter1_order", abs(slope - 1.0), "order"),
                _rec(settings, "convergence.unitarity", drift, "unitarity"),
            ],
            {"trotter1_to_strang": slope},
            {"trotter1_to_strang": list(zip(coarse, res))},
        )

    return [("convergence.strang", strang_order), ("convergence.trotter1", trotter_order)]


_BUILDERS = {
    "weyl": _weyl,
    "loop": _loop,
    "causal": _causal,
    "moment": _moment,
    "euler_lagrange": _euler_lagrange,
    "interaction": _interaction,
    "convergence": _convergence,
}


def run_suite(settings: Settings, workers: int | None = None) -> Report:
    """Build every scenario from ``settings.seed`` and evaluate the checks."""
    if settings.suite not in _BUILDERS:
        raise ValueError(f"unknown suite {settings.suite!r}")
    start = time.perf_counter()
    rng = np.random.default_rng(settings.seed)
    tasks = _BUILDERS[settings.suite](settings, rng)
    fallback = settings.tolerance("relation")
    workers = threads() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _guarded(t[0], t[1], fallback), tasks))
    else:
        results = [_guarded(name, fn, fallback) for name, fn in tasks]
    report = Report(settings, [])
    for (name, _), (outcome, elapsed) in zip(tasks, results):
        report.records.extend(outcome.records)
        report.slopes.update(outcome.slopes)
        report.convergence.update(outcome.convergence)
        report.timings[name] = round(elapsed, 3)
    report.timings["total"] = round(time.perf_counter() - start, 3)
    return report


def with_overrides(settings: Settings, **kw) -> Settings:
    return replace(settings, **{k: v for k, v in kw.items() if v is not None})
