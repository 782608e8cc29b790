"""Interaction-picture relative operations.

For an interaction ``V_I`` switched on by a time window ``χ`` the
relative operations ``S_χ(F) = S(-χV_I)⁻¹ S(F - χV_I)`` live in the free
algebra and obey the defining relations with the boundary action of the
Lagrangean ``½ẋ² - χ(t)V_I(x)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .functionals import (
    Functional,
    LoopPath,
    PotentialTerm,
    Shape,
    boundary_action,
)
from .piecewise import PiecewisePoly
from .schrodinger_lab import (
    PropagatorConfig,
    WaveState,
    check_causal_relation,
    check_dynamical_relation,
    free_provider,
    scattering_many,
)

__all__ = [
    "InteractionSpec",
    "chi_window",
    "chi_functional",
    "relative_scattering",
    "relative_provider",
    "interacting_boundary_action",
    "InteractionScenario",
    "verify_interacting_relations",
]


def chi_window(core: tuple[float, float], ramp: float = 0.5, kind: str = "smoothstep") -> PiecewisePoly:
    """Switching profile equal to one on ``core``.

    ``"smoothstep"`` adds C¹ cubic ramps of length ``ramp`` on both sides;
    ``"sharp"`` is the indicator of ``core``.
    """
    t0, t1 = core
    if kind == "sharp" or ramp == 0.0:
        return PiecewisePoly.constant(1.0, t0, t1)
    if kind != "smoothstep":
        raise ValueError(f"unknown window kind {kind!r}")
    # rise 3u² - 2u³ and fall 1 - 3u² + 2u³ on u ∈ [0, 1]
    scale = ramp ** np.arange(4)
    rise = np.array([0.0, 0.0, 3.0, -2.0]) / scale
    fall = np.array([1.0, 0.0, -3.0, 2.0]) / scale
    return PiecewisePoly.from_local(((t0 - ramp, t0, rise), (t0, t1, (1.0,)), (t1, t1 + ramp, fall)))


@dataclass(frozen=True)
class InteractionSpec:
    shape: Shape
    chi: PiecewisePoly
    core: tuple[float, float]
    dim: int = 1

    @classmethod
    def with_ramps(cls, shape: Shape, core: tuple[float, float], ramp: float = 0.5, kind: str = "smoothstep"):
        return cls(shape, chi_window(core, ramp, kind), tuple(core))

    def contains(self, support) -> bool:
        return support is None or (self.core[0] <= support[0] and support[1] <= self.core[1])


def chi_functional(spec: InteractionSpec) -> Functional:
    """``χV_I[x] = ∫ χ(t) V_I(x(t)) dt``."""
    return Functional(spec.dim, (), 0.0, (PotentialTerm(spec.chi, spec.shape),))


def relative_provider(spec: InteractionSpec):
    """Provider computing ``S_χ(F)`` (or its inverse) through two free scatterings."""
    chi_v = chi_functional(spec)

    def provider(states, F, cfg, inverse=False):
        if not inverse:
            out = scattering_many(states, F - chi_v, cfg)
            return scattering_many(out, -chi_v, cfg, inverse=True)
        out = scattering_many(states, -chi_v, cfg)
        return scattering_many(out, F - chi_v, cfg, inverse=True)

    return provider


def relative_scattering(psi: WaveState, F: Functional, spec: InteractionSpec, cfg: PropagatorConfig) -> WaveState:
    return relative_provider(spec)([psi], F, cfg)[0]


def interacting_boundary_action(loop: LoopPath, spec: InteractionSpec) -> Functional:
    """``δL₀(ẋ₀) + χV_I - (χV_I)^{x₀}``."""
    terms = (
        PotentialTerm(spec.chi, spec.shape),
        PotentialTerm(-spec.chi, spec.shape, loop),
    )
    free = boundary_action(loop)
    return Functional(free.dim, free.density, free.constant, terms)


@dataclass(frozen=True)
class InteractionScenario:
    F: Functional
    loop: LoopPath
    F1: Functional
    F2: Functional
    F3: Functional
    states: Sequence[WaveState]
    cfg: PropagatorConfig


def verify_interacting_relations(spec: InteractionSpec, scenario: InteractionScenario) -> dict:
    """Residuals of relations (i) and (ii) for the relative operations."""
    provider = relative_provider(spec)
    states = list(scenario.states)
    rel_i = check_dynamical_relation(
        provider,
        scenario.F,
        scenario.loop,
        states,
        scenario.cfg,
        boundary=lambda loop: interacting_boundary_action(loop, spec),
    )
    rel_ii = check_causal_relation(provider, scenario.F1, scenario.F2, scenario.F3, states, scenario.cfg)
    return {"relation_i": rel_i, "relation_ii": rel_ii}


def free_relations(scenario: InteractionScenario) -> dict:
    states = list(scenario.states)
    return {
        "relation_i": check_dynamical_relation(free_provider, scenario.F, scenario.loop, states, scenario.cfg),
        "relation_ii": check_causal_relation(
            free_provider, scenario.F1, scenario.F2, scenario.F3, states, scenario.cfg
        ),
    }
