"""Symbolic calculus of perturbation functionals, the Weyl normal form of
their scattering symbols, and a split-operator lab that checks the
defining relations numerically."""
from .errors import (
    ConfigError,
    ConfigNotFound,
    DimensionMismatch,
    DomainTooSmall,
    DynalgError,
    LoopError,
    MomentMismatch,
    NotLinearSector,
    OrderingViolation,
    SchemaViolation,
    SupportNotCovered,
    TailOverflow,
)
from .functionals import (
    Functional,
    GaussianShape,
    LoopPath,
    PolynomialShape,
    PotentialTerm,
    SampledPath,
    boundary_action,
    constant_functional,
    delta_pairing,
    evaluate,
    h_constant,
    kernel_integral,
    linear_functional,
    loop_from_difference,
    moment_equivalent,
    moments,
    shift_by_loop,
    time_translate,
)
from .interaction import (
    InteractionSpec,
    chi_functional,
    chi_window,
    interacting_boundary_action,
    relative_scattering,
    verify_interacting_relations,
)
from .piecewise import PiecewisePoly
from .schrodinger_lab import (
    Grid,
    PropagatorConfig,
    WaveState,
    check_causal_relation,
    check_dynamical_relation,
    coherent_state,
    evolve,
    free_evolve,
    scattering,
    scattering_inverse,
    weyl_apply,
)
from .weyl_algebra import (
    GroupWord,
    WeylElement,
    group_commutator,
    inverse,
    multiply,
    normalize,
    recover_commutators,
    weyl_of,
)

__version__ = "0.1.0"
