"""Exception types raised across the package."""


class DynalgError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(DynalgError, ValueError):
    pass


class MomentMismatch(DynalgError, ValueError):
    """Densities whose zeroth or first moments differ cannot be joined by a loop."""


class LoopError(DynalgError, ValueError):
    """A loop path is not continuously differentiable or not compactly supported."""


class DomainTooSmall(DynalgError, ValueError):
    pass


class NotLinearSector(DynalgError, ValueError):
    """A functional carries potential terms where only linear functionals are allowed."""


class TailOverflow(DynalgError, RuntimeError):
    """Wavefunction amplitude at the grid boundary exceeds the aliasing threshold."""


class SupportNotCovered(DynalgError, ValueError):
    pass


class OrderingViolation(DynalgError, ValueError):
    pass


class ConfigError(DynalgError):
    pass


class ConfigNotFound(ConfigError, FileNotFoundError):
    pass


class SchemaViolation(ConfigError, ValueError):
    pass
