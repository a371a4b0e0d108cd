"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operands carry incompatible (n, N) dimensions."""


class AsymmetricTensorError(ValueError):
    """Input entries violate the required symmetry beyond tolerance."""


class LinearSolveError(RuntimeError):
    """The discrete linear system could not be solved to tolerance."""


class NonContractionError(RuntimeError):
    """Fixed-point iteration stopped contracting (violated smallness condition)."""


class StabilityGuardError(ValueError):
    """Perturbed operator too far from the solvable one; nested solve refused."""


class ConfigError(ValueError):
    """Run configuration is malformed or violates the schema."""
