"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Shapes or sizes are inconsistent (mismatched L, K, N, r, ...)."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent (bad kind tag,
    infeasible ball radius, unknown option, ...)."""


class SingularGramError(RuntimeError):
    """A restricted Gram matrix T_{i,p} is singular and its inverse was
    requested (typically a partition block shorter than K_i)."""


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap without meeting its
    convergence criterion."""
