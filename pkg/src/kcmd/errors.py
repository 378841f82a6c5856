"""Exception hierarchy.

Every error raised deliberately by the package derives from
:class:`KcmdError`.  Errors surfaced by the pipeline are wrapped in
:class:`StageError` so callers (the CLI in particular) can tell which stage
failed.
"""


class KcmdError(Exception):
    """Base class for all package errors."""


class ValidationError(KcmdError, ValueError):
    """A dataset or value violates its invariants.

    ``violations`` lists every problem found, not just the first one.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ShapeError(ValidationError):
    """Incompatible shapes or grids between values or matrices."""


class BandwidthError(KcmdError, ValueError):
    """Non-positive bandwidth or kernel order too low for the dimension."""


class DegenerateDensityError(KcmdError, ArithmeticError):
    """Kernel density estimate too close to zero at some sample point."""

    def __init__(self, index, value):
        self.index = int(index)
        self.value = float(value)
        super().__init__(
            f"degenerate density at observation {self.index} "
            f"(f_hat={self.value:.3g}); increase bandwidth"
        )


class GcvDegenerateError(KcmdError, ArithmeticError):
    """Every bandwidth candidate was rejected by the GCV guards."""


class DegenerateCovariateError(KcmdError, ValueError):
    """A covariate block has no spread (all pairwise distances are zero)."""


class StageError(KcmdError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


class ConfigError(KcmdError, ValueError):
    """Invalid tunable in a :class:`~kcmd.pipeline.TestConfig`."""
