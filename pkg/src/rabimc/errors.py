"""Exception types shared across the package."""


class KernelDomainError(ValueError):
    """Imaginary time argument outside the open interval (0, beta)."""


class QuadratureAccuracyError(RuntimeError):
    """A quadrature or tabulation failed to reach the requested tolerance.

    Carries the achieved bound in ``achieved``.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved bound {achieved:.3e})")
        self.achieved = achieved


class UnsupportedBathOperation(TypeError):
    """Operation not defined for this bath kind (e.g. pointwise density of a mode list)."""


class DimensionBudgetError(RuntimeError):
    """Requested Hilbert-space dimension exceeds the configured dense-solver budget."""


class BracketingError(RuntimeError):
    """The coupling grid does not bracket the slope zero crossing.

    Carries the per-coupling slope values in ``slopes``.
    """

    def __init__(self, message: str, slopes):
        super().__init__(message)
        self.slopes = slopes


class FitDiagnosticError(RuntimeError):
    """A least-squares fit failed or was degenerate; ``residuals`` holds diagnostics."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConfigError(ValueError):
    """Malformed run configuration; message carries line/key diagnostics."""


class CheckpointMismatchError(RuntimeError):
    """Checkpoint parameters disagree with the current configuration.

    ``diff`` maps each mismatched key to ``(checkpoint_value, config_value)``.
    """

    def __init__(self, message: str, diff):
        lines = [message] + [f"  {k}: checkpoint={a!r} config={b!r}" for k, (a, b) in sorted(diff.items())]
        super().__init__("\n".join(lines))
        self.diff = diff
