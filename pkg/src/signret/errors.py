"""Exception hierarchy shared by all modules."""


class SignretError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SignretError, ValueError):
    """Input violates a documented invariant."""


class GridMismatchError(ValidationError):
    pass


class CommensurabilityError(ValidationError):
    """A lattice does not land on grid points or is not periodic on the grid."""


class ContainmentError(ValidationError):
    """A frequency support is not contained in M[-1/2, 1/2]^d."""


class NotStableSamplingError(ValidationError):
    def __init__(self, msg="not a stable sampling set"):
        super().__init__(msg)


class FrameError(ValidationError):
    pass


class CoverError(FrameError):
    def __init__(self, uncovered):
        self.uncovered = uncovered
        super().__init__(
            f"no good F-support overlap on working band: {len(uncovered)} uncovered bins"
            f" (first: {uncovered[:5]})"
        )


class OracleInfeasibleError(ValidationError):
    pass


class InconsistentMagnitudesError(SignretError):
    pass


class RecoveryError(SignretError, RuntimeError):
    def __init__(self, msg, best_residual=float("nan"), diagnostics=None):
        self.best_residual = best_residual
        self.diagnostics = diagnostics
        super().__init__(f"recovery failed: {msg} (best residual {best_residual:.3e})")


class NoInformativeOverlapError(SignretError):
    pass


class SignPropagationError(SignretError, RuntimeError):
    def __init__(self, components, detail=None):
        self.components = components
        msg = f"sign propagation incomplete: components {components}"
        super().__init__(msg if detail is None else f"{msg}; {detail}")


class PipelineError(SignretError, RuntimeError):
    """Wraps a failure in one stage of :func:`signret.stitching.full_pipeline`."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")
