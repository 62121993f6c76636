class LaboratoryError(Exception):
    """Base class for every error raised by the laboratory services."""


class DomainError(LaboratoryError):
    def __init__(self, message, value=None):
        self.value = value
        super().__init__(f"Domain error: {message}")


class ConfigurationError(LaboratoryError):
    def __init__(self, message, setting=None):
        self.setting = setting
        super().__init__(f"Configuration error: {message}")


class CatalogError(LaboratoryError):
    def __init__(self, message, figure_id=None):
        self.figure_id = figure_id
        super().__init__(f"Catalog error: {message}")


class ConvergenceError(LaboratoryError):
    def __init__(self, message, best=None, residual=None, estimates=None):
        self.best = best
        self.residual = residual
        self.estimates = estimates
        super().__init__(f"No convergence: {message}")


class SingularMatrixError(LaboratoryError):
    def __init__(self, message, pivots=None, step=None):
        self.pivots = pivots or []
        self.step = step
        super().__init__(f"Singular system: {message}")


class MomentTableError(LaboratoryError):
    def __init__(self, message, required_k_max=None):
        self.required_k_max = required_k_max
        super().__init__(f"Moment table error: {message} (required k_max={required_k_max})")


class BranchLabelError(LaboratoryError):
    def __init__(self, message, point=None):
        self.point = point
        super().__init__(f"Branch labelling failed: {message}")


class TracingError(LaboratoryError):
    def __init__(self, message, position=None):
        self.position = position
        super().__init__(f"Trajectory tracing failed at {position}: {message}")


class PathPlanningError(LaboratoryError):
    def __init__(self, message, target=None):
        self.target = target
        super().__init__(f"No admissible path to {target}: {message}")


class RegimeError(LaboratoryError):
    def __init__(self, message, alpha=None):
        self.alpha = alpha
        super().__init__(f"Regime mismatch at alpha={alpha}: {message}")


NUMERICAL_FAILURES = (ConvergenceError, SingularMatrixError, BranchLabelError, TracingError, PathPlanningError)
