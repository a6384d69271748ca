"""
Exception hierarchy shared by every module.
Diagnostic operations return reports instead of raising; everything else raises one of these.
"""


class MicromorphicError(Exception):
    """Base class for all library errors"""

    kind = "error"


class InvalidSpecError(MicromorphicError, ValueError):
    kind = "invalid-spec"


class MeshDomainError(MicromorphicError, ValueError):
    kind = "mesh-domain"


class InvalidParametersError(MicromorphicError, ValueError):
    """Material parameters violate one or more admissibility inequalities"""

    kind = "invalid-parameters"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("violated: " + "; ".join(self.violations))


class SpaceMismatchError(MicromorphicError, ValueError):
    kind = "space-mismatch"


class BoundaryDataError(MicromorphicError, ValueError):
    kind = "boundary-data"


class CompatibilityError(MicromorphicError, ValueError):
    """Initial data disagree with the boundary data at t = 0"""

    kind = "compatibility"

    def __init__(self, report):
        self.report = report
        super().__init__(
            f"initial data incompatible with boundary data (max mismatch {report.max_mismatch:.3e})"
        )


class SolverError(MicromorphicError, RuntimeError):
    """Linear solve failed to reach its tolerance"""

    kind = "solver"

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        details = []
        if iterations is not None:
            details.append(f"iterations={iterations}")
        if residual is not None:
            details.append(f"residual={residual:.3e}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)


class EigenSolverError(SolverError):
    kind = "eigen-solver"


class ManufacturedCaseError(MicromorphicError, ValueError):
    kind = "manufactured-case"


class ConfigError(MicromorphicError, ValueError):
    """Bad run configuration; carries the offending line when known"""

    kind = "config"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
