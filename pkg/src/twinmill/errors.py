"""Exception hierarchy shared by all twinmill modules."""


class TwinmillError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(TwinmillError):
    """An argument violates a documented precondition."""


class UnreachableTargetError(TwinmillError):
    """IK failed to converge; carries the best residual seen."""

    def __init__(self, message, pos_residual=None, rot_residual=None):
        super().__init__(message)
        self.pos_residual = pos_residual
        self.rot_residual = rot_residual


class SingularConfigurationError(TwinmillError):
    """A Jacobian or stiffness matrix is rank deficient."""


class ClosureError(TwinmillError):
    """The two flange poses are inconsistent with the coupling geometry."""

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class MalformedArcError(TwinmillError):
    """Arc start and end radii disagree."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class UnsupportedGcodeError(TwinmillError):
    """A G-code word outside the supported subset."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class PlanError(TwinmillError):
    """Setpoint generation failed; carries the offending pose index."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class WorkspaceError(PlanError):
    """A tool pose falls outside the declared workspace box."""


class ContinuityError(PlanError):
    """Joint-space jump between consecutive setpoints exceeds the guard."""


class DegenerateGeometryError(TwinmillError):
    """Point set is collinear or otherwise unusable for a rigid fit."""


class DegenerateSignalError(TwinmillError):
    """A measured signal carries no usable information (e.g. zero force)."""


class RankDeficiencyError(TwinmillError):
    """A least-squares fit has no unique solution."""


class ConfigError(TwinmillError):
    """System configuration file is invalid; carries the schema path."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path
