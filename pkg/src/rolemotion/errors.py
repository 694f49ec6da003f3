"""Exception types shared across the package."""


class RoleMotionError(Exception):
    """Base class for package errors."""


class RobotFormatError(RoleMotionError):
    """Robot description file is malformed or violates an invariant."""


class ScenarioFormatError(RoleMotionError):
    """Scenario file is malformed or references unknown entities."""


class ConfigurationShapeError(RoleMotionError):
    """Configuration vector length does not match the chain."""


class DegenerateDirectionError(RoleMotionError):
    """A link direction is undefined (zero-length link)."""


class UnmappedPostureError(RoleMotionError):
    """Posture has no entry in the mapping table."""


class AlignmentError(RoleMotionError):
    """A task waypoint was never visited by the demonstrated hand."""


class CoverageError(RoleMotionError):
    """Demonstrated hand covers too little of a dense trajectory."""


class ExtractionError(RoleMotionError):
    """No valid postures could be extracted from a recording."""
