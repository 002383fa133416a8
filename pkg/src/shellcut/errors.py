"""Exception hierarchy.

Every failure a caller can act on has its own class so the CLI can map
them onto exit statuses and reports can record which check broke.
"""


class ShellcutError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ShellcutError):
    pass


# geometry
class NonConvexProfile(ShellcutError):
    pass


class EmptyErosion(ShellcutError):
    pass


class IllConditionedFit(ShellcutError):
    pass


class NoSignChange(ShellcutError):
    pass


class NotNested(ShellcutError):
    pass


class DegenerateShell(ShellcutError):
    pass


# radial
class IntegrationFailure(ShellcutError):
    pass


class NoRootInScan(ShellcutError):
    pass


class ShapeViolation(ShellcutError):
    pass


class NoCrossing(ShellcutError):
    pass


class NotMonotone(ShellcutError):
    pass


# mesh / fem
class RayMiss(ShellcutError):
    pass


class MeshTooCoarse(ShellcutError):
    pass


class NotPositiveDefinite(ShellcutError):
    pass


class NoConvergence(ShellcutError):
    pass


class ZeroNorm(ShellcutError):
    pass


# flowcut
class StartOutsideMesh(ShellcutError):
    pass


class PreconditionViolated(ShellcutError):
    pass


class SubmeshDisconnected(ShellcutError):
    pass


class SignSpotCheckFailed(ShellcutError):
    pass


# verify
class ClassViolation(ShellcutError):
    pass
