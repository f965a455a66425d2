"""Exception hierarchy shared across the toolkit."""


class NspregenError(Exception):
    """Base class for all toolkit errors."""


class OutOfRange(NspregenError):
    """A scalar argument falls outside its documented domain."""


class OutOfDomain(NspregenError):
    """A spatial coordinate lies outside the physical domain."""


class PlacementExhausted(NspregenError):
    """Obstacle rejection sampling ran out of attempts (over-constrained)."""


class AllSolid(NspregenError):
    """A mask contains no fluid cell."""


class UnbandedRe(NspregenError):
    """A Reynolds number falls in none of the declared difficulty bands."""


class DisconnectedDomain(NspregenError):
    """The fluid region is not a single connected component (or does not
    reach both the inlet and outlet for channel flow)."""


class PressureDiverged(NspregenError):
    """The pressure solve failed to converge within the iteration cap."""


class IncompatibleRhs(NspregenError):
    """Poisson right-hand side violates the zero-mean compatibility condition."""


class InvalidShape(NspregenError):
    """Array shape incompatible with the operation or format."""


class IoError(NspregenError):
    """Trajectory file could not be written or read."""


class BadMagic(IoError):
    """File does not start with the NST1 magic bytes."""


class VersionMismatch(IoError):
    """File format version is not supported by this reader."""


class CorruptPayload(IoError):
    """Payload is truncated, mis-sized, or contains non-finite values."""


class ShapeMismatch(NspregenError):
    """Paired trajectories have incompatible shapes."""


class UnpairedTrajectory(NspregenError):
    """A prediction has no ground-truth partner (or vice versa)."""


class ZeroDenominator(NspregenError):
    """The nMAE denominator is exactly zero."""


class MissingTier(NspregenError):
    """A cost table lacks one of the tiers required for a fit."""


class InfeasibleSeed(NspregenError):
    """The compute budget cannot cover even the fixed hard-seed examples."""


class ConfigError(NspregenError):
    """Run configuration failed schema validation (message names the field)."""
