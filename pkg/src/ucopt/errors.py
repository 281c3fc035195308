"""Exception types shared across the package."""


class UcoptError(Exception):
    """Base class for package errors."""


class InvalidInstance(UcoptError):
    """Instance data violates a documented parameter constraint."""


class MalformedInput(UcoptError):
    """A file or document could not be parsed into the expected structure."""


class VersionMismatch(UcoptError):
    """Serialized payload carries an unsupported schema version."""


class ShapeMismatch(UcoptError):
    """An array argument has the wrong shape for the target problem."""


class MissingTags(UcoptError):
    """A problem lacks the variable/constraint tags an encoder needs."""


class IncompleteSolution(UcoptError):
    """A solution object does not carry values for every variable."""


class SchemaMismatch(UcoptError):
    """Weights or features disagree with the expected schema."""


class NonFiniteOutput(UcoptError):
    """A numeric pipeline produced NaN or infinity."""


class LpInfeasible(UcoptError):
    """An LP relaxation needed by a policy has no feasible point."""


class OutOfRange(UcoptError):
    """A score entry lies outside the open interval (0, 1)."""


class ProvenInfeasible(UcoptError):
    """An exact repair search proved that no feasible point exists."""


class NoFeasibleCommitment(UcoptError):
    """Feasibility restoration proved the instance has no commitment at all."""


class InstanceInfeasible(UcoptError):
    """Pool collection found the instance infeasible."""


class NoPositives(UcoptError):
    """No neighborhood candidate improved enough to label as positive."""


class IoFailure(UcoptError):
    """A dataset or report file could not be written or read."""


class MissingReference(UcoptError):
    """Metric computation lacks a reference objective for an instance."""


class MalformedCsv(UcoptError):
    """A load CSV row could not be parsed."""


class NumericalTrouble(UcoptError):
    """The LP kernel could not stabilize a basis."""
