"""Exception hierarchy.

Every error raised by the package derives from :class:`TautPathError`, and
each subclass carries the CLI exit code it maps to.
"""


class TautPathError(Exception):
    exit_code = 1


class InputError(TautPathError, ValueError):
    exit_code = 2


# terrain / grid parsing
class MalformedGrid(InputError):
    pass


class MalformedHeader(MalformedGrid):
    pass


class DimensionMismatch(MalformedGrid):
    pass


class NonFiniteSample(MalformedGrid):
    pass


class InvalidSpec(InputError):
    pass


# meshes
class InvalidMesh(InputError):
    pass


class NodataInInterior(InvalidMesh):
    pass


class DegenerateTriangulation(InvalidMesh):
    pass


class SpacingTooCoarse(InvalidMesh):
    pass


class UnsupportedFaceArity(InvalidMesh):
    pass


class IndexOutOfRange(InvalidMesh):
    pass


class EmptyResult(InvalidMesh):
    pass


# truss conversion
class AnchorError(InputError):
    pass


class AnchorTooFar(AnchorError):
    pass


class AnchorsCoincide(AnchorError):
    pass


# solver
class AnchorsDisconnected(TautPathError):
    exit_code = 3


class SolverError(TautPathError):
    exit_code = 4


class NonConvergence(SolverError):
    pass


class NumericalBlowup(SolverError):
    pass


# extraction
class ExtractionError(TautPathError):
    exit_code = 5


class NoChain(ExtractionError):
    def __init__(self, message, suggested_threshold=None):
        super().__init__(message)
        self.suggested_threshold = suggested_threshold


class NotTaut(ExtractionError):
    pass


# oracle
class NotOnSphere(InputError):
    pass
