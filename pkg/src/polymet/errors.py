"""Exception hierarchy shared by every polymet module."""


class PolymetError(Exception):
    """Base class for all polymet failures."""


# grid
class InvalidBounds(PolymetError, ValueError):
    pass


class ResolutionTooSmall(PolymetError, ValueError):
    pass


class SchemeUnsupported(PolymetError, ValueError):
    pass


class ChartMismatch(PolymetError, ValueError):
    pass


# metric cone
class NotSymmetric(PolymetError, ValueError):
    pass


class SignatureLost(PolymetError):
    pass


class InertiaMismatch(PolymetError):
    """Nodewise inertia disagrees with the declared one.

    ``report`` holds one record per failing component with the node index and
    chart coordinates of its first failure.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or []


class DegenerateBody(PolymetError, ValueError):
    pass


# connection / geometry
class SingularMetric(PolymetError):
    pass


class MapsOutsideChart(PolymetError):
    pass


class SingularJacobian(PolymetError):
    pass


class NonPeriodicChart(PolymetError, ValueError):
    pass


class SolverNonconvergence(PolymetError):
    pass


class OutsideChart(PolymetError):
    pass


class StepTooLarge(PolymetError):
    pass


# characteristic forms
class OddDimension(PolymetError, ValueError):
    pass


class TruncationTooHigh(PolymetError, ValueError):
    pass


class FamilyDiscontinuous(PolymetError):
    pass


# spectral
class EigensolveFailure(PolymetError):
    pass


class KernelGapTooSmall(PolymetError):
    pass


class PotentialNotCoercive(PolymetError, ValueError):
    pass


class NyquistKernel(PolymetError, ValueError):
    """Even grid on a periodic axis: centered stencils annihilate the Nyquist mode."""


# scales
class DisconnectedGraph(PolymetError):
    pass


class EmptySamples(PolymetError, ValueError):
    pass


# cli
class UnknownSuite(PolymetError, ValueError):
    pass


class ConfigInvalid(PolymetError, ValueError):
    pass


class IoFailure(PolymetError, OSError):
    pass
