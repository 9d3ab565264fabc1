"""Exception types shared across the package."""


class HypdetError(Exception):
    """Base class for all package errors."""


class PerturbationTooLarge(HypdetError):
    """Requested perturbation strength exceeds the documented hyperbolicity margin."""


class OrbitLeftDomain(HypdetError):
    """An orbit of a chart-model point left the isolating box."""


class DegenerateDirection(HypdetError):
    """Power iteration collapsed; no usable stable/unstable direction."""


class ConeViolation(HypdetError):
    """A cone condition failed; carries the witnessing point or pair."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NonHyperbolicMatrix(HypdetError):
    """Integer matrix has an eigenvalue on (or numerically near) the unit circle."""


class NewtonDiverged(HypdetError):
    """Newton continuation failed to converge for some periodic point."""

    def __init__(self, message, point=None, step=None):
        super().__init__(message)
        self.point = point
        self.step = step


class SingularLinearization(HypdetError):
    """Id - DT^m is numerically singular at a periodic point."""


class CollisionDetected(HypdetError):
    """Two continued periodic points merged within the dedupe radius."""


class OrientationNotTrivial(HypdetError):
    """sign det(DT^m | E^u) = -1 at some periodic point; zeta product unavailable."""


class EigenSolverFailure(HypdetError):
    """The nonsymmetric eigensolver did not converge."""


class BudgetExceeded(HypdetError):
    """Itinerary enumeration exceeded the configured budget."""


class InequalityViolated(HypdetError):
    """A numeric inequality assertion failed; carries the offending data."""

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data


class CrossCheckFailed(HypdetError):
    """Two independent routes to the same quantity disagree beyond tolerance."""

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data


class PoorFit(HypdetError):
    """Least-squares extrapolation residual exceeded its threshold."""


class EmptyFixedSet(HypdetError):
    """No periodic points available for a pressure sum."""


class GridTooCoarse(HypdetError):
    """Grid Nyquist frequency cannot resolve the requested dyadic band."""


class SupportMarginViolated(HypdetError):
    """Function mass too close to the periodic box boundary."""


class EmptyConstraintSet(HypdetError):
    """No sampled covector satisfied the cone constraint."""


class SingularResolvent(HypdetError):
    """Id - z*M_b too ill-conditioned to invert reliably."""


class AliasingRisk(UserWarning):
    """Oversampling factor below the documented anti-aliasing minimum."""


class EmptyWitness(UserWarning):
    """Some itineraries have too few witnesses; their nonemptiness is uncertain."""


class IllConditionedRoot(UserWarning):
    """A polynomial root carries backward error above threshold."""


class MissingArtifacts(HypdetError):
    """Report consolidation found no prior run outputs."""
