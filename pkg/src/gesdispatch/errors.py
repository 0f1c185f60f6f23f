"""Exception hierarchy shared across the package."""


class GesDispatchError(Exception):
    """Base class for all package errors."""


class InvalidDevice(GesDispatchError):
    """A device description violates a physical-parameter invariant."""


class NonFiniteResult(GesDispatchError):
    """A derived storage parameter evaluated to NaN/inf."""


class LengthMismatch(GesDispatchError):
    """Schedule and parameter horizons differ."""


class InvalidSpec(GesDispatchError):
    """A distribution spec violates a family invariant."""


class EmptySample(GesDispatchError):
    """Empirical quantile requested on an empty sample."""


class InvalidGamma(GesDispatchError):
    """Confidence parameter outside its admissible range."""


class InvalidProbability(GesDispatchError):
    """Probability argument outside [0, 1)."""


class OrderingViolation(GesDispatchError):
    """Comfort / available / physical bounds are not ordered as required."""


class InfeasibleBounds(GesDispatchError):
    """A tightened constraint interval is empty.

    Carries a list of (unit_id, t, lower, upper) tuples in ``entries``.
    """

    def __init__(self, entries):
        self.entries = list(entries)
        detail = ", ".join(
            f"unit={u} t={t} [{lo:.4g}, {hi:.4g}]" for u, t, lo, hi in self.entries[:5]
        )
        more = "" if len(self.entries) <= 5 else f" (+{len(self.entries) - 5} more)"
        super().__init__(f"empty tightened interval(s): {detail}{more}")


class NonTighteningCoefficient(GesDispatchError):
    """A discomfort coefficient would loosen a bound as discomfort grows."""


class NumericalFailure(GesDispatchError):
    """The LP backend failed for a reason other than infeasibility."""


class MaxIterationsExceeded(GesDispatchError):
    """Fixed-point loop hit its iteration cap; ``strategy`` holds the best iterate."""

    def __init__(self, message, strategy, trace):
        super().__init__(message)
        self.strategy = strategy
        self.trace = trace


class EmptyFleet(GesDispatchError):
    """Fleet aggregation or scenario loading got zero units."""


class MissingOnProb(GesDispatchError):
    """Reserve dispatch requested without on-state probabilities."""


class DimensionMismatch(GesDispatchError):
    """Strategy, realization batch, and fleet dimensions disagree."""


class ParseError(GesDispatchError):
    """A scenario file could not be parsed."""


class ValidationError(GesDispatchError):
    """Scenario validation failed; ``issues`` lists every violation found."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("scenario validation failed:\n" + "\n".join(f"  - {s}" for s in self.issues))
