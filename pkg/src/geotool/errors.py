"""Exception types shared across the toolkit."""


class GeotoolError(Exception):
    """Base class for all toolkit errors."""


class PointOutsideChart(GeotoolError):
    pass


class SingularMetric(GeotoolError):
    pass


class ResolutionTooCoarse(GeotoolError):
    pass


class DegenerateImmersion(GeotoolError):
    pass


class OrientationUnresolved(GeotoolError):
    pass


class NewtonDiverged(GeotoolError):
    pass


class BlowUpSuspected(GeotoolError):
    """Gradient cap exceeded; possible apparent horizon inside the domain."""


class SingularJacobian(GeotoolError):
    pass


class NotConverged(GeotoolError):
    pass


class NonpositiveH0(GeotoolError):
    pass


class NonpositiveH(GeotoolError):
    pass


class ZeroNormMeanCurvature(GeotoolError):
    pass


class ProfileDegenerate(GeotoolError):
    pass


class ModeRangeInsufficient(GeotoolError):
    pass


class NonpositiveConformalFactor(GeotoolError):
    pass


class ScenarioParseError(GeotoolError):
    """Scenario file malformed; carries a position annotation when available."""


class ScenarioInfeasible(GeotoolError):
    pass
