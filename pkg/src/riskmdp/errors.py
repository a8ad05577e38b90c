"""Exception hierarchy shared by all riskmdp modules."""


class RiskMdpError(Exception):
    """Base class for every error raised by this package."""


# distributions
class DistributionError(RiskMdpError, ValueError):
    pass


class NegativeProb(DistributionError):
    pass


class MassNotOne(DistributionError):
    pass


class EmptySupport(DistributionError):
    pass


class NegativeScale(DistributionError):
    pass


class LengthMismatch(DistributionError):
    pass


class BadWeights(DistributionError):
    pass


class BadLevel(DistributionError):
    pass


# risk measures
class RiskSpecError(RiskMdpError, ValueError):
    pass


class BadTau(RiskSpecError):
    pass


class BadEta(RiskSpecError):
    pass


class EmptyScenarios(RiskSpecError):
    pass


class EntropicOverflow(RiskSpecError):
    pass


# models
class ModelError(RiskMdpError):
    pass


class ParseError(ModelError, ValueError):
    pass


class ValidationError(ModelError, ValueError):
    """Raised when a model document violates an invariant.

    ``diagnostics`` holds one ``{"path": ..., "message": ...}`` dict per
    problem found.
    """

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [{"path": "", "message": diagnostics}]
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else {"path": "", "message": ""}
        more = len(self.diagnostics) - 1
        msg = f"{first['path']}: {first['message']}"
        if more > 0:
            msg += f" (+{more} more)"
        super().__init__(msg)


class SizeOverflow(ModelError, ValueError):
    pass


class NegativeAsk(ModelError, ValueError):
    pass


class InvalidBook(ModelError, ValueError):
    pass


# operators
class InadmissibleAction(RiskMdpError, IndexError):
    pass


class NoActions(RiskMdpError, ValueError):
    pass


# solver
class SolverError(RiskMdpError):
    pass


class NotStationary(SolverError, ValueError):
    pass


class NotNormalized(SolverError, ValueError):
    pass


class MaxItersExceeded(SolverError):
    pass


class PolicyIncomplete(SolverError, ValueError):
    pass


class BadArgs(SolverError, ValueError):
    pass


# oracle caps
class OracleCapError(RiskMdpError):
    pass


class TreeTooLarge(OracleCapError):
    pass


class EnumerationTooLarge(OracleCapError):
    pass


class TooManyActions(OracleCapError):
    pass
