"""Exception taxonomy shared by every module in the package."""


class RiskMdpError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(RiskMdpError):
    """A JSON document does not have the expected shape (missing, extra, or mistyped fields)."""


class ValidationError(RiskMdpError):
    """A structurally well-formed model violates a semantic invariant.

    Carries the full list of validation issues in ``issues``.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        lines = "; ".join(i.message for i in self.issues)
        super().__init__(f"model validation failed: {lines}")


class DomainError(RiskMdpError):
    """An argument lies outside an operation's documented domain."""


class ZeroProbabilityObservation(RiskMdpError):
    """A Bayes update or posterior was requested for an observation of probability zero."""


class CapExceeded(RiskMdpError):
    """An enumeration (belief nodes, policies, paths) would exceed its configured cap."""
