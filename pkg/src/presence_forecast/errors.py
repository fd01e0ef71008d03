"""Error types raised by the engine.

Every error carries a stable ``code`` used on the wire and on the CLI's stderr.
"""


class EngineError(Exception):
    code = "EngineError"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.code = cls.__name__


class InsufficientHistory(EngineError):
    """No landmark transition precedes the query instant."""


class NoData(EngineError):
    """No cases are available to estimate a distribution."""


class NoSurvivingMass(EngineError):
    """Conditioning on elapsed time leaves no probability mass."""


class QuantileUnattainable(EngineError):
    """The requested probability exceeds the CDF's terminal mass."""


class ModelDegenerate(EngineError):
    """Training labels do not cover every target class."""


class NotFound(EngineError):
    """A query referenced an unknown user or appointment."""


class InvalidInput(EngineError, ValueError):
    """A precondition on the inputs was violated."""


class OutOfOrder(InvalidInput):
    """Events or records are not in nondecreasing time order."""


class MalformedQuery(InvalidInput):
    """A wire query could not be parsed."""
