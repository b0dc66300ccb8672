"""Exception hierarchy shared by the solver modules."""


class TielineError(Exception):
    """Base class for all errors raised by this package."""


class CaseSyntaxError(TielineError):
    """The case document is not well-formed JSON."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class CaseSemanticError(TielineError):
    """The case parses but violates a named invariant.

    ``code`` is a short stable identifier such as ``"tie endpoint not boundary"``
    so callers and tests can match on the violated rule.
    """

    def __init__(self, code, detail=""):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}" if detail else code)


class NetworkError(TielineError):
    """Network cannot be assembled (disconnected area, bad reactance)."""


class NumericalError(TielineError):
    """A solver produced a result that fails its own certificate checks."""


class InfeasibleAreaError(TielineError):
    """An area LP is infeasible at the queried boundary angles."""


class RegionError(TielineError):
    """Critical-region construction failed (degenerate basis, empty region)."""


class ProtocolError(TielineError):
    """A system-operator response failed coordinator-side validation."""


class IterationLimitError(TielineError):
    """An iterative procedure hit its cap; ``ledger`` holds the partial trace."""

    def __init__(self, message, ledger=None):
        self.ledger = ledger or []
        super().__init__(message)


class NodeLimitError(TielineError):
    """Branch-and-bound exceeded its node budget."""

    def __init__(self, message, incumbent=None, bound=None):
        self.incumbent = incumbent
        self.bound = bound
        super().__init__(message)
