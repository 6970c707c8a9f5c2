class CrystabError(Exception):
    """Base class for every error raised by crystab."""


class ScenarioError(CrystabError, ValueError):
    """
    A scenario document or scenario object is invalid.

    Parameters:
    message (str): Human-readable description naming the failed constraint.
    field (str | None): The scenario key the error belongs to, if any.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
        self.message = message


class GridMismatchError(CrystabError, ValueError):
    pass


class ControlDesignError(CrystabError, ValueError):
    pass


class InvalidStateError(CrystabError, ValueError):
    """A state sample does not satisfy the constraints of its space."""


class RuntimeAbort(CrystabError):
    """A computation had to stop because the state left its admissible domain."""


class UnphysicalStateError(RuntimeAbort):
    pass


class SteadyStateError(RuntimeAbort):
    pass


class SimulationAbort(RuntimeAbort):
    pass


class CertificateError(RuntimeAbort):
    pass


class CertificateFailure(CrystabError):
    """
    Raised by ``verify --strict`` when a stability certificate does not hold.

    Parameters:
    message (str): Summary of the failed checks.
    report (object): The verification report that failed.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
