"""Exception hierarchy shared across the toolkit."""


class SsdGcError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(SsdGcError, ValueError):
    pass


class ModelDegenerate(SsdGcError):
    """The birth-death chain is reducible, so its stationary vector is not unique."""

    def __init__(self, message: str, state: int, direction: str):
        super().__init__(message)
        self.state = state
        self.direction = direction


class ZeroProbabilityType(InvalidArgument):
    """An occupancy entry is zero where the construction needs strictly positive mass."""

    def __init__(self, message: str, state: int):
        super().__init__(message)
        self.state = state


class NoTypeZeroBlocks(ZeroProbabilityType):
    pass


class ConvergenceTimeout(SsdGcError):
    """ODE integration hit max_time before the drift fell below tolerance."""

    def __init__(self, message: str, last_state, residual: float, time: float):
        super().__init__(message)
        self.last_state = last_state
        self.residual = residual
        self.time = time


class AddressOutOfRange(InvalidArgument):
    pass


class SimulationAborted(SsdGcError):
    """Raised when a simulation cannot continue; carries a partial report and state dump."""

    def __init__(self, message: str, report=None, dump: str = ""):
        super().__init__(message)
        self.report = report
        self.dump = dump


class GcStarvation(SimulationAborted):
    pass


class GcDeadlock(SimulationAborted):
    pass


class InconclusiveRun(SsdGcError):
    """The workload ran dry before the durability budget was exhausted."""

    def __init__(self, message: str, progress: float, report=None):
        super().__init__(message)
        self.progress = progress
        self.report = report


class TraceParseError(SsdGcError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(SsdGcError):
    pass
