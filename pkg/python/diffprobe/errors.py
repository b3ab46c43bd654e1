"""
Exception families shared across diffprobe

Concrete exceptions live next to the code that raises them. Each one derives
from one of the families below, which the CLI maps to exit codes:

- InputError       -> exit 2 (bad files, bad words, bad schemas)
- RunnerIOError    -> exit 3 (unresumable runtime IO failures)
- StatisticsError  -> exit 4 (degenerate input, joins too small)
"""


class DiffProbeError(Exception):
    """Base class for every error raised by diffprobe"""
    pass


class InputError(DiffProbeError):
    """Raised when user-supplied input cannot be used"""
    pass


class RunnerIOError(DiffProbeError):
    """Raised when the runner cannot read or write its run directory"""
    pass


class StatisticsError(DiffProbeError):
    """Raised when a statistic cannot be computed from the given data"""
    pass


class MissingMetric(InputError):
    """Raised when a record or aggregate lacks the metric a computation needs"""

    def __init__(self, metric: str, where: str = ""):
        self.metric = metric
        self.where = where
        suffix = f" ({where})" if where else ""
        super().__init__(f"Missing metric '{metric}'{suffix}")


class InputFileError(InputError):
    """Raised when an input file cannot be opened or read"""

    def __init__(self, path, cause: Exception):
        self.path = str(path)
        self.cause = cause
        super().__init__(f"Cannot read '{self.path}': {cause}")


class ProtocolFailure(DiffProbeError):
    """
    Raised when a trial cannot continue because the agent or game broke the
    interaction contract (unparseable replies, transport failure, schema errors)

    The harness records the trial as outcome ProtocolFailure; it is a loss
    that is counted separately.
    """

    def __init__(self, reason: str, metrics: dict = None):
        self.reason = reason
        self.metrics = dict(metrics or {})
        super().__init__(reason)
