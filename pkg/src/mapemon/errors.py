"""Exception hierarchy shared by every layer of the monitoring stack."""


class MonitorError(Exception):
    """Base class for all errors raised by mapemon."""


class ConfigurationError(MonitorError):
    """A declaration does not fit the monitoring configuration."""


class DuplicateSensorError(ConfigurationError):
    pass


class UnknownSensorError(MonitorError):
    pass


class CompositionError(MonitorError):
    """Two measurements for the same property were handed to the composer."""


class InstrumentationError(MonitorError):
    pass


class InactiveSensorError(MonitorError):
    pass


class AlreadyAttachedError(MonitorError):
    pass


class NotAttachedError(MonitorError):
    pass


class SchedulerError(MonitorError):
    pass


class AppendError(MonitorError):
    pass


class HistoryRangeError(MonitorError, ValueError):
    pass


class NotSubscribedError(MonitorError):
    pass


class LogParseError(MonitorError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class BuildError(ConfigurationError):
    pass


class UnknownGaugeError(MonitorError):
    pass


class EndOfScenarioError(MonitorError):
    pass
