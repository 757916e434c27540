class FuzzschedError(Exception):
    pass


class UsageError(FuzzschedError):
    """An operation was invoked in a state that does not allow it."""


class OrderingError(FuzzschedError):
    """Rounds were presented out of order."""


class ReportFormatError(FuzzschedError):
    pass


class ProtocolError(FuzzschedError):
    """An external adapter violated the line protocol."""


class SyncError(FuzzschedError):
    """Copying seeds into a fuzzer's local queue failed."""


class ConfigError(FuzzschedError):
    pass


class InvariantError(FuzzschedError):
    pass
