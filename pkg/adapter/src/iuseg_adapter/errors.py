class AdapterError(Exception):
    """Base for everything this package raises on purpose."""


class UsageError(AdapterError):
    pass


class DataError(AdapterError):
    pass


class IOFailure(AdapterError):
    pass
