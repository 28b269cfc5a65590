"""Exception types shared across the package."""


class TemplanError(ValueError):
    """Base class for input and computation errors raised by templan."""


class NetworkError(TemplanError):
    """Malformed or inconsistent network / demand data."""


class NoPathError(TemplanError):
    """No open path exists between two nodes under the active filters."""


class HorizonError(TemplanError):
    """A time-stepped computation did not finish within its horizon."""


class FixtureError(TemplanError):
    """A fixture lacks an entry required by the requested evaluation."""
