class LplocError(Exception):
    """Base class for errors raised by this package."""


class PreconditionError(LplocError, ValueError):
    pass


class DepthExhausted(LplocError, ValueError):
    """The scale hierarchy is too shallow for the requested accuracy or level."""


class SolverError(LplocError, RuntimeError):
    pass


class ConfigError(LplocError, ValueError):
    pass
