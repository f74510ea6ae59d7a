"""Exception hierarchy shared by every stage of the pipeline."""


class VbdError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ConfigError(VbdError):
    exit_code = 2


class ValidationError(VbdError):
    exit_code = 2


class MalformedGeometryError(ValidationError):
    pass


class FormatError(VbdError):
    pass


class EmptySampleError(VbdError):
    pass


class StiffnessError(VbdError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class NotConvergedError(VbdError):
    pass
