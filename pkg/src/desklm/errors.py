"""Exception hierarchy shared by every subsystem."""


class DeskLMError(Exception):
    """Base class for all library errors."""


class ConfigError(DeskLMError, ValueError):
    pass


class ShapeError(DeskLMError, ValueError):
    pass


class InputError(DeskLMError, ValueError):
    """An argument is outside the domain the operation accepts (bad token id, bad target)."""


class DomainError(DeskLMError, ValueError):
    pass


class CapacityError(DeskLMError):
    """A sequence or cache would exceed its fixed capacity."""


class NumericError(DeskLMError, FloatingPointError):
    """A NaN or Inf showed up where finite values are required."""


class DecodeError(DeskLMError, ValueError):
    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class FormatError(DeskLMError, ValueError):
    """A persisted file is malformed or carries an unsupported format version."""


class ContextOverflowError(CapacityError):
    pass
