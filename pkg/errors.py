"""Exceptions raised by the SIHT toolkit."""


class SihtError(Exception):
    """Base class for every error the toolkit raises on purpose."""


class InvalidArgumentError(SihtError, ValueError):
    """An argument is outside the domain of the operation."""


class DimensionMismatchError(InvalidArgumentError):
    """Vector and matrix shapes do not agree."""


class ProtocolError(SihtError):
    """The phase stream ended before the schedule was exhausted."""


class EnumerationLimitError(SihtError):
    """Exhaustive subset enumeration would exceed the configured cap."""

    def __init__(self, subsets: int, cap: int):
        super().__init__(f"Refusing to enumerate {subsets} subsets (cap is {cap})")
        self.subsets = subsets
        self.cap = cap


class OutputError(SihtError):
    """Reading or writing an artifact file failed."""

    def __init__(self, path, reason: str):
        super().__init__(f"I/O failure on {path}: {reason}")
        self.path = path
