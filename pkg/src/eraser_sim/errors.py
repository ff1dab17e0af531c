"""Exception hierarchy shared by every layer of the package."""


class EraserSimError(Exception):
    """Base class for all package errors."""


class DimensionError(EraserSimError, ValueError):
    pass


class ShapeError(EraserSimError, ValueError):
    pass


class SubsystemIndexError(EraserSimError, IndexError):
    pass


class CompletenessError(EraserSimError, ValueError):
    pass


class DomainError(EraserSimError, ValueError):
    """A parameter lies outside its physical domain (e.g. k_c > k, t < 0)."""


class ConfigError(EraserSimError, ValueError):
    pass


class SequencingError(EraserSimError, RuntimeError):
    """The pulse sequence left the register in an unexpected state."""


class PairingError(EraserSimError, ValueError):
    pass


class UnidentifiableError(EraserSimError, ValueError):
    """The measurement design carries no information about k_c."""
