"""Exception hierarchy shared across the package."""


class VccgmError(Exception):
    """Base class for all package errors."""


class DataError(VccgmError):
    """Problems with input data (CLI exit code 3)."""


class EmptyDataset(DataError):
    pass


class OutOfRange(DataError):
    pass


class InsufficientLabels(DataError):
    pass


class InsufficientSamples(DataError):
    pass


class InvalidMode(DataError):
    pass


class InvalidSpec(DataError):
    pass


class EmptyVicinity(DataError):
    def __init__(self, y_c, message=None):
        self.y_c = float(y_c)
        super().__init__(message or f"no samples with nonzero weight around y_c={self.y_c!r}")


class WindowTooSparse(DataError):
    def __init__(self, center, n_real, needed):
        self.center = float(center)
        self.n_real = int(n_real)
        self.needed = int(needed)
        super().__init__(
            f"window around center {self.center!r} has {self.n_real} real samples, needs {self.needed}"
        )


class InvalidCovariance(DataError):
    pass


class ShapeError(VccgmError, ValueError):
    pass


class NumericalError(VccgmError, ArithmeticError):
    """Non-finite value produced during a forward pass (CLI exit code 4)."""


class ConfigError(VccgmError, ValueError):
    """Invalid configuration (CLI exit code 2)."""
