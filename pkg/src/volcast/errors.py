"""Exception hierarchy shared across the package.

Data-shaped problems (bad CSV rows, empty joins, missing instruments) and
numerical failures (diverged training) are kept in separate branches so the
CLI can map them to distinct exit codes.
"""


class VolcastError(Exception):
    """Base class for all package errors."""


class DataError(VolcastError):
    """A problem with input data or its shape."""


class NumericalError(VolcastError):
    """A numerical failure during training or evaluation."""


# --- market data -----------------------------------------------------------

class MalformedRow(DataError):
    def __init__(self, path, line_no, detail):
        super().__init__(f"{path}:{line_no}: {detail}")
        self.path = path
        self.line_no = line_no
        self.detail = detail


class DuplicateDate(DataError):
    pass


class EmptyFile(DataError):
    pass


class EmptyIntersection(DataError):
    pass


class EmptyWindow(DataError):
    pass


class TooShort(DataError):
    pass


class NonPositivePrice(DataError):
    pass


# --- features --------------------------------------------------------------

class WindowTooSmall(DataError):
    pass


class MissingInstrument(DataError):
    def __init__(self, symbols):
        if isinstance(symbols, str):
            symbols = (symbols,)
        self.symbols = tuple(symbols)
        super().__init__(", ".join(self.symbols))


class ConstantColumn(DataError):
    pass


class EmptyTrain(DataError):
    pass


class EmptyTest(DataError):
    pass


# --- network / training ----------------------------------------------------

class DimensionMismatch(DataError):
    pass


class NumericalDivergence(NumericalError):
    pass


# --- evaluation ------------------------------------------------------------

class LengthMismatch(DataError):
    pass


class EmptyInput(DataError):
    pass


class ConstantVector(DataError):
    pass


class ZeroActual(DataError):
    def __init__(self, index):
        super().__init__(f"actual value at index {index} is zero")
        self.index = index


class TooFew(DataError):
    pass


class DegenerateVariance(DataError):
    pass


# --- harness ---------------------------------------------------------------

class ConfigError(VolcastError):
    """Bad experiment configuration (unknown key, unparseable value)."""
