"""Exception hierarchy shared by every module of the package."""


class HMMError(Exception):
    """Base class for all package errors."""


class InputError(HMMError, ValueError):
    """Malformed data or arguments supplied by the caller."""


class IngestError(InputError):
    """A data file could not be parsed.

    Carries the 1-based ``row`` and ``column`` of the offending cell when known.
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class BoundaryError(HMMError, ValueError):
    """A probability sits on the boundary of the simplex where logits are undefined."""

    def __init__(self, parameter, value):
        super().__init__(f"{parameter} = {value!r} is not strictly positive; logits undefined")
        self.parameter = parameter
        self.value = value


class DegenerateConfigurationError(HMMError, ArithmeticError):
    """An observed sequence has zero probability under the current parameters."""


class EmptyStateError(HMMError, ArithmeticError):
    """An M-step denominator vanished, so a state's distribution is undefined."""

    def __init__(self, block, state):
        super().__init__(f"no expected mass for {block} of state {state}; cannot normalize")
        self.block = block
        self.state = state


class BootstrapUnreliableError(HMMError, RuntimeError):
    """Too many bootstrap replicates failed to produce a usable fit."""


class OracleError(HMMError, RuntimeError):
    """A reference computation could not be carried out (size guard, non-finite values)."""


class NonMaximumWarning(UserWarning):
    """The observed information is not positive semidefinite at a claimed maximum."""


class IdentifiabilityWarning(UserWarning):
    """The requested model cannot be identified from the data layout."""
