"""Common exceptions."""

from typing import Iterable


__all__ = [
    "DAGNNError",
    "DimensionError",
    "ContractError",
    "InstanceInvalid",
    "SizeLimitExceeded",
    "ConfigError",
    "DataError",
    "DivergenceError",
    "SelfTestFailure",
]


class DAGNNError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class DimensionError(DAGNNError):
    """Indicates operands of incompatible shapes."""

    def __init__(self, operation: str, *shapes: tuple[int, ...]):
        super().__init__()
        self.operation = operation
        self.shapes = shapes

    def __str__(self):
        """Returns an error message."""
        shapes = " and ".join(str(shape) for shape in self.shapes)
        return f"Dimension mismatch in {self.operation}: {shapes}."


class ContractError(DAGNNError):
    """Indicates a violated call contract."""

    def __init__(self, message: str):
        super().__init__()
        self.message = message

    def __str__(self):
        """Returns an error message."""
        return self.message


class InstanceInvalid(DAGNNError):
    """Indicates that a problem instance violates its invariants."""

    exit_code = 2

    def __init__(self, reason: str):
        super().__init__()
        self.reason = reason

    def __str__(self):
        """Returns an error message."""
        return f"Invalid instance: {self.reason}"


class SizeLimitExceeded(DAGNNError):
    """Indicates that an instance is too large for brute-force enumeration."""

    def __init__(self, n: int, rows: int, max_n: int, max_rows: int):
        super().__init__()
        self.n = n
        self.rows = rows
        self.max_n = max_n
        self.max_rows = max_rows

    def __str__(self):
        """Returns an error message."""
        return (
            f"Instance too large for enumeration: n={self.n} (max {self.max_n}), "
            f"constraints={self.rows} (max {self.max_rows})."
        )


class ConfigError(DAGNNError):
    """Indicates an invalid configuration value."""

    def __init__(self, path: str, message: str):
        super().__init__()
        self.path = path
        self.message = message

    def __str__(self):
        """Returns an error message."""
        return f"Configuration error at {self.path!r}: {self.message}"


class DataError(DAGNNError):
    """Indicates missing or corrupt data files."""

    exit_code = 2

    def __init__(self, path: object, message: str):
        super().__init__()
        self.path = path
        self.message = message

    def __str__(self):
        """Returns an error message."""
        return f"{self.path}: {self.message}"


class DivergenceError(DAGNNError):
    """Indicates a non-finite loss during training."""

    exit_code = 3

    def __init__(self, phase: str, round_: int, epoch: int, step: int, value: float):
        super().__init__()
        self.phase = phase
        self.round = round_
        self.epoch = epoch
        self.step = step
        self.value = value

    def __str__(self):
        """Returns an error message."""
        return (
            f"Training diverged in {self.phase} phase "
            f"(round {self.round}, epoch {self.epoch}, step {self.step}): "
            f"loss = {self.value}."
        )


class SelfTestFailure(DAGNNError):
    """Indicates that one or more self-tests failed."""

    exit_code = 4

    def __init__(self, failures: Iterable[str]):
        super().__init__()
        self.failures = list(failures)

    def __str__(self):
        """Returns an error message."""
        return f"{len(self.failures)} self-test(s) failed: " + ", ".join(
            self.failures
        )
