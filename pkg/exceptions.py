#!/usr/bin/env python3
"""
Exceptions raised by the synchronization toolkit.

Library code raises these; the command-line front end maps them to exit codes.
"""

from typing import Optional


class SyncLabError(Exception):
    """Base class for every error raised by this package"""


class InvalidArgumentError(SyncLabError, ValueError):
    """An argument violates an operation's precondition (state out of range, n = 0, ...)"""


class ParseError(SyncLabError, ValueError):
    """Automaton text could not be parsed or validated"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.reason = message
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)

    def __reduce__(self):
        return (type(self), (self.reason, self.field, self.line))


class CapacityError(SyncLabError):
    """Input exceeds a size guard (quadratic pair table, subset search, enumeration)"""

    def __init__(self, what: str, size: int, limit: int):
        self.what = what
        self.size = size
        self.limit = limit
        super().__init__(f"{what}: size {size} exceeds limit {limit}")

    # worker processes send these back to the parent
    def __reduce__(self):
        return (type(self), (self.what, self.size, self.limit))


class ConfigError(SyncLabError):
    """An environment setting is missing or malformed"""


class ExperimentError(SyncLabError):
    """An experiment could not be run or a report could not be fitted"""
