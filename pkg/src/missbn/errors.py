"""Exception hierarchy shared across the package.

Everything derives from :class:`MissbnError` so callers can catch data/model
problems with a single except clause (the CLI maps them to exit code 2).
"""

from __future__ import annotations


class MissbnError(Exception):
    """Base class for all errors raised by this package."""


class CycleDetected(MissbnError):
    def __init__(self, cycle_ids):
        self.cycle_ids = tuple(cycle_ids)
        super().__init__(f"directed cycle through variables {self.cycle_ids}")


class CptRowNotNormalized(MissbnError):
    def __init__(self, variable, row, total):
        self.variable = variable
        self.row = row
        self.total = total
        super().__init__(
            f"CPT row {row} of variable {variable} sums to {total!r}, expected 1"
        )


class DimensionMismatch(MissbnError):
    pass


class IncompleteInstantiation(MissbnError):
    def __init__(self, missing_ids):
        self.missing_ids = tuple(sorted(missing_ids))
        super().__init__(f"instantiation misses variables {self.missing_ids}")


class UnknownVariable(MissbnError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown variable {name!r}")


class UnknownStateLabel(MissbnError):
    def __init__(self, row, variable, label):
        self.row = row
        self.variable = variable
        self.label = label
        super().__init__(
            f"row {row}: label {label!r} is not a state of variable {variable!r}"
        )


class RaggedRow(MissbnError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"row {row} has the wrong number of cells")


class ParseError(MissbnError):
    def __init__(self, line, column, message):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class ZeroSupport(MissbnError):
    """A conditional estimate was requested on an event with no data support."""


class GroundSetTooLarge(MissbnError):
    pass


class EmptyCandidates(MissbnError):
    pass


class ScopeMismatch(MissbnError):
    pass


class DegenerateMechanism(MissbnError):
    """A cross-mechanism denominator probability is exactly zero."""


class NotEnoughObservedVariables(MissbnError):
    pass


class ZeroProbabilityEvidence(MissbnError):
    pass


class StateSpaceTooLarge(MissbnError):
    pass


class ZeroProbabilityInstance(MissbnError):
    def __init__(self, row):
        self.row = row
        super().__init__(f"test row {row} has probability zero under the model")


class StructureMismatch(MissbnError):
    pass


class DeadlineBeforeFirstIteration(MissbnError):
    """The time limit expired before EM completed a single iteration."""
