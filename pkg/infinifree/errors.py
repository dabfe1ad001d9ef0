"""
Exception hierarchy. Validation failures derive from ValueError and numerical
failures from ArithmeticError, so callers that only know the builtins still
catch them.
"""

__all__ = [
    'InfinifreeError', 'ValidationError', 'SizeCapError',
    'CrossingPartitionError', 'DimensionError', 'MissingOrderError',
    'MissingReferenceError', 'NumericalError', 'SingularError',
    'SeriesRegimeError', 'PoleError', 'ConvergenceError',
]


class InfinifreeError(Exception):
    pass


class ValidationError(InfinifreeError, ValueError):
    pass


class SizeCapError(ValidationError):
    pass


class CrossingPartitionError(ValidationError):
    pass


class DimensionError(ValidationError):
    pass


class MissingOrderError(ValidationError):
    pass


class MissingReferenceError(ValidationError):
    pass


class NumericalError(InfinifreeError, ArithmeticError):
    pass


class SingularError(NumericalError):
    pass


class SeriesRegimeError(NumericalError):
    pass


class PoleError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass
