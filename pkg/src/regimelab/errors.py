"""Exception hierarchy.

State indices in messages are 1-based, matching the state labels used in
configuration files and path exports.
"""


class RegimeLabError(Exception):
    """Base class for all package errors."""


class ModelInvalid(RegimeLabError, ValueError):
    """A generator or regime specification violates a model assumption."""


class NonSquare(ModelInvalid):
    def __init__(self, shape):
        super().__init__(f"rate matrix must be square with d >= 2, got shape {shape}")
        self.shape = shape


class NegativeRate(ModelInvalid):
    def __init__(self, i, j, value):
        super().__init__(f"negative rate lambda[{i},{j}] = {value}")
        self.i, self.j, self.value = i, j, value


class ZeroRate(ModelInvalid):
    """Off-diagonal rate is zero while strict positivity is required."""

    def __init__(self, i, j):
        super().__init__(
            f"rate lambda[{i},{j}] = 0; pass allow_zero_rates=True to permit structural zeros"
        )
        self.i, self.j = i, j


class ZeroExitRate(ModelInvalid):
    def __init__(self, i):
        super().__init__(f"state {i} has exit rate <= 0 (absorbing states are not allowed)")
        self.i = i


class RowMismatch(ModelInvalid):
    def __init__(self, i, diagonal, expected):
        super().__init__(
            f"row {i}: supplied diagonal {diagonal} inconsistent with -(sum of off-diagonals) = {expected}"
        )
        self.i, self.diagonal, self.expected = i, diagonal, expected


class ToleranceNotReached(RegimeLabError, ArithmeticError):
    def __init__(self, terms, tail):
        super().__init__(f"uniformization tail {tail:.3e} still above tolerance after {terms} terms")
        self.terms, self.tail = terms, tail


class OutOfHorizon(RegimeLabError, ValueError):
    def __init__(self, t, horizon):
        super().__init__(f"time {t} outside [0, {horizon}]")
        self.t, self.horizon = t, horizon


class UnsupportedOrder(RegimeLabError, ValueError):
    def __init__(self, m):
        super().__init__(f"jump-law comparison supports m in {{1, 2}}, got m={m}")
        self.m = m


class BadTimePoint(RegimeLabError, ValueError):
    def __init__(self, t, reason):
        super().__init__(f"time point {t}: {reason}")
        self.t = t


class ConfigParse(RegimeLabError, ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.key, self.line = key, line


class IoFailure(RegimeLabError, OSError):
    pass
