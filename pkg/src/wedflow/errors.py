"""Exception hierarchy.

Every error carries a short machine-readable ``kind`` and the CLI exit code
it maps to.
"""


class WedflowError(Exception):
    kind = "error"
    exit_code = 1

    def __init__(self, message="", report=None):
        super().__init__(message)
        # partial result attached by iterative solvers, if any
        self.report = report


class GridTooSmall(WedflowError):
    kind = "grid_too_small"
    exit_code = 3


class BadExponent(WedflowError):
    kind = "bad_exponent"
    exit_code = 3


class MonotonicityViolation(WedflowError):
    kind = "monotonicity_violation"
    exit_code = 3


class NonSeparable(WedflowError):
    kind = "non_separable"
    exit_code = 3


class BadBounds(WedflowError):
    kind = "bad_bounds"
    exit_code = 3


class ExponentMismatch(WedflowError):
    kind = "exponent_mismatch"
    exit_code = 3


class DomainViolation(WedflowError):
    kind = "domain_violation"
    exit_code = 4


class InnerSolveFailed(WedflowError):
    kind = "inner_solve_failed"
    exit_code = 5


class NewtonFailed(WedflowError):
    kind = "newton_failed"
    exit_code = 5


class MaxIterExceeded(WedflowError):
    kind = "max_iter_exceeded"
    exit_code = 6


class LineSearchFailed(WedflowError):
    kind = "line_search_failed"
    exit_code = 6


class DivergenceDetected(WedflowError):
    kind = "divergence_detected"
    exit_code = 7


class MaxOuterIterExceeded(WedflowError):
    kind = "max_outer_iter_exceeded"
    exit_code = 7


class BracketInvalid(WedflowError):
    kind = "bracket_invalid"
    exit_code = 8


class ConfigInvalid(WedflowError):
    kind = "config_invalid"
    exit_code = 2
