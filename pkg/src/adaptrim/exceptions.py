"""Exception hierarchy shared by every module."""


class AdaptrimError(Exception):
    """Base class for all errors raised by this package."""


class TooFewInliers(AdaptrimError, ValueError):
    """Fewer measurements remain than the global solver needs."""


class ProblemTooSmall(TooFewInliers):
    pass


class SolverDegenerate(AdaptrimError, ArithmeticError):
    """The global solver could not produce a unique estimate for the subset.

    Recoverable: RANSAC routinely draws degenerate minimal samples.
    """


class RankDeficient(SolverDegenerate):
    pass


class DegenerateConfiguration(SolverDegenerate):
    pass


class InvalidResiduals(AdaptrimError, ValueError):
    """r(O) > r(empty): the problem violates trimming monotonicity."""


class InstanceTooLarge(AdaptrimError, ValueError):
    pass


class Infeasible(AdaptrimError):
    """No rejection of admissible size satisfies the outlier-free budget."""


class NoValidSample(AdaptrimError):
    pass


class ParseError(AdaptrimError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFormat(AdaptrimError, ValueError):
    pass


class TargetTooLarge(AdaptrimError, ValueError):
    pass


class ConfigError(AdaptrimError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
