"""
Toolkit Exceptions

Error hierarchy shared by the simulation core and the experiment commands.
Configuration-class errors map to exit code 2, budget/feasibility-class
errors to exit code 3.
"""


class ToolkitError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1
    hint = ""

    def __init__(self, message: str, hint: str = ""):
        super().__init__(message)
        if hint:
            self.hint = hint


class ConfigurationError(ToolkitError, ValueError):
    """Malformed or inconsistent input (bad parameters, grids, configs)"""

    exit_code = 2
    hint = "check the experiment config and command-line overrides"


class BoundaryValidationError(ConfigurationError):
    """Boundary function fails its validation-grid checks"""

    hint = "choose family parameters giving a nondecreasing f with f(t)/sqrt(t) decreasing"


class EnvelopeError(ConfigurationError):
    """Envelope function w is not increasing to infinity with w >= 1"""

    hint = "use a w family with w(h) >= 1, nondecreasing and unbounded"


class FeasibilityError(ToolkitError):
    """Monte Carlo budget or feasibility problem (too few survivors, exhausted attempts)"""

    exit_code = 3
    hint = "increase the path budget or lower the horizon"


class QuadratureError(FeasibilityError):
    """Adaptive quadrature did not converge or overflowed"""

    hint = "lower the cutoff or relax the quadrature tolerances"
