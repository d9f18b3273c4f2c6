"""Exception types raised across ptdlab."""


class PtdlabError(Exception):
    """Base class for all library errors."""


class SingularMatrix(PtdlabError, ArithmeticError):
    """A pivot fell below the singularity threshold during elimination."""


class DegenerateChain(PtdlabError):
    """The Markov chain has no unique strictly positive stationary distribution."""


class ShapeMismatch(PtdlabError, ValueError):
    pass


class RankDeficientFeatures(PtdlabError, ValueError):
    """The feature matrix does not have full column rank."""


class NonFiniteUpdate(PtdlabError, FloatingPointError):
    """A learning update produced a non-finite value (the run diverged)."""


class InvalidLength(PtdlabError, ValueError):
    pass


class MdpFormatError(PtdlabError, ValueError):
    """Malformed MDP specification file."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno
