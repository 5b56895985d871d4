"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A physical or numerical parameter is outside its admissible range."""


class GridMismatchError(ValueError):
    """Two fields (or a field and an operator) live on different grids."""


class StepFailure(RuntimeError):
    """A time step could not be completed.

    ``equation`` carries the scalar equation that had no admissible root so
    callers can write a diagnostic record; ``step`` is filled in by the
    trajectory driver.
    """

    def __init__(self, message, equation=None, lam=None, step=None, t=None):
        super().__init__(message)
        self.equation = equation
        self.lam = lam
        self.step = step
        self.t = t

    def record(self):
        eq = self.equation
        out = {
            "status": "unsolvable",
            "message": str(self),
            "step": self.step,
            "t": self.t,
            "lambda": self.lam,
        }
        if eq is not None:
            out.update(
                scheme=eq.scheme,
                r_prev=eq.r_prev,
                sqrtEC=eq.sqrtEC,
                A=eq.A,
                B=eq.B,
                EN_prev=eq.EN_prev,
            )
        return out


class LambdaSearchError(StepFailure):
    """Even the weight ``lambda = 1`` produced no root."""


class OutputError(OSError):
    """Writing or reading a result file failed; the message names the path."""
