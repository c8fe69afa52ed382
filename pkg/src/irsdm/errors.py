"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Raised when a run configuration fails to parse or validate."""


class SingularChannelError(RuntimeError):
    """Raised when the stacked channel matrix is numerically rank deficient.

    Carries the offending singular values so callers can report conditioning.
    """

    def __init__(self, smallest: float, largest: float, threshold: float):
        self.smallest = smallest
        self.largest = largest
        self.threshold = threshold
        super().__init__(
            f"channel stack is numerically singular: smallest singular value "
            f"{smallest:.3e} < {threshold:.0e} * largest ({largest:.3e}); "
            f"users or eavesdropper are nearly collinear in channel space"
        )


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver diverges. Carries the iterate trace."""

    def __init__(self, message: str, trace=None):
        self.trace = list(trace) if trace is not None else []
        super().__init__(message)


class InfeasibleError(RuntimeError):
    """Raised when the power budget cannot meet the symbol design targets."""

    def __init__(self, p_min: float, p_max: float):
        self.p_min = p_min
        self.p_max = p_max
        super().__init__(
            f"design infeasible: minimum required power {p_min:.6g} mW exceeds "
            f"budget {p_max:.6g} mW"
        )
