class DivergenceError(ArithmeticError):
    """A state or prediction became non-finite."""

    def __init__(self, message, *, time=None, step=None):
        super().__init__(message)
        self.time = time
        self.step = step


class FixedPointError(ArithmeticError):
    """An implicit step's fixed-point iteration did not converge."""

    def __init__(self, message, *, step=None):
        super().__init__(message)
        self.step = step
