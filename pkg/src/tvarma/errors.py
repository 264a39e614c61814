"""Exception types. Anything deriving from NumericalError maps to CLI exit code 3."""


class NumericalError(RuntimeError):
    pass


class PoleError(NumericalError):
    def __init__(self, lam, omega, magnitude):
        self.lam = lam
        self.omega = omega
        self.magnitude = magnitude
        super().__init__(
            f"ARMA denominator vanishes at lambda={lam:.6g}, omega={omega:.6g} (|1 + a^H v| = {magnitude:.3g})"
        )


class DivergenceError(NumericalError):
    pass


class DegenerateModelError(NumericalError):
    pass


class SingularCovarianceError(NumericalError):
    def __init__(self, message, condition, suggested_ridge):
        self.condition = condition
        self.suggested_ridge = suggested_ridge
        super().__init__(f"{message} (condition estimate {condition:.3g}; try ridge >= {suggested_ridge:.3g})")


class StageError(NumericalError):
    """Failure inside one named stage of the imputation pipeline."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
