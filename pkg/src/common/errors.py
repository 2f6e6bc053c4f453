"""Exception hierarchy shared by every twoscale package.

ConfigError subclasses are problems with what the user asked for (CLI exit 2);
RuntimeFailure subclasses are problems hit while computing (CLI exit 3).
"""


def _restore(cls, args, state):
    exc = cls.__new__(cls)
    exc.args = args
    exc.__dict__.update(state)
    return exc


class TwoScaleError(Exception):
    area = "twoscale"

    def __reduce__(self):
        # subclass __init__ signatures differ from self.args
        return _restore, (type(self), self.args, self.__dict__)

    @property
    def qualified_name(self) -> str:
        return f"{self.area}.{type(self).__name__}"




class ConfigError(TwoScaleError):
    area = "config"


class RuntimeFailure(TwoScaleError):
    area = "runtime"


# model

class SpecError(ConfigError):
    area = "model"


class SingularW2(SpecError):
    def __init__(self, cond: float):
        super().__init__(f"W2 is singular or ill-conditioned (condition number {cond:.3e} > 1e12)")
        self.cond = cond


class NotPositiveDefinite(SpecError):
    def __init__(self, matrix: str, eigenvalue: float):
        super().__init__(
            f"{matrix} has an eigenvalue with real part {eigenvalue:.6g} <= 0; "
            f"all eigenvalues must have positive real part"
        )
        self.matrix = matrix
        self.eigenvalue = eigenvalue


class ScheduleError(ConfigError):
    area = "model"


class HorizonExceeded(RuntimeFailure):
    area = "model"

    def __init__(self, n: int, horizon: int):
        super().__init__(f"index {n} is beyond the explicit schedule horizon {horizon}")
        self.n = n
        self.horizon = horizon


# spectral

class NotStable(RuntimeFailure):
    area = "spectral"

    def __init__(self, eigenvalue: float):
        super().__init__(f"minimum eigenvalue real part {eigenvalue:.6g} is not positive")
        self.eigenvalue = eigenvalue


class MatrixExpOverflow(RuntimeFailure):
    area = "spectral"


# engine

class NonFinite(RuntimeFailure):
    area = "engine"

    def __init__(self, index: int):
        super().__init__(f"iterate became non-finite at step {index}")
        self.index = index


class MissingNoiseRecord(RuntimeFailure):
    area = "ode"


class DecompositionError(RuntimeFailure):
    area = "ode"


# bounds

class EpsilonOutOfRange(ConfigError):
    area = "bounds"

    def __init__(self, constraint: str):
        super().__init__(f"epsilon out of range: {constraint}")
        self.constraint = constraint


class AssumptionViolated(ConfigError):
    area = "bounds"

    def __init__(self, assumption: str, detail: str):
        super().__init__(f"{assumption} violated: {detail}")
        self.assumption = assumption


class DomainError(ConfigError):
    area = "bounds"


class ScanExhausted(RuntimeFailure):
    area = "bounds"

    def __init__(self, what: str, cap: int):
        super().__init__(f"scan for {what} exhausted its cap of {cap} indices")
        self.cap = cap


class NonSummable(RuntimeFailure):
    area = "bounds"


# rl

class RankDeficientFeatures(ConfigError):
    area = "rl"


class NonErgodic(ConfigError):
    area = "rl"


# harness

class InvalidInitialization(ConfigError):
    area = "harness"

    def __init__(self, radius: str, distance: float, limit: float):
        super().__init__(f"initial point violates {radius}: distance {distance:.6g} > {limit:.6g}")
        self.radius = radius


class WindowTooNoisy(RuntimeFailure):
    area = "harness"
