"""Exception hierarchy shared by all modules."""


class MdrcError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(MdrcError, ValueError):
    pass


class NotPSD(MdrcError, ValueError):
    pass


class NonpositiveHorizon(MdrcError, ValueError):
    pass


class StepInvalid(MdrcError, ValueError):
    pass


class GridMismatch(MdrcError, ValueError):
    pass


class NotScalarOutput(MdrcError, ValueError):
    pass


class ScenarioInvalid(MdrcError, ValueError):
    pass


class RegularConditionViolated(MdrcError, ArithmeticError):
    """``Upsilon Upsilon^+ M != M``: the pseudo-inverse law is not admissible."""

    def __init__(self, msg, defect=None, index=None):
        super().__init__(msg)
        self.defect = defect
        self.index = index


class UpsilonSingular(MdrcError, ArithmeticError):
    """``B'RB`` is not positive definite, so the optimal control is not unique."""


class SingularAbar(MdrcError, ArithmeticError):
    pass


class NoConvergence(MdrcError, ArithmeticError):
    pass


class NonFiniteState(MdrcError, ArithmeticError):
    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class SingularStageHessian(MdrcError, ArithmeticError):
    pass
