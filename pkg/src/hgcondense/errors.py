"""Exception types raised by the condensation engine."""


class CondenseError(Exception):
    """Base class for all engine errors."""


class GraphLoadError(CondenseError):
    pass


class GraphValidationError(CondenseError):
    def __init__(self, issues):
        self.issues = list(issues)
        lines = "; ".join(str(i) for i in self.issues)
        super().__init__(f"graph failed validation: {lines}")


class ContractError(CondenseError, ValueError):
    """A caller violated an operation's precondition."""


class HierarchyError(CondenseError):
    pass


class PPRConvergenceError(CondenseError):
    def __init__(self, residual_norm, pushes):
        self.residual_norm = residual_norm
        self.pushes = pushes
        super().__init__(
            f"PPR push did not converge after {pushes} pushes "
            f"(residual 2-norm {residual_norm:.3e})"
        )


class OracleRefusal(CondenseError):
    """Exhaustive search would exceed the combinatorial cap."""
