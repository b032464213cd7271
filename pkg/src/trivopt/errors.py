"""Exception hierarchy."""


class TrivoptError(Exception):
    pass


class ShapeError(TrivoptError, ValueError):
    """Operand dimensions do not match."""


class ContractError(TrivoptError, ValueError):
    """An input violates a documented precondition (e.g. asymmetric input to sym_eig)."""


class DomainError(TrivoptError, ValueError):
    """Argument outside the domain where a formula is defined."""


class ConstraintError(TrivoptError, ValueError):
    """A matrix does not satisfy the defining equations of its manifold."""


class SingularMatrixError(TrivoptError, ArithmeticError):
    def __init__(self, pivot_index, pivot_value=0.0):
        self.pivot_index = int(pivot_index)
        self.pivot_value = float(pivot_value)
        super().__init__(f"singular pivot at index {self.pivot_index} (|pivot| = {abs(pivot_value):.3e})")


class DivergenceError(TrivoptError, FloatingPointError):
    def __init__(self, iteration, reason):
        self.iteration = int(iteration)
        self.reason = reason
        super().__init__(f"diverged at iteration {self.iteration}: {reason}")
