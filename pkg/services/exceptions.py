class BudgetExceededException(Exception):
    """超出配置的计算预算"""

    def __init__(self, budget: str, limit: int, message: str = ""):
        self.budget = budget
        self.limit = limit
        super().__init__(message or f"budget exceeded: {budget} > {limit}")


class SolverNotApplicableException(Exception):
    """求解器前置条件不满足"""
    pass


class TransformNotApplicableException(Exception):
    """变换前置条件不满足"""
    pass
