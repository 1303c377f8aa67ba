"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a mathematical operation."""


class InfeasibleError(ValueError):
    """Requested counts or samples cannot be produced from the inputs."""


class DivergenceError(FloatingPointError):
    """Optimization produced a non-finite loss, gradient or scaling.

    ``positions`` lists the offending entries of a task stack, when known.
    """

    def __init__(self, message, positions=None):
        super().__init__(message)
        self.positions = list(positions or [])


class FeatureFormatError(ValueError):
    """A feature file is malformed. ``location`` holds a row index or byte offset."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class EvaluationError(RuntimeError):
    """A task failed during evaluation."""

    def __init__(self, task_index, cause):
        super().__init__(f"task {task_index} failed: {cause}")
        self.task_index = task_index
        self.cause = cause
