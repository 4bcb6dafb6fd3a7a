"""Exception types shared across the package."""


class MetricLabError(Exception):
    pass


class GroupSpecSyntaxError(MetricLabError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnsupportedNesting(GroupSpecSyntaxError):
    pass


class ElementError(MetricLabError, ValueError):
    """Malformed element, word or key for the given group."""


class NotGenerating(MetricLabError, ValueError):
    pass


class OutOfBall(MetricLabError, KeyError):
    """An element is not available in an enumerated window.

    ``reason`` is ``"radius"`` when the element is certainly farther than the
    window radius and ``"budget"`` when the enumeration or search stopped early.
    """

    def __init__(self, element, reason: str = "radius", detail: str = ""):
        self.element = element
        self.reason = reason
        msg = f"element outside window ({reason})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class BudgetExceeded(MetricLabError, RuntimeError):
    def __init__(self, count: int, completed_radius, budget: int):
        self.count = count
        self.completed_radius = completed_radius
        self.budget = budget
        super().__init__(
            f"element budget {budget} exceeded after {count} elements; "
            f"radius completed: {completed_radius}"
        )


class NonWordMetric(MetricLabError, ValueError):
    pass


class CacheMismatch(MetricLabError, ValueError):
    pass


class ConfigError(MetricLabError, ValueError):
    pass
