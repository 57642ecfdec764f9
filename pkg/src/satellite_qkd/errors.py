"""Parameter validation shared by the domain dataclasses."""

from collections.abc import Iterable


class InvalidParameterError(ValueError):
    """Raised when a domain object is constructed with out-of-range parameters."""

    def __init__(self, owner: str, violations: Iterable[str]) -> None:
        self.owner = owner
        self.violations = list(violations)
        super().__init__(f"Invalid {owner}: " + "; ".join(self.violations))


def raise_for_violations(owner: str, violations: list[str]) -> None:
    """Raise InvalidParameterError if any violation was collected.

    Args:
        owner: Name of the object being validated (used in the message)
        violations: Messages of the form "<field>: <problem>"
    """
    if violations:
        raise InvalidParameterError(owner, violations)
