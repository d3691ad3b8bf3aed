"""Exception types shared across the package."""


class ConfigInvalid(ValueError):
    """Protocol or trial parameters violate their invariants."""


class IllegalAction(ValueError):
    """A slot action is not permitted under the channel model."""


class DomainError(ValueError):
    """A formula is evaluated outside the range where it is defined."""


class SizeError(ValueError):
    """An exact oracle is asked for an instance larger than it supports."""


class PreconditionError(ValueError):
    pass


class ProtocolViolation(RuntimeError):
    """An engine-level safety assertion failed. Always a bug, never noise."""


class RoundCapExceeded(RuntimeError):
    """Raised by run_election when max_rounds is hit; carries the partial metrics."""

    def __init__(self, metrics):
        super().__init__(f"no leader after {metrics.rounds_used} rounds")
        self.metrics = metrics


class SlotBudgetExceeded(OverflowError):
    """A round is longer than the engine can represent; the round cap should have tripped first."""
