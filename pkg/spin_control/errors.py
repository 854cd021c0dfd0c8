"""Exceptions raised by the spin network control package."""

from __future__ import annotations

from typing import Any


class SpinControlError(Exception):
    """Exception to indicate a general spin control error."""

    reason = "unknown"

    def __init__(self, msg: str, *, reason: str | None = None, **details: Any) -> None:
        """Store the message, a translation reason and any details."""
        super().__init__(msg)
        if reason is not None:
            self.reason = reason
        self.details = details


class SpinNetworkValidationError(SpinControlError):
    """Exception to indicate an invalid network, matrix or target document."""

    reason = "invalid_document"

    def __init__(self, msg: str, *, field: str, reason: str | None = None) -> None:
        """Remember which field was at fault."""
        super().__init__(msg, reason=reason, field=field)
        self.field = field


class ComponentNotConnectedError(SpinControlError):
    """Exception to indicate a vertex set that is not connected."""

    reason = "not_connected"


class BudgetExceededError(SpinControlError):
    """Exception to indicate a problem too large for a dense search."""

    reason = "budget_exceeded"


class LieClosureCapExceededError(SpinControlError):
    """Exception to indicate that the Lie closure grew past its cap."""

    reason = "lie_cap_exceeded"

    def __init__(self, msg: str, *, lower_bound: int) -> None:
        """Keep the dimension reached before giving up."""
        super().__init__(msg, lower_bound=lower_bound)
        self.lower_bound = lower_bound


class TargetError(SpinControlError):
    """Exception to indicate a target state outside the transfer setting."""

    reason = "invalid_target"


class NotDarkError(SpinControlError):
    """Exception to indicate a vector with weight on the accessible block."""

    reason = "not_dark"


class SectorMismatchError(SpinControlError):
    """Exception to indicate a state outside the schedule's sectors."""

    reason = "sector_mismatch"


class NormalizationDriftError(SpinControlError):
    """Exception to indicate loss of unitarity during propagation."""

    reason = "normalization_drift"


class SynthesisError(SpinControlError):
    """Exception to indicate a target no pulse schedule can produce."""

    reason = "synthesis_failed"


class InfeasibleTaskError(SpinControlError):
    """Exception to indicate a task blocked by a truly dark sector."""

    reason = "infeasible"

    def __init__(self, msg: str, *, blocker: tuple[int, ...] | None = None) -> None:
        """Keep the permutation that blocks the task."""
        super().__init__(msg, blocker=blocker)
        self.blocker = blocker


class NyquistError(SpinControlError):
    """Exception to indicate an under-sampled survival record."""

    reason = "nyquist"


class NoResolvablePeaksError(SpinControlError):
    """Exception to indicate a record without spectral content."""

    reason = "no_peaks"


class OverlappingPeaksError(SpinControlError):
    """Exception to indicate spectral lines closer than the resolution."""

    reason = "overlapping_peaks"


class SignResolutionError(SpinControlError):
    """Exception to indicate a phase scan below the noise floor."""

    reason = "sign_unresolved"
