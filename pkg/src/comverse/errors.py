"""Error taxonomy shared across the fedlet control plane, data plane, and CLI."""

from __future__ import annotations


class ComverseError(Exception):
    """Base class for all fedlet errors. `code` is the machine-readable error class."""

    code = "error"


class InvalidArgument(ComverseError):
    code = "invalid-argument"


class NotFound(ComverseError):
    code = "not-found"


class AlreadyMember(ComverseError):
    code = "already-member"


class DeliveryFailure(ComverseError):
    code = "delivery-failure"


class AuthError(ComverseError):
    code = "auth-error"


class InvalidKey(ComverseError):
    code = "invalid-key"


class KeyConflict(ComverseError):
    code = "key-conflict"


class AccessDenied(ComverseError):
    """Data access refused. `reason` is one of: auth, paused, revoked, acl, raw, membership."""

    code = "access-denied"

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"access denied ({reason})" + (f": {detail}" if detail else ""))


class SpecValidationError(ComverseError):
    """App spec rejected. Carries every violation found, not just the first."""

    code = "validation-error"

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InstantiationError(ComverseError):
    code = "instantiation-error"


class RoundAborted(ComverseError):
    code = "round-aborted"
