"""
Domain errors for the calculation engine.

Input and precision problems are ValueErrors, like every other invalid
input in the engine. InvariantError marks a broken mathematical
invariant and is never expected on correct code.
"""

from typing import Optional


class PrecisionError(ValueError):
    """A result would carry digits that are not determined."""


class CatalogError(ValueError):
    """Unknown extension tag, or p is not prime."""


class LevelPolicyError(ValueError):
    """Requested level exceeds the per-p level policy."""


class HypothesisError(ValueError):
    """Operation called outside its hypotheses."""


class InfeasibleError(ValueError):
    """No object satisfies the requested conductor data."""


class RegularityError(ValueError):
    """A character that must be regular satisfies theta = conj(theta)."""


class CacheIntegrityError(ValueError):
    """A cached table failed its version or structure checks."""


class InvariantError(RuntimeError):
    """A hard invariant failed."""


class SignError(ValueError):
    """Base class for failures while certifying an epsilon sign. Exit status 1."""

    reason = "sign"

    def __init__(self, message: str, detail: Optional[dict] = None):
        super().__init__(f"{self.reason}: {message}")
        self.detail = detail or {}


class NotUnimodularError(SignError):
    reason = "not-unimodular"


class NotRealError(SignError):
    reason = "not-real"


class UnseparatedError(SignError):
    reason = "unseparated"


class ModulusMismatchError(SignError):
    reason = "modulus-mismatch"
