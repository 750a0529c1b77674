"""
Calculation Engine

Exact arithmetic for quadratic extensions K/Q_p: p-adic numbers, cyclotomic
integers, unit quotients, characters, epsilon factors, the twist census
and the summation identities. Every module checks its invariants as it
computes.
"""

from app.calculations import (
    census,
    characters,
    cyclotomic,
    epsilon,
    errors,
    identities,
    padic,
    quotients,
)

__all__ = [
    "census",
    "characters",
    "cyclotomic",
    "epsilon",
    "errors",
    "identities",
    "padic",
    "quotients",
]
