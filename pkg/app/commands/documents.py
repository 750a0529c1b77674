"""
Request and report documents for the command runners.

RunConfig is what a command was asked to do; ReportDocument is what it
found. The report echoes only the part of the config that decides the
results (ConfigEcho), so cache location, cache use and worker count
never change report bytes.
"""

from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator
from sympy import isprime

from app.calculations.cyclotomic import CycInt, QHalfScaled
from app.calculations.padic import make_extension
from app.calculations.quotients import check_level

COMMANDS = ("enumerate", "epsilon", "census", "verify", "identities")
SUITES = ("strata", "epsilon", "census", "deligne", "conventions", "identities")
FORMATS = ("json", "csv")


# ============================================================================
# REQUEST
# ============================================================================

class ConfigEcho(BaseModel):
    """The result-determining part of a run configuration."""

    command: str
    p: int
    extensions: List[str]
    n_max: int
    ratio_conductors: List[int] = Field(default_factory=list)
    theta_count: int = 4
    seed: int = 0
    suites: List[str] = Field(default_factory=list)
    character: Optional[str] = None
    additive: str = "psi0"
    samples: int = 20
    precision: int = 40
    dps: int = 30
    max_dps: int = 240
    format_version: int = 1


class RunConfig(ConfigEcho):
    """Everything a command run needs, validated before any table is built."""

    output: Optional[str] = None
    formats: List[str] = Field(default_factory=lambda: ["json"])
    cache_dir: str = "./.twist-cache"
    cache_enabled: bool = True
    workers: int = 1

    @field_validator("command")
    @classmethod
    def known_command(cls, v: str) -> str:
        if v not in COMMANDS:
            raise ValueError(f"unknown command {v!r}; expected one of {', '.join(COMMANDS)}")
        return v

    @field_validator("p")
    @classmethod
    def prime_p(cls, v: int) -> int:
        if not isprime(v):
            raise ValueError(f"p must be prime, got {v}")
        return v

    @field_validator("n_max")
    @classmethod
    def positive_n_max(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"n_max must be at least 1, got {v}")
        return v

    @field_validator("suites")
    @classmethod
    def known_suites(cls, v: List[str]) -> List[str]:
        unknown = [s for s in v if s not in SUITES]
        if unknown:
            raise ValueError(f"unknown suites {unknown}; expected a subset of {', '.join(SUITES)}")
        return v

    @field_validator("formats")
    @classmethod
    def known_formats(cls, v: List[str]) -> List[str]:
        unknown = [f for f in v if f not in FORMATS]
        if unknown:
            raise ValueError(f"unknown formats {unknown}; expected json and/or csv")
        return v

    @field_validator("theta_count", "samples", "workers")
    @classmethod
    def positive_count(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"counts must be positive, got {v}")
        return v

    @model_validator(mode="after")
    def within_level_policy(self) -> "RunConfig":
        if not self.extensions:
            raise ValueError("at least one extension tag is required")
        if self.max_dps < self.dps:
            raise ValueError(f"max_dps {self.max_dps} below dps {self.dps}")
        for tag in self.extensions:
            ext = make_extension(self.p, tag, self.precision)
            check_level(ext, self.working_level)
        return self

    @property
    def working_level(self) -> int:
        return max([self.n_max] + list(self.ratio_conductors))

    def echo(self) -> ConfigEcho:
        return ConfigEcho(**self.model_dump(include=set(ConfigEcho.model_fields)))


# ============================================================================
# REPORT
# ============================================================================

class CyclotomicModel(BaseModel):
    """sum coefficients[i] zeta_M^i, reduced mod Phi_M."""

    M: int
    coefficients: List[int]

    @classmethod
    def from_cyc(cls, value: CycInt) -> "CyclotomicModel":
        return cls(M=value.M, coefficients=[int(c) for c in value.coeffs])


class EpsilonModel(BaseModel):
    """value * q^(halfpow/2)."""

    value: CyclotomicModel
    q: int
    halfpow: int
    sign: Optional[int] = None

    @classmethod
    def from_value(cls, value: QHalfScaled, sign: Optional[int] = None) -> "EpsilonModel":
        return cls(value=CyclotomicModel.from_cyc(value.cyc), q=value.q, halfpow=value.halfpow, sign=sign)


class ConventionsModel(BaseModel):
    """Every convention the signs depend on, echoed per extension."""

    tag: str
    p: int
    kind: str
    ramified: bool
    d: int
    t: int
    q_K: int
    s: Optional[int] = None
    u_prime: Optional[int] = None
    min_poly: str
    pi_K: str
    pi_F: int
    x0: List[int]
    n_psi0: int
    c_normalization: str = "c = pi_K^(a(chi) + n(psi)), unit part 1"
    s_convention: str = "S(l): a(chi) = l and eps(chi^-1, psi0) = +1; S'(l): sign -1"
    omega_minus_one: int
    epsilon_omega: Optional[EpsilonModel] = None


class CharacterRow(BaseModel):
    encoding: str
    conductor: int
    eps_inverse: int
    eps_direct: int
    member_of: str


class StratumRow(BaseModel):
    conductor: int
    S_plus: int
    S_minus: int
    expected_total: Optional[int] = None


class CensusRowModel(BaseModel):
    conductor: int
    S_plus: int
    S_minus: int
    Rplus: int
    Rminus: int
    RDplus: int
    RDminus: int
    predicted: str
    basis: str
    verdict: str
    counterexample: Optional[str] = None
    flagged: List[str] = Field(default_factory=list)


class CensusModel(BaseModel):
    theta: str
    ratio_conductor: int
    rows: List[CensusRowModel] = Field(default_factory=list)


class CheckModel(BaseModel):
    name: str
    verdict: str
    checked: int = 0
    detail: Dict[str, Any] = Field(default_factory=dict)


class EpsilonQuery(BaseModel):
    encoding: str
    conductor: int
    additive: str
    c_exponent: int
    raw: CyclotomicModel
    eps: EpsilonModel
    sign_inverse: Optional[int] = None


class ExtensionReport(BaseModel):
    conventions: ConventionsModel
    characters: List[CharacterRow] = Field(default_factory=list)
    strata: List[StratumRow] = Field(default_factory=list)
    censuses: List[CensusModel] = Field(default_factory=list)
    checks: List[CheckModel] = Field(default_factory=list)
    identities: List[CheckModel] = Field(default_factory=list)
    epsilon: Optional[EpsilonQuery] = None


class ReportDocument(BaseModel):
    format_version: int
    command: str
    config: ConfigEcho
    extensions: List[ExtensionReport] = Field(default_factory=list)
    verdict: str = "PASS"


def jsonable(value: Any) -> Any:
    """Plain JSON data: string keys, lists for tuples, Python ints for numpy."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, Fraction):
        return str(value)
    if value is None or isinstance(value, (int, float, str)):
        return value
    return str(value)
