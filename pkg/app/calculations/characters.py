"""
Multiplicative Characters of K*

Characters of K* / U_K^(n) are stored as exponent functionals: chi takes
the value zeta_M^k_i on basis generator g_i of the unit quotient and
zeta_M^k_pi on pi_K, with one common root order M = lcm(4, 2 exp(U/U^n))
per character space.
"""

import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.calculations.cyclotomic import CycInt, lcm
from app.calculations.errors import (
    HypothesisError,
    InfeasibleError,
    InvariantError,
    PrecisionError,
)
from app.calculations.padic import KElem, PAdic, QuadExt
from app.calculations.quotients import (
    Pair,
    PiRelation,
    SubgroupImage,
    UnitQuotient,
    filtration_generators,
    kstar_structure,
    subgroup_image,
    uf_filtration_generators,
    uf_generators,
    unit_quotient,
)

logger = logging.getLogger(__name__)

ENCODING_PATTERN = re.compile(r"^N(\d+)/M(\d+):([0-9.]*)\|(\d+)$")


# ============================================================================
# OMEGA
# ============================================================================

@dataclass
class OmegaChar:
    """
    omega = omega_{K/F} on F*: trivial exactly on N(K*).

    Values on units are read off the norm-unit image at F-level m, which
    contains U_F^(m) because a(omega) <= m.
    """

    ext: QuadExt
    m: int
    group: UnitQuotient = field(repr=False)
    norms: SubgroupImage = field(repr=False)
    units_of_F: SubgroupImage = field(repr=False)
    conductor: int = 0
    at_pi_F: int = 1

    def value(self, u: int) -> int:
        """omega(u) for an integer unit u."""
        if u % self.ext.p == 0:
            raise HypothesisError(f"{u} is not a unit")
        return 1 if self.norms.contains(u) else -1

    @property
    def at_minus_one(self) -> int:
        return self.value(-1)

    def value_padic(self, x: PAdic) -> int:
        """
        omega(x) for x in F*, with x = unit * p^val.

        Raises:
            PrecisionError: If x is not known to m digits beyond its valuation
        """
        v = x.valuation()
        if x.prec - v < self.m:
            raise PrecisionError(f"omega needs {self.m} unit digits, have {x.prec - v}")
        # p = pi_F * (p / pi_F), and p / pi_F is the integer unit below
        cofactor = self.ext.pi_F_value // self.ext.p
        sign = self.value(x.unit % self.ext.p ** self.m)
        sign *= (self.at_pi_F * self.value(cofactor)) ** (v % 2)
        return sign

    def exponent(self, u: int, M: int) -> int:
        """omega(u) as an exponent mod M (M even)."""
        return 0 if self.value(u) == 1 else M // 2


@lru_cache(maxsize=None)
def omega_char(ext: QuadExt) -> OmegaChar:
    """
    Brute-force omega from the norm-unit image.

    Raises:
        InvariantError: If omega does not have conductor d and index-2 kernel
    """
    m = max(ext.d, 1)
    level = 2 * m if ext.ramified else m
    G = unit_quotient(ext, level)
    norms = subgroup_image(G, "norm-units")
    units_F = subgroup_image(G, "units-of-F")
    index = units_F.order // norms.order
    if units_F.order % norms.order or index != (2 if ext.ramified else 1):
        raise InvariantError(f"[U_F : N U_K] = {units_F.order}/{norms.order} for {ext.tag}")

    omega = OmegaChar(ext, m, G, norms, units_F)
    omega.conductor = next(
        c for c in range(m + 1)
        if all(norms.contains(g) for g in uf_filtration_generators(ext.p, c))
    )
    if omega.conductor != ext.d:
        raise InvariantError(f"a(omega) = {omega.conductor}, expected d = {ext.d}")
    # ramified: pi_F = -N(pi_K), so omega(pi_F) = omega(-1)
    omega.at_pi_F = omega.at_minus_one if ext.ramified else -1
    logger.debug(
        f"omega for {ext.tag}: a={omega.conductor}, omega(-1)={omega.at_minus_one}, "
        f"omega(pi_F)={omega.at_pi_F}"
    )
    return omega


# ============================================================================
# CHARACTER SPACE
# ============================================================================

@dataclass
class CharacterSpace:
    """Everything needed to build and evaluate characters at one level."""

    ext: QuadExt
    level: int
    group: UnitQuotient = field(repr=False)
    pi_relation: PiRelation
    omega: OmegaChar = field(repr=False)

    @cached_property
    def M(self) -> int:
        return lcm(4, 2 * self.group.exponent)

    @cached_property
    def steps(self) -> np.ndarray:
        """M / o_i: the exponent of chi(g_i) is a multiple of it."""
        return np.array([self.M // o for o in self.group.orders], dtype=np.int64)

    @cached_property
    def conj_matrix(self) -> np.ndarray:
        return self.group.conj_matrix

    @cached_property
    def v_vector(self) -> np.ndarray:
        return np.array(self.pi_relation.v, dtype=np.int64)

    @cached_property
    def w_vector(self) -> np.ndarray:
        if self.pi_relation.w is None:
            return np.zeros(self.group.rank, dtype=np.int64)
        return np.array(self.pi_relation.w, dtype=np.int64)

    @cached_property
    def uf_dlogs(self) -> List[Tuple[int, np.ndarray]]:
        return [(u, self.group.dlog(u)) for u in uf_generators(self.ext.p)]

    @cached_property
    def filtration(self) -> List[Tuple[int, np.ndarray]]:
        """(j, dlog) for the generators 1 + alpha^j r, 1 <= j < level."""
        out = []
        per_level = 1 if self.ext.ramified else 2
        gens = filtration_generators(self.group, 1) if self.level > 1 else []
        for i, g in enumerate(gens):
            out.append((1 + i // per_level, self.group.dlog(g)))
        return out

    @cached_property
    def omega_pi_exponent(self) -> int:
        return 0 if self.omega.at_pi_F == 1 else self.M // 2

    # ------------------------------------------------------------------

    def all_unit_parts(self) -> np.ndarray:
        """Every unit functional, lexicographic in the exponent vector."""
        if self.group.rank == 0:
            return np.zeros((1, 0), dtype=np.int64)
        axes = [np.arange(o, dtype=np.int64) * s for o, s in zip(self.group.orders, self.steps)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grid], axis=1)

    def conductors(self, K: np.ndarray) -> np.ndarray:
        """a(chi) for each row of unit functionals."""
        K = np.atleast_2d(K)
        nontrivial = (K % self.M != 0).any(axis=1) if K.shape[1] else np.zeros(len(K), bool)
        cond = np.where(nontrivial, 1, 0).astype(np.int64)
        for j, vec in self.filtration:
            hit = (K @ vec) % self.M != 0
            cond = np.where(hit, np.maximum(cond, j + 1), cond)
        return cond

    def conj_unit(self, K: np.ndarray) -> np.ndarray:
        if self.group.rank == 0:
            return K.copy()
        return (K @ self.conj_matrix) % self.M

    def make(self, unit_part: Sequence[int], pi_value: int) -> "MultChar":
        return MultChar(self, tuple(int(x) % self.M for x in unit_part), int(pi_value) % self.M)

    def trivial(self) -> "MultChar":
        return self.make([0] * self.group.rank, 0)


def character_space(ext: QuadExt, level: int, group: Optional[UnitQuotient] = None) -> CharacterSpace:
    """Build the character space at a working level."""
    if group is None:
        group, pi_rel = kstar_structure(ext, level)
    else:
        v = tuple(int(c) for c in group.dlog(ext.pi_conj_ratio))
        w = tuple(int(c) for c in group.dlog(ext.w)) if ext.ramified else None
        pi_rel = PiRelation(ext.pi_F_value, w, v)
    return CharacterSpace(ext, level, group, pi_rel, omega_char(ext))


# ============================================================================
# CHARACTERS
# ============================================================================

@dataclass(frozen=True)
class MultChar:
    """A character of K* / U_K^(n), values in mu_M."""

    space: CharacterSpace = field(repr=False, compare=False, hash=False)
    unit_part: Tuple[int, ...]
    pi_value: int

    @property
    def M(self) -> int:
        return self.space.M

    @property
    def level(self) -> int:
        return self.space.level

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.unit_part, dtype=np.int64)

    def sort_key(self) -> Tuple[int, ...]:
        return self.unit_part + (self.pi_value,)

    def __mul__(self, other: "MultChar") -> "MultChar":
        return self.space.make(
            [a + b for a, b in zip(self.unit_part, other.unit_part)],
            self.pi_value + other.pi_value,
        )

    def inverse(self) -> "MultChar":
        return self.space.make([-a for a in self.unit_part], -self.pi_value)

    def is_trivial(self) -> bool:
        return not any(self.unit_part) and self.pi_value == 0

    def unit_exponents(self, idx: np.ndarray) -> np.ndarray:
        """Exponents of chi at unit indices of the working group."""
        table = self.space.group.dlog_table[idx]
        if not self.unit_part:
            return np.zeros(len(idx), dtype=np.int64)
        return (table @ self.vector) % self.M

    def exponent_at_pair(self, pair: Pair) -> int:
        return int(self.space.group.dlog(pair) @ self.vector) % self.M if self.unit_part else 0

    def exponent_at(self, y: KElem) -> int:
        """
        Exponent of chi(y) mod M.

        Raises:
            PrecisionError: If the unit part of y is not known to level n
        """
        v = y.valuation()
        unit = y * y.ext.pi_K ** (-v)
        if unit.precision < self.level:
            raise PrecisionError(f"need precision {self.level} for chi, have {unit.precision}")
        return (v * self.pi_value + self.exponent_at_pair(self.space.group.pair_of(unit))) % self.M

    def __str__(self) -> str:
        return format_char(self)


@dataclass
class CharSet:
    """All chi with chi|F* = omega and a(chi) <= n_max, in canonical order."""

    space: CharacterSpace
    n_max: int
    chars: List[MultChar]
    conductor_of: Dict[Tuple[int, ...], int]

    def conductor(self, chi: MultChar) -> int:
        return self.conductor_of[chi.unit_part]

    def stratum(self, l: int) -> List[MultChar]:
        return [chi for chi in self.chars if self.conductor(chi) == l]

    def counts(self) -> Dict[int, int]:
        out: Dict[int, int] = {}
        for chi in self.chars:
            a = self.conductor(chi)
            out[a] = out.get(a, 0) + 1
        return dict(sorted(out.items()))

    def __len__(self) -> int:
        return len(self.chars)


def conductor(chi: MultChar) -> int:
    """Smallest m with chi trivial on U_K^(m)."""
    return int(chi.space.conductors(chi.vector[None, :])[0])


def eval_char(chi: MultChar, y: Union[KElem, Pair]) -> CycInt:
    """chi(y) as a root of unity in Z[zeta_M]."""
    if isinstance(y, tuple):
        return CycInt.zeta(chi.exponent_at_pair(y), chi.M)
    return CycInt.zeta(chi.exponent_at(y), chi.M)


def conjugate(chi: MultChar) -> MultChar:
    """conj(chi)(y) = chi(conj y); conj(pi_K) = pi_K * v."""
    space = chi.space
    unit = space.conj_unit(chi.vector[None, :])[0] if chi.unit_part else chi.vector
    pi = chi.pi_value + (int(chi.vector @ space.v_vector) if chi.unit_part else 0)
    return space.make(unit, pi)


def ratio_of(theta: MultChar) -> MultChar:
    """theta / conj(theta)."""
    return theta * conjugate(theta).inverse()


def restricts_to_omega(chi: MultChar) -> bool:
    """chi|F* = omega, checked on U_F generators and at pi_F."""
    space = chi.space
    for u, vec in space.uf_dlogs:
        got = int(vec @ chi.vector) % chi.M if chi.unit_part else 0
        if got != space.omega.exponent(u, chi.M):
            return False
    return _exponent_at_pi_F(chi) == space.omega_pi_exponent


def _is_trivial_on_F(chi: MultChar) -> bool:
    space = chi.space
    for _, vec in space.uf_dlogs:
        if chi.unit_part and int(vec @ chi.vector) % chi.M:
            return False
    return _exponent_at_pi_F(chi) == 0


def _exponent_at_pi_F(chi: MultChar) -> int:
    space = chi.space
    if not space.ext.ramified:
        return chi.pi_value
    w = int(chi.vector @ space.w_vector) if chi.unit_part else 0
    return (2 * chi.pi_value - w) % chi.M


def galois_ops(chi: MultChar) -> Tuple[MultChar, MultChar, bool]:
    """
    (conj, ratio, is_regular).

    Raises:
        InvariantError: If the ratio is nontrivial on F* or, for ramified K,
            has odd conductor
    """
    conj = conjugate(chi)
    ratio = chi * conj.inverse()
    if not _is_trivial_on_F(ratio):
        raise InvariantError(f"ratio of {chi} is nontrivial on F*")
    if chi.space.ext.ramified and conductor(ratio) % 2:
        raise InvariantError(f"a(ratio) = {conductor(ratio)} is odd for {chi}")
    return conj, ratio, not ratio.is_trivial()


def mu_char(space: Union[CharacterSpace, QuadExt]) -> MultChar:
    """mu = (-1)^{v_K}: trivial on units, -1 on pi_K."""
    if isinstance(space, QuadExt):
        space = character_space(space, 1)
    return space.make([0] * space.group.rank, space.M // 2)


# ============================================================================
# ENUMERATION
# ============================================================================

def expected_stratum_size(ext: QuadExt, l: int) -> Optional[int]:
    """
    Number of chi with chi|F* = omega and a(chi) = l, or None when l is
    not a possible conductor.
    """
    q, d = ext.q, ext.d
    if ext.ramified:
        if l == 2 * d - 1:
            return 2 * q ** (d - 1)
        if l >= 2 * d and l % 2 == 0:
            f = (l - 2 * d) // 2
            return 2 * (q - 1) * q ** (f + d - 1)
        return None
    # unramified: characters of U_K / U_F U^(l), times the one pi branch
    if l == 0:
        return 1
    upto = (q + 1) * q ** (l - 1)
    below = 1 if l == 1 else (q + 1) * q ** (l - 2)
    return upto - below


def enumerate_chars(ext: QuadExt, n_max: int,
                    space: Optional[CharacterSpace] = None) -> CharSet:
    """
    Every chi of K* with chi|F* = omega and a(chi) <= n_max.

    Raises:
        LevelPolicyError: If n_max exceeds the level policy
        InvariantError: On a failed completeness or spectrum check
    """
    if space is None:
        space = character_space(ext, n_max)
    if space.level < n_max:
        raise HypothesisError(f"space level {space.level} below n_max={n_max}")
    M = space.M

    K = space.all_unit_parts()
    keep = np.ones(len(K), dtype=bool)
    for u, vec in space.uf_dlogs:
        target = space.omega.exponent(u, M)
        keep &= (K @ vec) % M == target if K.shape[1] else target == 0
    K = K[keep]
    if len(K) == 0:
        raise InvariantError(f"omega does not extend to U_K at level {space.level}")

    cond = space.conductors(K)
    within = cond <= n_max
    K, cond = K[within], cond[within]

    chars: List[MultChar] = []
    conductor_of: Dict[Tuple[int, ...], int] = {}
    for row, a in zip(K, cond):
        unit = tuple(int(x) for x in row)
        conductor_of[unit] = int(a)
        for pi in _pi_branches(space, row):
            chars.append(MultChar(space, unit, pi))
    chars.sort(key=lambda c: c.sort_key())

    result = CharSet(space, n_max, chars, conductor_of)
    _check_enumeration(result)
    logger.info(f"Enumerated {len(chars)} characters for {ext.tag} up to conductor {n_max}: {result.counts()}")
    return result


def charset_from_rows(space: CharacterSpace, n_max: int, rows: Sequence[Sequence[int]]) -> CharSet:
    """
    Rebuild an enumeration from stored (k_1, ..., k_r, k_pi) rows.

    Raises:
        InvariantError: If the rows fail the completeness or restriction checks
    """
    rank = space.group.rank
    if any(len(r) != rank + 1 for r in rows):
        raise InvariantError(f"stored rows do not have {rank + 1} entries")
    chars = [MultChar(space, tuple(int(k) % space.M for k in r[:rank]), int(r[rank]) % space.M) for r in rows]
    units = sorted({chi.unit_part for chi in chars})
    K = np.array(units, dtype=np.int64).reshape(len(units), rank)
    conductor_of = {u: int(a) for u, a in zip(units, space.conductors(K))} if units else {}
    chars.sort(key=lambda c: c.sort_key())
    if len(set(chars)) != len(chars):
        raise InvariantError("stored rows repeat a character")
    result = CharSet(space, n_max, chars, conductor_of)
    _check_enumeration(result)
    return result


def char_rows(chars: CharSet) -> List[List[int]]:
    return [list(chi.unit_part) + [chi.pi_value] for chi in chars.chars]


def _pi_branches(space: CharacterSpace, row: np.ndarray) -> List[int]:
    """Exponents of chi(pi_K) compatible with chi(pi_F) = omega(pi_F)."""
    M = space.M
    if not space.ext.ramified:
        return [space.omega_pi_exponent]
    rhs = (space.omega_pi_exponent + (int(row @ space.w_vector) if len(row) else 0)) % M
    if rhs % 2:
        raise InvariantError("pi_K constraint has no solution")
    half = rhs // 2
    return sorted({half, (half + M // 2) % M})


def _check_enumeration(chars: CharSet) -> None:
    ext = chars.space.ext
    counts = chars.counts()
    for l in range(chars.n_max + 1):
        expected = expected_stratum_size(ext, l)
        got = counts.get(l, 0)
        if (expected or 0) != got:
            raise InvariantError(f"{ext.tag}: |{{a(chi) = {l}}}| = {got}, expected {expected or 0}")
    for chi in chars.chars:
        if not restricts_to_omega(chi):
            raise InvariantError(f"{chi} does not restrict to omega")
        if not (chi * conjugate(chi)).is_trivial():
            raise InvariantError(f"chi * conj(chi) != 1 for {chi}")


def pick_thetas(ext: QuadExt, target: int, count: int, seed: int = 0,
                space: Optional[CharacterSpace] = None) -> List[MultChar]:
    """
    Regular characters theta with a(theta / conj(theta)) = target.

    theta(pi_K) is set to 1: the ratio only sees theta on units there.
    Candidates are listed in canonical order; when there are more than
    count of them a seeded sample is drawn.

    Raises:
        InfeasibleError: If no regular theta has the target ratio conductor
    """
    if target < 0 or (ext.ramified and target % 2) or (not ext.ramified and target == 0):
        raise InfeasibleError(f"ratio conductor {target} is impossible for {ext.tag}")
    if space is None:
        space = character_space(ext, max(target, 1))
    if target > space.level:
        raise HypothesisError(f"target {target} above working level {space.level}")

    K = space.all_unit_parts()
    ratio_units = (K - space.conj_unit(K)) % space.M
    ratio_pi = (-(K @ space.v_vector)) % space.M if K.shape[1] else np.zeros(len(K), np.int64)
    cond = space.conductors(ratio_units)
    regular = ((ratio_units != 0).any(axis=1) if K.shape[1] else np.zeros(len(K), bool)) | (ratio_pi != 0)
    hits = np.flatnonzero((cond == target) & regular)
    if len(hits) == 0:
        raise InfeasibleError(f"no regular theta with a(theta/conj theta) = {target} at level {space.level}")
    if len(hits) > count:
        rng = np.random.default_rng(seed)
        hits = np.sort(rng.choice(hits, size=count, replace=False))
    thetas = [space.make(K[i], 0) for i in hits]
    logger.debug(f"Picked {len(thetas)} theta for {ext.tag} with ratio conductor {target} (seed {seed})")
    return thetas


# ============================================================================
# ENCODING
# ============================================================================

def format_char(chi: MultChar) -> str:
    """N<n>/M<M>:<k1>.<k2>...|<k_pi>"""
    units = ".".join(str(k) for k in chi.unit_part)
    return f"N{chi.level}/M{chi.M}:{units}|{chi.pi_value}"


def parse_char(text: str, space: CharacterSpace) -> MultChar:
    """
    Raises:
        ValueError: If the text is malformed or does not match the space
    """
    match = ENCODING_PATTERN.match(text.strip())
    if not match:
        raise ValueError(f"malformed character encoding: {text!r}")
    level, M = int(match.group(1)), int(match.group(2))
    if level != space.level or M != space.M:
        raise ValueError(f"{text!r} belongs to N{level}/M{M}, space is N{space.level}/M{space.M}")
    units = [int(k) for k in match.group(3).split(".")] if match.group(3) else []
    if len(units) != space.group.rank:
        raise ValueError(f"{text!r} has {len(units)} unit exponents, basis has {space.group.rank}")
    for k, step in zip(units, space.steps):
        if k % step:
            raise ValueError(f"{text!r}: exponent {k} is not a multiple of {step}")
    return space.make(units, int(match.group(4)))


def exponent_fraction(k: int, M: int) -> Fraction:
    return Fraction(k % M, M)
