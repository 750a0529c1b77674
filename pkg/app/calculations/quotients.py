"""
Unit Quotients U_K / U_K^(n)

Finite abelian groups of units of K modulo a principal-unit level, with
an explicit basis and a full discrete-log table.

Elements are integer pairs (a, b) standing for a + b*alpha, reduced
modulo (p^ceil(n/2), p^floor(n/2)) when K/F is ramified (alpha = pi_K)
and modulo (p^n, p^n) when it is unramified. A pair is addressed by its
index a * mod_b + b, so lexicographic order on pairs is index order.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import factorint, primitive_root

from app.calculations.errors import HypothesisError, InvariantError, LevelPolicyError
from app.calculations.padic import KElem, QuadExt

logger = logging.getLogger(__name__)

# Largest level n with U_K / U_K^(n) tabulated, per (ramified, p)
LEVEL_POLICY: Dict[Tuple[bool, int], int] = {
    (True, 2): 10,
    (True, 3): 8,
    (True, 5): 6,
    (False, 2): 6,
    (False, 3): 4,
    (False, 5): 3,
}
DEFAULT_RAMIFIED_LEVEL = 4
DEFAULT_UNRAMIFIED_LEVEL = 2

Pair = Tuple[int, int]


def max_level(ext: QuadExt) -> int:
    default = DEFAULT_RAMIFIED_LEVEL if ext.ramified else DEFAULT_UNRAMIFIED_LEVEL
    return LEVEL_POLICY.get((ext.ramified, ext.p), default)


def check_level(ext: QuadExt, n: int) -> None:
    """
    Raises:
        LevelPolicyError: If n is negative or beyond the policy for ext
    """
    limit = max_level(ext)
    if n < 0 or n > limit:
        raise LevelPolicyError(
            f"level exceeds precision policy: n={n}, allowed 0..{limit} for {ext.tag} at p={ext.p}"
        )


def moduli(ext: QuadExt, n: int) -> Tuple[int, int]:
    """(mod_a, mod_b) with P_K^n = {a + b*alpha : mod_a | a, mod_b | b}."""
    if ext.ramified:
        return ext.p ** ((n + 1) // 2), ext.p ** (n // 2)
    return ext.p ** n, ext.p ** n


def uf_generators(p: int) -> List[int]:
    """Topological generators of Z_p^*."""
    if p == 2:
        return [-1, 5]
    return [int(primitive_root(p * p))]


def uf_filtration_generators(p: int, c: int) -> List[int]:
    """Generators of U_F^(c) (U_F^(0) = U_F)."""
    if c == 0:
        return uf_generators(p)
    if p == 2 and c == 1:
        return [-1, 5]
    return [1 + p ** c]


# ============================================================================
# GROUP
# ============================================================================

@dataclass
class UnitQuotient:
    """U_K / U_K^(n) with basis and discrete logarithms."""

    ext: QuadExt
    n: int
    mod_a: int = field(init=False)
    mod_b: int = field(init=False)
    generators: List[Pair] = field(init=False, default_factory=list)
    orders: List[int] = field(init=False, default_factory=list)
    dlog_table: np.ndarray = field(init=False, repr=False)
    basis: Optional[Tuple[List[Pair], List[int]]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.mod_a, self.mod_b = moduli(self.ext, self.n)
        if self.basis is None:
            self._build()
        else:
            self._adopt(*self.basis)
        self.basis = None

    # ------------------------------------------------------------------
    # pair arithmetic on numpy arrays

    @property
    def size(self) -> int:
        return self.mod_a * self.mod_b

    @property
    def identity(self) -> Pair:
        return (1 % self.mod_a, 0)

    def index(self, a, b):
        return (np.asarray(a) % self.mod_a) * self.mod_b + np.asarray(b) % self.mod_b

    def split(self, idx):
        idx = np.asarray(idx)
        return idx // self.mod_b, idx % self.mod_b

    def mul(self, a1, b1, a2, b2):
        T, N = self.ext.T, self.ext.N
        bd = b1 * b2
        a = (a1 * a2 - N * bd) % self.mod_a
        b = (a1 * b2 + b1 * a2 + T * bd) % self.mod_b
        return a, b

    def power(self, a, b, e: int):
        """Elementwise (a + b*alpha)^e for e >= 0."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        ra = np.full_like(a, 1 % self.mod_a)
        rb = np.zeros_like(b)
        while e:
            if e & 1:
                ra, rb = self.mul(ra, rb, a, b)
            a, b = self.mul(a, b, a, b)
            e >>= 1
        return ra, rb

    def conj(self, a, b):
        return (np.asarray(a) + self.ext.T * np.asarray(b)) % self.mod_a, (-np.asarray(b)) % self.mod_b

    def norm(self, a, b):
        """x * conj(x), a pair lying in the image of U_F."""
        ca, cb = self.conj(a, b)
        return self.mul(np.asarray(a), np.asarray(b), ca, cb)

    # ------------------------------------------------------------------

    @cached_property
    def unit_indices(self) -> np.ndarray:
        """Indices of units, in canonical (lexicographic) order."""
        idx = np.arange(self.size, dtype=np.int64)
        if self.n == 0:
            return idx
        a, b = self.split(idx)
        if self.ext.ramified:
            mask = a % self.ext.p != 0
        else:
            mask = (a % self.ext.p != 0) | (b % self.ext.p != 0)
        return idx[mask]

    @property
    def order(self) -> int:
        return len(self.unit_indices)

    @property
    def exponent(self) -> int:
        e = 1
        for o in self.orders:
            e = int(np.lcm(e, o))
        return e

    @property
    def rank(self) -> int:
        return len(self.generators)

    def expected_order(self) -> int:
        if self.n == 0:
            return 1
        q_K = self.ext.q_K
        return (q_K - 1) * q_K ** (self.n - 1)

    def _build(self) -> None:
        if self.order != self.expected_order():
            raise InvariantError(
                f"|U/U^{self.n}| = {self.order}, expected {self.expected_order()}"
            )
        for ell, e in sorted(factorint(self.order).items()):
            self._sylow_basis(ell, e)
        self._tabulate()
        logger.info(
            f"U_K/U_K^({self.n}) for {self.ext.tag} at p={self.ext.p}: "
            f"order {self.order}, invariants {self.orders}"
        )

    def _adopt(self, generators: Sequence[Pair], orders: Sequence[int]) -> None:
        """Take a stored basis; the dlog tabulation re-checks that it spans exactly once."""
        if len(generators) != len(orders):
            raise InvariantError("basis and order lists differ in length")
        product = 1
        for o in orders:
            product *= int(o)
        if product != self.expected_order():
            raise InvariantError(f"basis order product {product} != {self.expected_order()}")
        self.generators = [(int(a), int(b)) for a, b in generators]
        self.orders = [int(o) for o in orders]
        self._tabulate()
        logger.debug(f"U_K/U_K^({self.n}) for {self.ext.tag} rebuilt from a stored basis")

    def _sylow_basis(self, ell: int, e: int) -> None:
        """
        Greedy basis of the ell-part: pick an element of maximal order in
        the quotient by what is already generated, then correct it by
        generated elements so that the new cyclic factor is direct.
        """
        cofactor = self.order // ell ** e
        a, b = self.split(self.unit_indices)
        sa, sb = self.power(a, b, cofactor)
        members = np.unique(self.index(sa, sb))
        if len(members) != ell ** e:
            raise InvariantError(f"Sylow {ell}-part has {len(members)} elements, expected {ell ** e}")

        gens: List[Pair] = []
        gen_orders: List[int] = []
        lookup, exps = self._enumerate(gens, gen_orders)

        while len(exps) < len(members):
            ma, mb = self.split(members)
            pending = lookup[members] < 0
            quotient_order = np.zeros(len(members), dtype=np.int64)
            ca, cb = ma, mb
            k = 0
            while pending.any():
                ca, cb = self.power(ca, cb, ell)
                k += 1
                landed = pending & (lookup[self.index(ca, cb)] >= 0)
                quotient_order[landed] = k
                pending &= ~landed
            k = int(quotient_order.max())
            pick = int(np.argmax(quotient_order == k))
            x = (int(ma[pick]), int(mb[pick]))

            ya, yb = self.power(x[0], x[1], ell ** k)
            coords = exps[lookup[int(self.index(ya, yb))]]
            xa, xb = np.int64(x[0]), np.int64(x[1])
            for g, o, c in zip(gens, gen_orders, coords):
                if int(c) % ell ** k:
                    raise InvariantError(f"lifting failed: coefficient {c} not divisible by {ell}^{k}")
                ga, gb = self.power(g[0], g[1], (-(int(c) // ell ** k)) % o)
                xa, xb = self.mul(xa, xb, ga, gb)
            gens.append((int(xa), int(xb)))
            gen_orders.append(ell ** k)
            lookup, exps = self._enumerate(gens, gen_orders)

        self.generators.extend(gens)
        self.orders.extend(gen_orders)

    def _enumerate(self, gens: Sequence[Pair], gen_orders: Sequence[int]):
        """All products of powers of gens: (index -> row lookup, exponent rows)."""
        ea = np.array([self.identity[0]], dtype=np.int64)
        eb = np.array([self.identity[1]], dtype=np.int64)
        exps = np.zeros((1, len(gens)), dtype=np.int64)
        for i, (g, o) in enumerate(zip(gens, gen_orders)):
            powers_a = [self.identity[0]]
            powers_b = [self.identity[1]]
            for _ in range(1, o):
                na, nb = self.mul(np.int64(powers_a[-1]), np.int64(powers_b[-1]),
                                  np.int64(g[0]), np.int64(g[1]))
                powers_a.append(int(na))
                powers_b.append(int(nb))
            new_a, new_b = self.mul(ea[:, None], eb[:, None],
                                    np.array(powers_a, dtype=np.int64)[None, :],
                                    np.array(powers_b, dtype=np.int64)[None, :])
            block = np.repeat(exps, o, axis=0)
            block[:, i] = np.tile(np.arange(o), len(exps))
            ea, eb, exps = new_a.reshape(-1), new_b.reshape(-1), block
        lookup = np.full(self.size, -1, dtype=np.int64)
        idx = self.index(ea, eb)
        if len(np.unique(idx)) != len(idx):
            raise InvariantError("generators are not independent")
        lookup[idx] = np.arange(len(idx))
        return lookup, exps

    def _tabulate(self) -> None:
        lookup, exps = self._enumerate(self.generators, self.orders)
        hit = lookup[self.unit_indices] >= 0
        if len(exps) != self.order or not hit.all():
            raise InvariantError("exponent enumeration does not cover U/U^n exactly once")
        table = np.full((self.size, self.rank), -1, dtype=np.int64)
        valid = lookup >= 0
        table[valid] = exps[lookup[valid]]
        self.dlog_table = table

    # ------------------------------------------------------------------

    def pair_of(self, x: Union[KElem, Pair, int]) -> Pair:
        """Reduce a unit of K (or an integer of F) to its pair at this level."""
        if isinstance(x, KElem):
            if self.ext.ramified:
                return x.residue_pair((self.n + 1) // 2, self.n // 2)
            return x.residue_pair(self.n, self.n)
        if isinstance(x, tuple):
            return x[0] % self.mod_a, x[1] % self.mod_b
        return x % self.mod_a, 0

    def dlog(self, x: Union[KElem, Pair, int]) -> np.ndarray:
        """
        Exponent vector of x on the basis.

        Raises:
            HypothesisError: If x is not a unit
        """
        a, b = self.pair_of(x)
        row = self.dlog_table[int(self.index(a, b))]
        if self.rank and row[0] < 0:
            raise HypothesisError(f"({a}, {b}) is not a unit modulo P_K^{self.n}")
        return row.copy()

    def dlog_many(self, idx: np.ndarray) -> np.ndarray:
        return self.dlog_table[idx]

    @cached_property
    def conj_matrix(self) -> np.ndarray:
        """Column i is dlog(conj(g_i)); conjugation acts on exponents by it."""
        cols = [self.dlog(tuple(int(v) for v in self.conj(g[0], g[1]))) for g in self.generators]
        if not cols:
            return np.zeros((0, 0), dtype=np.int64)
        return np.stack(cols, axis=1)

    def project(self, idx: np.ndarray, level: int) -> np.ndarray:
        """Indices at this level of the reductions to a lower level, as lifts."""
        ma, mb = moduli(self.ext, level)
        a, b = self.split(idx)
        return self.index(a % ma, b % mb)

    def representatives(self, level: int) -> np.ndarray:
        """Unit indices (at this level) representing U_K / U_K^(level)."""
        if level > self.n:
            raise HypothesisError(f"level {level} above working level {self.n}")
        if level == 0:
            return np.array([int(self.index(*self.identity))], dtype=np.int64)
        ma, mb = moduli(self.ext, level)
        a, b = self.split(self.unit_indices)
        keep = (a < ma) & (b < mb)
        return self.unit_indices[keep]


@dataclass
class SubgroupImage:
    """Subgroup of a UnitQuotient with its member mask."""

    parent: UnitQuotient
    label: str
    generator_vectors: List[np.ndarray]
    members: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return int(self.members.sum())

    def contains(self, x: Union[KElem, Pair, int]) -> bool:
        a, b = self.parent.pair_of(x)
        return bool(self.members[int(self.parent.index(a, b))])

    def index_in_parent(self) -> int:
        return self.parent.order // self.order


def _closure(G: UnitQuotient, gens: Sequence[Pair]) -> np.ndarray:
    mask = np.zeros(G.size, dtype=bool)
    mask[int(G.index(*G.identity))] = True
    for g in gens:
        while True:
            ma, mb = G.split(np.flatnonzero(mask))
            na, nb = G.mul(ma, mb, np.int64(g[0]), np.int64(g[1]))
            new = G.index(na, nb)
            if mask[new].all():
                break
            mask[new] = True
    return mask


def unit_quotient(ext: QuadExt, n: int,
                  basis: Optional[Tuple[List[Pair], List[int]]] = None) -> UnitQuotient:
    """
    Build U_K / U_K^(n), optionally from a stored (generators, orders) basis.

    Raises:
        LevelPolicyError: If n exceeds the per-p level policy
        InvariantError: If a stored basis does not span the group exactly once
    """
    check_level(ext, n)
    return UnitQuotient(ext, n, basis=basis)


def dlog(G: UnitQuotient, x: Union[KElem, Pair, int]) -> np.ndarray:
    return G.dlog(x)


def filtration_generators(G: UnitQuotient, m: int) -> List[Pair]:
    """Generators 1 + alpha^j r of U^(m) / U^(n), m >= 1."""
    if m < 1:
        raise HypothesisError("filtration generators need m >= 1")
    ext = G.ext
    gens: List[Pair] = []
    for j in range(m, G.n):
        if ext.ramified:
            alpha_j = ext.pi_K ** j
            gens.append(G.pair_of(ext.one + alpha_j))
        else:
            gens.append(G.pair_of((1 + ext.p ** j, 0)))
            gens.append(G.pair_of((1, ext.p ** j)))
    return gens


def subgroup_image(G: UnitQuotient, which: str, m: Optional[int] = None) -> SubgroupImage:
    """
    Image in G of units-of-F, norm-units or (with m) the filtration U^(m).

    Raises:
        ValueError: For an unknown subgroup name
    """
    if which == "units-of-F":
        gens = [G.pair_of(u) for u in uf_generators(G.ext.p)]
    elif which == "norm-units":
        gens = []
        for g in G.generators:
            na, nb = G.norm(np.int64(g[0]), np.int64(g[1]))
            gens.append((int(na), int(nb)))
    elif which == "filtration":
        gens = filtration_generators(G, m if m is not None else 1)
    else:
        raise ValueError(f"unknown subgroup: {which}")

    vectors = [G.dlog(g) for g in gens]
    image = SubgroupImage(G, which, vectors, _closure(G, gens))
    if which == "filtration":
        m = m if m is not None else 1
        expected = G.ext.q_K ** max(G.n - m, 0)
        if image.order != expected:
            raise InvariantError(f"|U^({m})/U^({G.n})| = {image.order}, expected {expected}")
    return image


@dataclass(frozen=True)
class PiRelation:
    """
    How the uniformizer interacts with units.

    w = pi_K^2 / pi_F (ramified) and v = conj(pi_K) / pi_K, as exponent
    vectors in the unit quotient.
    """

    pi_F: int
    w: Optional[Tuple[int, ...]]
    v: Tuple[int, ...]


def kstar_structure(ext: QuadExt, n: int,
                    basis: Optional[Tuple[List[Pair], List[int]]] = None) -> Tuple[UnitQuotient, PiRelation]:
    """K* / U_K^(n) = <pi_K> x U_K / U_K^(n)."""
    G = unit_quotient(ext, n, basis)
    v = tuple(int(c) for c in G.dlog(ext.pi_conj_ratio))
    w = tuple(int(c) for c in G.dlog(ext.w)) if ext.ramified else None
    return G, PiRelation(ext.pi_F_value, w, v)
