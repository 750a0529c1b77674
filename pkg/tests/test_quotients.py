"""
Tests for unit quotients U_K / U_K^(n).
"""

import numpy as np
import pytest

from app.calculations.errors import HypothesisError, InvariantError, LevelPolicyError
from app.calculations.quotients import (
    check_level,
    kstar_structure,
    max_level,
    subgroup_image,
    unit_quotient,
)


class TestStructure:
    """Orders, bases and the level policy."""

    @pytest.mark.parametrize("n,order", [(1, 2), (2, 6), (4, 54)])
    def test_ramified_order(self, R3, n, order):
        G = unit_quotient(R3, n)
        assert G.order == order
        assert int(np.prod(G.orders)) == order

    @pytest.mark.parametrize("n,order", [(1, 8), (2, 72)])
    def test_unramified_order(self, U3, n, order):
        assert unit_quotient(U3, n).order == order

    def test_level_zero_is_trivial(self, G2):
        G = unit_quotient(G2, 0)
        assert G.order == 1
        assert G.rank == 0

    def test_level_policy(self, R3, U3):
        assert max_level(R3) == 8
        with pytest.raises(LevelPolicyError):
            check_level(R3, 9)
        with pytest.raises(LevelPolicyError):
            unit_quotient(U3, max_level(U3) + 1)

    def test_dlog_of_generators(self, G2):
        G = unit_quotient(G2, 5)
        for i, g in enumerate(G.generators):
            expected = np.zeros(G.rank, dtype=np.int64)
            expected[i] = 1
            assert np.array_equal(G.dlog(g), expected)

    def test_dlog_is_a_homomorphism(self, E2):
        G = unit_quotient(E2, 6)
        x, y = E2.element(3, 1), E2.element(1, 2)
        lhs = G.dlog(x * y)
        rhs = (G.dlog(x) + G.dlog(y)) % np.array(G.orders)
        assert np.array_equal(lhs % np.array(G.orders), rhs)

    def test_dlog_rejects_non_units(self, R3):
        G = unit_quotient(R3, 4)
        with pytest.raises(HypothesisError):
            G.dlog((3, 1))

    def test_stored_basis_round_trip(self, U3):
        G = unit_quotient(U3, 2)
        rebuilt = unit_quotient(U3, 2, (list(G.generators), list(G.orders)))
        assert rebuilt.generators == G.generators
        assert np.array_equal(rebuilt.dlog_table, G.dlog_table)

    def test_tampered_basis_rejected(self, U3):
        G = unit_quotient(U3, 2)
        orders = list(G.orders)
        orders[0] = orders[0] * 2
        with pytest.raises(InvariantError):
            unit_quotient(U3, 2, (list(G.generators), orders))

    def test_dependent_basis_rejected(self, R3):
        G = unit_quotient(R3, 4)
        gens = [G.generators[0]] * G.rank
        with pytest.raises(InvariantError):
            unit_quotient(R3, 4, (gens, list(G.orders)))

    def test_kstar_relations(self, R3):
        G, rel = kstar_structure(R3, 4)
        # conj(sqrt 3) / sqrt 3 = -1 and w = pi_K^2 / pi_F = 1
        assert np.array_equal(np.array(rel.v), G.dlog(-1))
        assert not any(rel.w)

    def test_representatives(self, R3):
        G = unit_quotient(R3, 4)
        assert len(G.representatives(2)) == unit_quotient(R3, 2).order
        with pytest.raises(HypothesisError):
            G.representatives(5)


class TestSubgroups:
    """Images of U_F, of the norms and of the filtration."""

    def test_norm_index_ramified(self, R3):
        G = unit_quotient(R3, 4)
        units = subgroup_image(G, "units-of-F")
        norms = subgroup_image(G, "norm-units")
        assert units.order == 6
        assert norms.order == 3
        assert units.contains(-1) and not norms.contains(-1)

    def test_norms_surject_unramified(self, U3):
        G = unit_quotient(U3, 2)
        units = subgroup_image(G, "units-of-F")
        norms = subgroup_image(G, "norm-units")
        assert units.order == norms.order == 6

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_filtration_orders(self, G2, m):
        G = unit_quotient(G2, 4)
        image = subgroup_image(G, "filtration", m)
        assert image.order == 2 ** (4 - m)
        assert image.index_in_parent() == G.order // image.order

    def test_unknown_subgroup(self, R3):
        with pytest.raises(ValueError):
            subgroup_image(unit_quotient(R3, 2), "squares")
