"""
Tests for exact cyclotomic arithmetic and certified signs.
"""

from fractions import Fraction

import pytest

from app.calculations.cyclotomic import (
    CycInt,
    QHalfScaled,
    certified_sign,
    cyc_arith,
    epsilon_normalize,
    from_exponent,
    phi,
    resolve_sign,
)
from app.calculations.errors import ModulusMismatchError, NotRealError, NotUnimodularError


def quadratic_gauss_sum_mod_3() -> CycInt:
    """zeta_3 - zeta_3^2 = i sqrt 3."""
    return CycInt.zeta(1, 3) - CycInt.zeta(2, 3)


class TestCycInt:
    """Z[zeta_M] in the power basis."""

    def test_power_basis_length(self):
        assert len(CycInt.zero(12).coeffs) == phi(12) == 4

    def test_i_squared(self):
        i = CycInt.zeta(1, 4)
        assert i * i == -1

    def test_sum_of_cube_roots(self):
        total = CycInt.one(3) + CycInt.zeta(1, 3) + CycInt.zeta(2, 3)
        assert total.is_zero()

    def test_gauss_sum_square(self):
        g = quadratic_gauss_sum_mod_3()
        assert g * g == -3

    def test_mixed_orders_lift(self):
        # zeta_4 * zeta_3 = zeta_12^7
        assert CycInt.zeta(1, 4) * CycInt.zeta(1, 3) == CycInt.zeta(7, 12)

    def test_conjugate(self):
        assert CycInt.zeta(1, 5).conj() == CycInt.zeta(4, 5)

    def test_pow(self):
        assert CycInt.zeta(1, 8) ** 8 == 1
        with pytest.raises(ValueError):
            CycInt.zeta(1, 8) ** -1

    def test_integer_value(self):
        assert (CycInt.integer(3, 5) * 2).integer_value() == 6
        with pytest.raises(ValueError):
            CycInt.zeta(1, 4).integer_value()

    def test_dispatch(self):
        x = CycInt.zeta(1, 4)
        assert cyc_arith("conj", x) == CycInt.zeta(3, 4)
        assert cyc_arith("scalar", x, 3) == x * 3
        with pytest.raises(ValueError):
            cyc_arith("div", x, x)

    def test_from_exponent(self):
        assert from_exponent(Fraction(3, 4), 8) == CycInt.zeta(6, 8)
        with pytest.raises(ModulusMismatchError):
            from_exponent(Fraction(1, 3), 4)


class TestCertifiedSign:
    """Signs of values cyc * q^(h/2)."""

    def test_half_integral_plus(self):
        g = quadratic_gauss_sum_mod_3()
        # -i * i sqrt 3 / sqrt 3 = 1
        assert certified_sign(QHalfScaled(CycInt.zeta(3, 4) * g, 3, -1)) == 1

    def test_half_integral_minus(self):
        g = quadratic_gauss_sum_mod_3()
        assert certified_sign(QHalfScaled(CycInt.zeta(1, 4) * g, 3, -1)) == -1

    def test_integral(self):
        assert certified_sign(QHalfScaled(CycInt.integer(-1), 5, 0)) == -1
        assert certified_sign(QHalfScaled(CycInt.integer(5), 5, -2)) == 1

    def test_not_real(self):
        with pytest.raises(NotRealError):
            certified_sign(QHalfScaled(CycInt.zeta(1, 4), 3, 0))

    def test_not_unimodular(self):
        with pytest.raises(NotUnimodularError) as exc:
            certified_sign(QHalfScaled(CycInt.integer(2), 3, 0))
        assert exc.value.reason == "not-unimodular"

    def test_resolve_sign(self):
        g = quadratic_gauss_sum_mod_3()
        value = epsilon_normalize(g, CycInt.zeta(3, 4), 1, 3)
        assert not value.resolved
        resolved = resolve_sign(value)
        assert resolved.resolved and resolved.sign == 1


class TestQHalfScaled:
    """Exact equality across halfpow parities."""

    def test_sqrt_three_two_ways(self):
        g = quadratic_gauss_sum_mod_3()
        a = QHalfScaled(CycInt.integer(3), 3, -1)
        b = QHalfScaled(CycInt.zeta(3, 4) * g, 3, 0)
        assert a.equals(b)
        assert not a.equals(QHalfScaled(-b.cyc, 3, 0))

    def test_same_parity(self):
        a = QHalfScaled(CycInt.integer(3), 3, 0)
        b = QHalfScaled(CycInt.one(), 3, 2)
        assert a.equals(b)

    def test_zero(self):
        assert QHalfScaled(CycInt.zero(4), 3, 1).equals(QHalfScaled(CycInt.zero(), 3, 0))

    def test_incompatible_bases(self):
        with pytest.raises(ValueError):
            QHalfScaled(CycInt.one(), 3) * QHalfScaled(CycInt.one(), 5)

    def test_normalize_rejects_wrong_modulus(self):
        with pytest.raises(ModulusMismatchError):
            epsilon_normalize(CycInt.integer(2), CycInt.one(), 1, 3)
