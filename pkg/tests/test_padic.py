"""
Tests for truncated p-adic arithmetic and the extension catalog.
"""

from fractions import Fraction

import pytest

from app.calculations.errors import CatalogError, PrecisionError
from app.calculations.padic import (
    PAdic,
    field_arith,
    galois_data,
    make_extension,
    psi0_eval,
    psiK_eval,
    supported_tags,
)


class TestPAdic:
    """Base field elements."""

    def test_valuation_of_integer(self):
        assert PAdic.from_number(3, 9, 5).valuation() == 2

    def test_fractional_part(self):
        assert PAdic.from_number(3, Fraction(1, 3), 10).frac_part() == Fraction(1, 3)
        assert PAdic.from_number(3, Fraction(-1, 3), 10).frac_part() == Fraction(2, 3)
        assert PAdic.from_number(2, Fraction(5, 4), 10).frac_part() == Fraction(1, 4)
        assert PAdic.from_number(5, 7, 10).frac_part() == 0

    def test_inverse(self):
        x = PAdic.from_number(3, Fraction(7, 3), 12)
        product = x * x.inverse()
        assert product.equals(PAdic.from_number(3, 1, product.prec))
        assert x.inverse().valuation() == 1

    def test_zero_has_no_valuation(self):
        x = PAdic.from_number(3, 3 ** 6, 5)
        assert x.is_zero()
        with pytest.raises(PrecisionError):
            x.valuation()

    def test_zero_cannot_be_inverted(self):
        with pytest.raises(PrecisionError):
            PAdic.zero(5, 10).inverse()

    def test_precision_loss_on_division(self):
        x = PAdic.from_number(2, 1, 10).divide_int(8)
        assert x.prec == 7
        assert x.frac_part() == Fraction(1, 8)


class TestCatalog:
    """make_extension and its startup invariants."""

    def test_unknown_tag(self):
        with pytest.raises(CatalogError):
            make_extension(3, "sqrt(-1)")
        with pytest.raises(CatalogError):
            make_extension(2, "sqrt-pi")

    def test_composite_p(self):
        with pytest.raises(CatalogError):
            make_extension(4, "unramified")

    def test_aliases_share_a_square_class(self):
        assert make_extension(2, "sqrt(7)").tag == "sqrt(-1)"
        assert make_extension(2, "unramified").tag == "sqrt(5)"

    def test_supported_tags(self):
        assert "sqrt-u-pi" in supported_tags(5)
        assert "sqrt(-2)" in supported_tags(2)

    @pytest.mark.parametrize("p,tag,d", [
        (3, "sqrt-pi", 1),
        (5, "sqrt-u-pi", 1),
        (2, "sqrt(-1)", 2),
        (2, "sqrt(3)", 2),
        (2, "sqrt(2)", 3),
        (2, "sqrt(-2)", 3),
        (3, "unramified", 0),
        (2, "unramified", 0),
    ])
    def test_discriminant_exponent(self, p, tag, d):
        assert make_extension(p, tag).d == d

    def test_additive_conductors(self, R3, G2, E2, U3):
        # d odd: 2; d even: 2(s - t)
        assert R3.n_psi0 == 2
        assert E2.n_psi0 == 2
        assert G2.n_psi0 == 0
        assert U3.n_psi0 == 0

    def test_describe(self, G2):
        info = G2.describe()
        assert info["kind"] == "ramified"
        assert (info["d"], info["s"], info["t"]) == (2, 1, 1)
        assert info["x0"] == [-1, 1]


class TestQuadraticExtension:
    """Arithmetic in K."""

    def test_uniformizer_norm_and_trace(self, R3):
        alpha = R3.alpha
        assert alpha.norm().equals(PAdic.from_number(3, -3, R3.precision))
        assert alpha.trace().is_zero()
        assert R3.pi_K.valuation() == 1
        assert R3.pi_F.valuation() == 2

    def test_galois_data(self, G2):
        x = G2.element(3, 5)
        conj, trace, norm = galois_data(x)
        assert trace.in_base_field() and norm.in_base_field()
        assert conj.conj().equals(x)

    def test_unit_inverse(self, U3):
        x = U3.element(2, 1)
        assert (x * field_arith("invert_unit", x)).equals(U3.one)

    def test_invert_unit_rejects_uniformizer(self, R3):
        with pytest.raises(ValueError):
            field_arith("invert_unit", R3.pi_K)

    def test_unknown_op(self, R3):
        with pytest.raises(ValueError):
            field_arith("divide", R3.one, R3.one)

    def test_pi_conj_ratio_is_a_unit(self, E2):
        assert E2.pi_conj_ratio.valuation() == 0

    def test_psi0_is_trivial_on_integers_at_conductor_zero(self, G2):
        assert psi0_eval(G2.element(5, 7)).is_trivial()

    def test_psiK_on_inverse_uniformizer(self, R3):
        # tr(1 / sqrt 3) = 0, tr(1 / 3) = 2/3
        assert psiK_eval(R3.pi_K.inverse()).is_trivial()
        assert psiK_eval(R3.element(Fraction(1, 3))).exponent == Fraction(2, 3)
