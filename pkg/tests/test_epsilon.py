"""
Tests for Gauss sums, epsilon factors and the twisting checks.
"""

import pytest

from app.calculations.census import build_S_sets
from app.calculations.characters import mu_char
from app.calculations.cyclotomic import CycInt, EpsilonValue, QHalfScaled
from app.calculations.epsilon import (
    EpsilonEngine,
    check_epsilon_omega,
    epsilon_omega,
    epsilon_omega_value,
    omega_epsilon_flags,
)
from app.calculations.errors import HypothesisError, ModulusMismatchError


class TestEpsilonOfOmega:
    """eps(omega, psi) for psi of conductor 0."""

    def test_value_for_sqrt_three(self, R3):
        # omega(3) * (zeta_3 - zeta_3^2) / sqrt 3 = -i
        value = epsilon_omega(R3)
        assert value.raw.equals(QHalfScaled(CycInt.zeta(3, 4), 3, 0))

    def test_square_relation(self, R3, G2, E2):
        for ext in (R3, G2, E2):
            flags = omega_epsilon_flags(ext)
            assert flags["square_is_one"] == (flags["omega_minus_one"] == 1)

    def test_unramified_value_is_one(self, U3):
        assert epsilon_omega_value(U3).equals(QHalfScaled(CycInt.one(), 3, 0))
        with pytest.raises(HypothesisError):
            epsilon_omega(U3)

    def test_check_passes(self, R3, G2, E2, U3):
        for ext in (R3, G2, E2, U3):
            result = check_epsilon_omega(ext)
            assert result.passed, ext.tag
            assert result.detail["unimodular"]
            assert result.detail["twisted_square_is_one"]

    def test_wrong_value_fails(self, R3):
        # omega(-1) = -1 on Q_3(sqrt 3), so eps(omega) = 1 cannot hold
        result = check_epsilon_omega(R3, QHalfScaled(CycInt.one(), 3, 0))
        assert not result.passed
        assert result.detail["square_is_one"]
        assert not result.detail["twisted_square_is_one"]

    def test_non_unimodular_value_fails(self, G2):
        result = check_epsilon_omega(G2, QHalfScaled(CycInt.integer(2), 2, 0))
        assert not result.passed
        assert not result.detail["unimodular"]


class TestGaussSums:
    """Exact Gauss sums and certified signs."""

    def test_unimodular(self, r3_setup):
        result = r3_setup.engine.check_unimodular(r3_setup.chars)
        assert result.passed
        assert result.checked == len(r3_setup.chars)

    def test_modulus_mismatch_is_reported(self, r3_setup, monkeypatch):
        def mismatch(G, chi_c, a, q, f=1):
            raise ModulusMismatchError("|G|^2 off", {"a": a})

        monkeypatch.setattr("app.calculations.epsilon.epsilon_normalize", mismatch)
        result = EpsilonEngine(r3_setup.space).check_unimodular(r3_setup.chars)
        assert not result.passed
        assert result.detail["failed"] == len(r3_setup.chars)
        assert result.detail["failures"]

    def test_unscaled_epsilon_is_reported(self, r3_setup, monkeypatch):
        # drops the q_K^(-a/2) factor, so |eps| = q_K^(a/2) != 1
        def unscaled(G, chi_c, a, q, f=1):
            return EpsilonValue(sign=None, raw=QHalfScaled(chi_c * G, q, 0), resolved=False)

        monkeypatch.setattr("app.calculations.epsilon.epsilon_normalize", unscaled)
        result = EpsilonEngine(r3_setup.space).check_unimodular(r3_setup.chars)
        assert not result.passed
        assert result.detail["failed"] == len(r3_setup.chars)

    def test_gauss_sum_fields(self, r3_setup):
        chi = r3_setup.chars.stratum(2)[0]
        result = r3_setup.engine.gauss_sum(chi)
        assert result.conductor == 2
        # c has valuation a(chi) + n(psi_0)
        assert result.c_exponent == 2 + r3_setup.ext.n_psi0
        norm = result.raw * result.raw.conj()
        assert norm == 3 ** 2

    def test_sign_relation(self, g2_setup):
        omega_minus_one = g2_setup.space.omega.at_minus_one
        for chi in g2_setup.chars.chars:
            record = g2_setup.engine.sign_record(chi)
            assert record.inverse == omega_minus_one * record.direct

    def test_memoized(self, u3_setup):
        engine = EpsilonEngine(u3_setup.space)
        chi = u3_setup.chars.chars[-1]
        engine.epsilon_sign(chi)
        engine.epsilon_sign(chi)
        assert engine.computed == 1
        assert engine.memo_hits == 1

    def test_export_and_preload(self, u3_setup):
        engine = EpsilonEngine(u3_setup.space)
        engine.map_signs(u3_setup.chars.chars)
        fresh = EpsilonEngine(u3_setup.space)
        fresh.preload(engine.export_signs())
        assert fresh.map_signs(u3_setup.chars.chars) == engine.map_signs(u3_setup.chars.chars)
        assert fresh.computed == 0

    def test_workers_agree(self, r3_setup):
        threaded = EpsilonEngine(r3_setup.space, workers=4)
        assert threaded.map_signs(r3_setup.chars.chars) == r3_setup.engine.map_signs(r3_setup.chars.chars)

    def test_flip_negates(self, u3_setup):
        chi = u3_setup.chars.chars[0]
        plain = EpsilonEngine(u3_setup.space).epsilon_sign(chi)
        flipped = EpsilonEngine(u3_setup.space, flip=lambda c: True).epsilon_sign(chi)
        assert flipped == -plain

    def test_unknown_additive(self, r3_setup):
        with pytest.raises(ValueError):
            r3_setup.engine.gauss_sum(r3_setup.chars.chars[0], "psi1")

    def test_choice_independence(self, g2_setup):
        for l in (3, 4):
            chi = g2_setup.chars.stratum(l)[0]
            assert g2_setup.engine.check_choice_independence(chi).passed


class TestUnramifiedClosedForm:
    """eps(chi^-1, psi_0) = (-1)^(a(chi) + t)."""

    def test_odd_p(self, u3_setup):
        assert u3_setup.engine.check_unramified_closed_form(u3_setup.chars).passed

    def test_dyadic(self, u2_setup):
        assert u2_setup.engine.check_unramified_closed_form(u2_setup.chars).passed

    def test_rejects_ramified(self, r3_setup):
        with pytest.raises(HypothesisError):
            r3_setup.engine.check_unramified_closed_form(r3_setup.chars)


class TestStrata:
    """S(l) and S' (l) by conductor."""

    def test_sizes_for_sqrt_three(self, r3_setup):
        sizes = {l: (len(plus), len(minus)) for l, (plus, minus) in r3_setup.strata.items()}
        assert sizes == {1: (1, 1), 2: (2, 2), 4: (6, 6)}

    def test_ramified_strata_balanced(self, g2_setup, e2_setup):
        for setup in (g2_setup, e2_setup):
            for plus, minus in setup.strata.values():
                assert len(plus) == len(minus)

    def test_unramified_strata(self, u3_setup):
        strata = build_S_sets(u3_setup.engine, u3_setup.chars)
        # t = 0: the sign is (-1)^a(chi)
        assert len(strata[1][0]) == 0
        assert len(strata[2][1]) == 0


class TestTwistingChecks:
    """Deligne's twisting formula and the explicit form via omega~."""

    def test_deligne_pairs(self, r3_setup):
        results = r3_setup.engine.deligne_checks(r3_setup.chars, max_pairs=40)
        names = {r.name for r in results}
        assert names == {"deligne", "eq1"}
        assert all(r.passed for r in results)

    def test_deligne_with_mu(self, g2_setup):
        alpha = g2_setup.chars.stratum(4)[0]
        result = g2_setup.engine.deligne_check(alpha, mu_char(g2_setup.space))
        assert result.passed

    def test_deligne_hypothesis(self, r3_setup):
        alpha = r3_setup.chars.stratum(1)[0]
        beta = r3_setup.chars.stratum(2)[0]
        with pytest.raises(HypothesisError):
            r3_setup.engine.deligne_check(alpha, beta)

    def test_find_y_for_trivial_twist(self, r3_setup):
        trivial = r3_setup.space.trivial()
        assert r3_setup.engine.find_y(trivial) == (1, 0, r3_setup.ext.n_psi0)

    @pytest.mark.slow
    def test_deligne_dyadic(self, e2_setup):
        results = e2_setup.engine.deligne_checks(e2_setup.chars, max_pairs=60)
        failures = [r.detail for r in results if not r.passed]
        assert results
        assert not failures
