import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import interior_theta, pmfs
from igeo import _fd
from igeo.distributions import (EscortMap, ParametricModel, apply_escort_map, as_pmf, escort,
                                escort_map_model, escort_model, simplex_chart, uniform)
from igeo.errors import (DomainError, EscortMapContractError, InvalidAlphabetError,
                         InvalidOrderError, PmfError, StencilError)


class TestPmf:
    def test_accepts_and_freezes(self):
        p = as_pmf([0.25, 0.75])
        assert not p.flags.writeable

    @pytest.mark.parametrize("bad", [[1.0], [0.5, 0.6], [1.0, 0.0], [0.5, np.nan], [[0.5, 0.5]]])
    def test_rejects(self, bad):
        with pytest.raises(PmfError):
            as_pmf(bad)

    def test_floor_is_rejected_not_clipped(self):
        with pytest.raises(PmfError):
            as_pmf([1 - 1e-13, 1e-13])
        assert as_pmf([0.5, 0.5], floor=0.4)[0] == 0.5
        with pytest.raises(PmfError):
            as_pmf([0.45, 0.55], floor=0.45)

    def test_uniform(self):
        assert np.allclose(uniform(4), 0.25)


class TestSimplexChart:
    def test_bernoulli(self):
        assert np.allclose(simplex_chart(1).eval([0.3]), [0.7, 0.3])

    def test_three_symbols(self):
        assert np.allclose(simplex_chart(2).eval([0.2, 0.5]), [0.3, 0.2, 0.5])

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            simplex_chart(2).eval([0.6, 0.5])

    @pytest.mark.parametrize("M", [0, -1, 1.5])
    def test_bad_alphabet(self, M):
        with pytest.raises(InvalidAlphabetError):
            simplex_chart(M)

    def test_wrong_parameter_count(self):
        with pytest.raises(DomainError):
            simplex_chart(2).eval([0.2])

    def test_analytic_jacobian_matches_fd(self, rng):
        S = simplex_chart(3)
        t = interior_theta(rng, 3)
        assert S.jacobian_source == "analytic"
        fd = _fd.central_jacobian(S.eval, t, S.in_domain)
        assert np.allclose(S.jacobian(t), fd, atol=1e-9)


class TestEscort:
    def test_uniform_fixed_point(self):
        for a in (0.3, 1.0, 2.0, 7.0):
            assert np.allclose(escort([0.5, 0.5], a), [0.5, 0.5])

    def test_identity_at_one(self):
        assert np.allclose(escort([0.8, 0.2], 1.0), [0.8, 0.2], atol=1e-15)

    def test_square(self):
        assert np.allclose(escort([0.8, 0.2], 2.0), [0.64 / 0.68, 0.04 / 0.68], atol=1e-12)
        assert np.allclose(escort([0.8, 0.2], 2.0), [0.941176, 0.058824], atol=1e-6)

    @pytest.mark.parametrize("a", [0.0, -1.0, np.inf, np.nan])
    def test_bad_order(self, a):
        with pytest.raises(InvalidOrderError):
            escort([0.5, 0.5], a)

    def test_large_order_does_not_overflow(self):
        w = escort([0.6, 0.4], 50.0)
        assert np.isfinite(w).all() and w[0] > w[1]

    def test_underflowing_escort_is_rejected(self):
        with pytest.raises(PmfError):
            escort([0.999, 0.001], 5.0)

    @given(pmfs(min_mass=0.01), st.floats(0.1, 4.0))
    @settings(max_examples=200, deadline=None)
    def test_output_is_pmf_and_preserves_order(self, p, a):
        w = escort(p, a)
        assert abs(w.sum() - 1) <= 1e-12
        assert np.argmax(w) == np.argmax(p) or np.isclose(p[np.argmax(w)], p.max())
        # composing exponents a then 1/a returns p
        assert np.allclose(escort(w, 1.0 / a), p, rtol=1e-9, atol=1e-12)

    def test_continuous_in_order(self, rng):
        p = rng.dirichlet(np.ones(4))
        a, d = 1.7, 1e-6
        diff = escort(p, a + d) - escort(p, a)
        # d/da w = w (log p - E_w log p)
        w = escort(p, a)
        deriv = w * (np.log(p) - w @ np.log(p))
        assert np.max(np.abs(diff)) < 1e-5
        assert np.all(np.sign(diff[np.abs(deriv) > 1e-8]) == np.sign(deriv[np.abs(deriv) > 1e-8]))


class TestEscortMap:
    def test_identity(self):
        assert np.allclose(apply_escort_map(EscortMap.identity(), [0.3, 0.7]), [0.3, 0.7])

    def test_alpha_escort(self):
        out = apply_escort_map(EscortMap.alpha_escort(2), [0.8, 0.2])
        assert np.allclose(out, [0.941176, 0.058824], atol=1e-6)

    def test_custom_contract(self):
        bad = EscortMap.custom(lambda p: np.array([0.5, 0.6]), name="bad")
        with pytest.raises(EscortMapContractError):
            apply_escort_map(bad, [0.3, 0.7])

    def test_custom_ok(self):
        rev = EscortMap.custom(lambda p: p[::-1], name="reverse")
        assert np.allclose(rev([0.3, 0.7]), [0.7, 0.3])

    def test_parse(self):
        assert EscortMap.parse("identity").kind == "identity"
        assert EscortMap.parse("escort:2.5").alpha == 2.5
        with pytest.raises(ValueError):
            EscortMap.parse("escort")


class TestEscortModel:
    def test_alpha_one_is_base(self, rng):
        S = simplex_chart(3)
        t = interior_theta(rng, 3)
        E = escort_model(S, 1.0)
        assert np.allclose(E.eval(t), S.eval(t), atol=1e-12)
        assert np.allclose(E.jacobian(t), S.jacobian(t), atol=1e-12)

    def test_symmetric_point(self):
        assert np.allclose(escort_model(simplex_chart(1), 3.0).eval([0.5]), [0.5, 0.5])

    @pytest.mark.parametrize("a", [0.4, 2.0, 5.0])
    def test_chain_rule_matches_fd(self, rng, a):
        for M in (1, 2, 4):
            E = escort_model(simplex_chart(M), a)
            t = interior_theta(rng, M)
            J = E.jacobian(t)
            fd = _fd.central_jacobian(E.eval, t, E.in_domain)
            assert np.max(np.abs(J - fd)) <= max(1e-6, 1e-4 * np.max(np.abs(J)))

    def test_mass_conservation(self, rng):
        for a in (0.5, 1.0, 3.0):
            for M in (1, 3):
                E = escort_model(simplex_chart(M), a)
                assert np.allclose(E.jacobian(interior_theta(rng, M)).sum(axis=1), 0, atol=1e-8)

    def test_escort_map_model_dispatch(self, rng):
        S = simplex_chart(2)
        t = interior_theta(rng, 2)
        assert escort_map_model(S, EscortMap.identity()) is S
        assert escort_map_model(S, EscortMap.alpha_escort(2)).jacobian_source == "analytic"
        sq = EscortMap.custom(lambda p: p ** 2 / np.sum(p ** 2), name="square")
        C = escort_map_model(S, sq)
        assert C.jacobian_source == "finite_difference"
        assert np.allclose(C.jacobian(t), escort_model(S, 2).jacobian(t), atol=1e-8)


class TestParametricModel:
    def test_fd_jacobian_and_hessian(self):
        def eval_fn(t):
            z = np.exp(np.array([0.0, t[0], 2 * t[0]]))
            return z / z.sum()

        S = ParametricModel(1, 3, eval_fn, name="exp")
        assert S.jacobian_source == "finite_difference"
        J = S.jacobian([0.3])
        p = eval_fn([0.3])
        x = np.array([0.0, 1.0, 2.0])
        assert np.allclose(J[0], p * (x - p @ x), atol=1e-9)
        assert np.allclose(S.hessian([0.3]).sum(axis=-1), 0, atol=1e-6)

    def test_stencil_shrinks_near_boundary(self):
        S = simplex_chart(1)
        t = np.array([1e-7])
        J = _fd.central_jacobian(S.eval, t, S.in_domain, rel=1e-6, floor=1e-6)
        assert np.allclose(J, [[-1.0, 1.0]])

    def test_stencil_error_when_no_step_fits(self):
        with pytest.raises(StencilError):
            _fd.fit_step(lambda t: False, np.zeros(1), 1e-3, _fd.axis_offsets(1))
