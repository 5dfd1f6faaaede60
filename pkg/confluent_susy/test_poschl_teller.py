"""
Tests for the Pöschl-Teller closed forms
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confluent_susy.errors import UnsupportedError
from confluent_susy.poschl_teller import (
    PTParams,
    pt_chi4perp,
    pt_chi5perp,
    pt_phi4,
    pt_phi5,
    pt_psi,
    pt_u,
    pt_u_prime,
    pt_u_sampled,
    pt_v0,
    pt_w01,
    pt_w012,
    pt_w4,
    pt_w4_ca0,
    pt_w5,
    sample,
)
from confluent_susy.schrodinger_core import (
    SampledFunction,
    schrodinger_residual,
    second_log_derivative,
    sign_change_brackets,
)

KAPPA_FIG1 = 1.0 / np.sqrt(2.0)
KAPPA_FIG2 = np.sqrt(1.5)


def transformed_v(grid, wronskian):
    w = SampledFunction(grid, wronskian(grid.x))
    return pt_v0(grid.x) - 2.0 * second_log_derivative(w).values


class TestScalars:
    def test_v0_and_psi_at_origin(self):
        assert pt_v0(0.0) == pytest.approx(-2.0)
        assert pt_psi(0.0) == pytest.approx(1.0 / np.sqrt(2.0))

    def test_chain_values_at_origin(self):
        params = PTParams(1.0)
        assert pt_u(0, params, 0.0) == pytest.approx(-np.sqrt(2.0))
        assert pt_u(1, params, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert pt_u(2, params, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_unit_kappa_seed_is_sech(self, grid):
        params = PTParams(1.0)
        sech = 1.0 / np.cosh(grid.x)
        np.testing.assert_allclose(pt_u(0, params, grid.x), -np.sqrt(2.0) * sech, rtol=1e-12)
        np.testing.assert_allclose(pt_u_prime(0, params, grid.x), np.sqrt(2.0) * sech * np.tanh(grid.x),
                                   rtol=1e-12, atol=1e-14)

    def test_w4_ca0_at_origin(self):
        assert pt_w4_ca0(PTParams(1.0), 0.0) == pytest.approx(0.5)

    def test_w5_prefactor_sign_at_origin(self):
        # the bracket of W_{u0..u4} at x = 0 with C_b = 0 is kappa (kappa^4 + 10 kappa^2 + 5) / 64 kappa^6 > 0
        assert pt_w5(PTParams(1.0), 0.0) < 0.0

    def test_levels_beyond_three_unsupported(self):
        with pytest.raises(UnsupportedError):
            pt_u(4, PTParams(1.0), 0.0)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            PTParams(0.0)
        with pytest.raises(ValueError):
            PTParams.from_lambda(0.5)
        assert PTParams.from_lambda(-1.5).kappa == pytest.approx(KAPPA_FIG2)


class TestChainEquations:
    @pytest.mark.parametrize("kappa", [KAPPA_FIG1, 1.0, KAPPA_FIG2])
    def test_chain_residuals(self, grid, kappa):
        params = PTParams(kappa)
        V = pt_v0(grid.x)
        previous = None
        for j in range(4):
            u = pt_u_sampled(j, params, grid)
            residual = schrodinger_residual(u, V, params.lambda_, source=previous)
            assert residual < 1e-5, f"u{j}"
            previous = u

    @pytest.mark.parametrize("kappa", [KAPPA_FIG1, KAPPA_FIG2])
    def test_analytic_derivatives(self, grid, kappa):
        params = PTParams(kappa)
        for j in range(4):
            u = pt_u_sampled(j, params, grid)
            numeric = np.gradient(u.values, grid.h)
            scale = np.max(np.abs(u.derivatives))
            assert np.max(np.abs(numeric[2:-2] - u.derivatives[2:-2])) / scale < 1e-4

    def test_pair_wronskian_closed_form(self, grid):
        params = PTParams(KAPPA_FIG2)
        u0, u1 = pt_u_sampled(0, params, grid), pt_u_sampled(1, params, grid)
        w = u0.values * u1.derivatives - u0.derivatives * u1.values
        exact = pt_w01(params, grid.x)
        assert np.max(np.abs(w - exact) / np.abs(exact)) < 1e-10


class TestWronskians:
    def test_w4_reduces_to_ca0(self, grid):
        for kappa in (KAPPA_FIG1, 1.0, KAPPA_FIG2):
            params = PTParams(kappa)
            w4, w40 = pt_w4(params, grid.x), pt_w4_ca0(params, grid.x)
            assert np.max(np.abs(w4 - w40) / np.abs(w40)) < 1e-12

    def test_fig1_wronskian_zero_free(self, grid):
        w = pt_w4(PTParams(KAPPA_FIG1, c_a=50.0), grid.x)
        assert sign_change_brackets(w, grid.x) == []

    def test_negative_ca_has_zero(self, grid):
        w = pt_w4(PTParams(1.2, c_a=-1.0), grid.x)
        assert len(sign_change_brackets(w, grid.x)) >= 1

    @pytest.mark.parametrize("c_b", [0.0, 0.01, 1.0, 100.0])
    def test_fig2_wronskian_zero_free(self, grid, c_b):
        w = pt_w5(PTParams(KAPPA_FIG2, c_b=c_b), grid.x)
        assert sign_change_brackets(w, grid.x) == []

    def test_w012_never_vanishes_for_fig2(self, grid):
        assert sign_change_brackets(pt_w012(PTParams(KAPPA_FIG2), grid.x), grid.x) == []

    @settings(max_examples=25, deadline=None)
    @given(st.floats(0.3, 2.0), st.floats(-5.0, 5.0), st.floats(-3.0, 3.0))
    def test_affine_in_constants(self, kappa, x, c):
        for func, key in ((pt_w4, "c_a"), (pt_w5, "c_b")):
            values = [func(PTParams(kappa, **{key: c + d}), x) for d in (0.0, 1.0, 2.0)]
            scale = max(abs(v) for v in values) + 1e-300
            assert abs(values[2] - 2 * values[1] + values[0]) / scale < 1e-9


class TestEigenfunctions:
    def test_phi4_vanishes_for_unit_kappa(self, grid):
        assert np.max(np.abs(pt_phi4(PTParams(1.0, c_a=1.0), grid.x))) == 0.0

    def test_phi4_decays(self, grid):
        phi = pt_phi4(PTParams(KAPPA_FIG1, c_a=50.0), grid.x)
        peak = np.max(np.abs(phi))
        assert abs(phi[0]) < 1e-4 * peak
        assert abs(phi[-1]) < 1e-4 * peak

    def test_fourth_order_eigenfunction_residuals(self, grid):
        params = PTParams(KAPPA_FIG1, c_a=50.0)
        V4 = transformed_v(grid, lambda x: pt_w4(params, x))
        phi = sample(lambda x: pt_phi4(params, x), grid, "phi4")
        perp = sample(lambda x: pt_chi4perp(params, x), grid, "chi4perp")
        assert schrodinger_residual(phi, V4, -1.0) < 1e-5
        assert schrodinger_residual(perp, V4, params.lambda_) < 1e-5

    def test_fifth_order_eigenfunction_residuals(self, grid):
        params = PTParams(KAPPA_FIG2, c_b=0.01)
        V5 = transformed_v(grid, lambda x: pt_w5(params, x))
        phi = sample(lambda x: pt_phi5(params, x), grid, "phi5")
        perp = sample(lambda x: pt_chi5perp(params, x), grid, "chi5perp")
        assert schrodinger_residual(phi, V5, -1.0) < 1e-5
        assert schrodinger_residual(perp, V5, params.lambda_) < 1e-5

    def test_chi4perp_is_wronskian_ratio(self, grid):
        params = PTParams(KAPPA_FIG1, c_a=50.0)
        expected = pt_w012(params, grid.x) / pt_w4(params, grid.x)
        np.testing.assert_allclose(pt_chi4perp(params, grid.x), expected, rtol=1e-10)

    def test_chi5perp_is_wronskian_ratio(self, grid):
        params = PTParams(KAPPA_FIG2, c_b=0.01)
        expected = pt_w4_ca0(params, grid.x) / pt_w5(params, grid.x)
        np.testing.assert_allclose(pt_chi5perp(params, grid.x), expected, rtol=1e-10)
