"""
Tests for Jordan chain construction and validation
"""

import numpy as np
import pytest

from confluent_susy.errors import SingularityError, UnsupportedError
from confluent_susy.jordan_chain import (
    ChainSpec,
    IVPSeed,
    JordanChain,
    build_chain,
    closed_form_chain,
    closed_form_constants,
    parametric_chain_check,
    recessive_solution,
    replace_level,
    verify_chain,
)
from confluent_susy.poschl_teller import PTParams, pt_u
from confluent_susy.schrodinger_core import SampledFunction, schrodinger_residual

KAPPA_FIG1 = 1.0 / np.sqrt(2.0)
KAPPA_FIG2 = np.sqrt(1.5)


def max_norm_relative(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / np.max(np.abs(b)))


class TestChainSpec:
    def test_rejects_negative_order(self):
        with pytest.raises(ValueError):
            ChainSpec(-1.0, -1)

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError):
            ChainSpec(-1.0, 2, method="series")

    def test_closed_form_seed_needs_negative_lambda(self):
        with pytest.raises(ValueError):
            ChainSpec(0.5, 2)

    def test_too_many_constant_pairs(self):
        with pytest.raises(ValueError):
            ChainSpec(-1.0, 1, inner_constants=((0.0, 0.0), (0.0, 0.0)))

    def test_missing_constants_default_to_zero(self):
        assert ChainSpec(-1.0, 3, inner_constants=((1.0, 2.0),)).constants_for(3) == (0.0, 0.0)


class TestBuildChain:
    def test_order_zero(self, grid, potential):
        chain = build_chain(ChainSpec(-1.0, 0), potential, grid)
        assert chain.order == 0
        assert chain[0].values[grid.n_points // 2] == pytest.approx(-np.sqrt(2.0))
        assert len(verify_chain(chain).relative) == 1

    def test_integral_chain_matches_closed_forms(self, grid, chain_fig2):
        params = PTParams(KAPPA_FIG2)
        for j in range(4):
            assert max_norm_relative(chain_fig2[j].values, pt_u(j, params, grid.x)) < 1e-6, f"u{j}"

    def test_integral_chain_residuals(self, chain_fig2):
        report = verify_chain(chain_fig2, 1e-5)
        assert report.passed
        assert len(report.relative) == 6

    def test_unit_kappa_integral_chain(self, grid, chain_kappa_one):
        assert verify_chain(chain_kappa_one, 1e-5).passed
        for j in range(4):
            assert max_norm_relative(chain_kappa_one[j].values, pt_u(j, PTParams(1.0), grid.x)) < 1e-6, f"u{j}"

    def test_closed_form_chain_residuals(self, grid):
        report = verify_chain(closed_form_chain(PTParams(KAPPA_FIG1), grid), 1e-6)
        assert report.passed, report.to_dict()

    def test_integral_method_refuses_u0_with_zero(self, grid, potential):
        params = PTParams(KAPPA_FIG1)
        spec = ChainSpec(params.lambda_, 2, inner_constants=closed_form_constants(params, grid, 2, "integral"))
        with pytest.raises(SingularityError):
            build_chain(spec, potential, grid)

    def test_ivp_method_through_zero_of_u0(self, grid, potential):
        params = PTParams(KAPPA_FIG1)
        constants = closed_form_constants(params, grid, 3, "ivp")
        spec = ChainSpec(params.lambda_, 3, inner_constants=constants, method="ivp")
        chain = build_chain(spec, potential, grid, residual_tol=1e-5)
        for j in range(4):
            assert max_norm_relative(chain[j].values, pt_u(j, params, grid.x)) < 1e-6, f"u{j}"

    def test_integral_and_ivp_constructions_agree(self, grid, potential, chain_fig2):
        pairs = tuple((float(chain_fig2[j].values[0]), float(chain_fig2[j].derivatives[0])) for j in range(1, 4))
        spec = ChainSpec(chain_fig2.lambda_, 3, inner_constants=pairs, method="ivp")
        ivp_chain = build_chain(spec, potential, grid, residual_tol=1e-5)
        for j in range(4):
            assert max_norm_relative(ivp_chain[j].values, chain_fig2[j].values) < 1e-4, f"u{j}"

    def test_zero_seed_collapses(self, grid, potential):
        spec = ChainSpec(-1.0, 2, seed=IVPSeed(0.0, 0.0), method="ivp")
        chain = build_chain(spec, potential, grid, residual_tol=None)
        for u in chain.functions:
            assert u.max_abs == 0.0

    def test_constant_change_is_homogeneous(self, grid, potential, chain_fig2):
        spec = ChainSpec(chain_fig2.lambda_, 1)
        plain = build_chain(spec, potential, grid, residual_tol=1e-5)
        difference = chain_fig2[1].plus(plain[1], -1.0)
        assert schrodinger_residual(difference, potential.value(grid.x), chain_fig2.lambda_) < 1e-5

    def test_perturbation_is_flagged(self, grid):
        chain = closed_form_chain(PTParams(KAPPA_FIG2), grid, 2)
        values = np.array(chain[1].values)
        delta = 1e-3 * (1.0 + chain[1].max_abs)
        values[grid.n_points // 2] += delta
        perturbed = SampledFunction(grid, values, chain[1].derivatives, "u1")
        broken = JordanChain(chain.spec, (chain[0], perturbed, chain[2]), chain.potential)
        report = verify_chain(broken)
        assert report.absolute[1] >= delta / grid.h ** 2
        assert not report.passed

    def test_closed_form_chain_limited_to_three(self, grid):
        with pytest.raises(UnsupportedError):
            closed_form_chain(PTParams(1.0), grid, 4)

    def test_replace_level_rebuilds_higher_levels(self, chain_fig2):
        shifted = chain_fig2[1].plus(chain_fig2[0], 1.0)
        chain = replace_level(chain_fig2, 1, shifted)
        assert verify_chain(chain, 1e-5).passed
        assert max_norm_relative(chain[2].values, chain_fig2[2].values) > 1e-6


class TestRecessiveSolution:
    def test_matches_decaying_closed_form(self, grid, potential):
        kappa = KAPPA_FIG2
        r = recessive_solution(potential, -kappa ** 2, grid)
        exact = np.exp(-kappa * grid.x) * (np.tanh(grid.x) + kappa)
        ratios = r.values / exact
        assert np.max(np.abs(ratios / ratios[-1] - 1.0)) < 1e-6


class TestParametricCheck:
    def test_residual_below_tolerance(self, grid, potential):
        check = parametric_chain_check(ChainSpec(-1.0, 1), potential, grid)
        assert check.residual < 1e-4
        assert check.passed

    def test_second_order_in_dlambda(self, grid, potential):
        coarse = parametric_chain_check(ChainSpec(-1.0, 1), potential, grid, dlambda=1e-2)
        fine = parametric_chain_check(ChainSpec(-1.0, 1), potential, grid, dlambda=5e-3)
        assert 3.0 < coarse.residual / fine.residual < 5.0

    def test_difference_from_integral_u1_is_homogeneous(self, grid, potential, chain_kappa_one):
        check = parametric_chain_check(ChainSpec(-1.0, 1), potential, grid)
        difference = check.u1.plus(chain_kappa_one[1], -1.0)
        assert schrodinger_residual(difference, potential.value(grid.x), -1.0) < 1e-4

    def test_requires_closed_form_seed(self, grid, potential):
        with pytest.raises(UnsupportedError):
            parametric_chain_check(ChainSpec(-1.0, 1, seed=IVPSeed(1.0, 1.0)), potential, grid)
