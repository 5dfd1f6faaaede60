"""
Tests for the transformed potential, transformed solutions and the regularity scan
"""

import logging
import os

import numpy as np
import pytest
from scipy.signal import find_peaks

from confluent_susy.config import load_config
from confluent_susy.errors import DomainError, NotSquareIntegrableError, PreconditionError, SingularityError
from confluent_susy.pipeline import ConfluentTransformPipeline
from confluent_susy.poschl_teller import PTParams, pt_chi4perp, pt_chi5perp, pt_phi4, pt_phi5, pt_psi_sampled, pt_w4, sample
from confluent_susy.schrodinger_core import (
    Grid,
    PoschlTeller,
    SampledFunction,
    Transformed,
    integrate_ivp,
    second_log_derivative,
)
from confluent_susy.susy_transform import (
    condition_notes,
    matched_difference,
    normalize,
    normalized_overlap,
    reduction_of_order,
    regularity_scan,
    run_transform,
    transform_integral,
    transform_ratio,
)
from confluent_susy.wronskian import build_tower, reconcile_tower

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "configs")

KAPPA_FIG1 = 1.0 / np.sqrt(2.0)
KAPPA_FIG2 = np.sqrt(1.5)


class TestRegularityScan:
    def test_constant_is_regular(self):
        grid = Grid(0.0, 1.0, 101)
        report = regularity_scan(SampledFunction(grid, np.ones(101)))
        assert report.is_regular
        assert report.zero_brackets == []
        assert report.min_abs_w == 1.0

    def test_root_refined(self):
        grid = Grid(-1.0, 1.0, 201)
        report = regularity_scan(SampledFunction(grid, grid.x - 0.3123, name="line"))
        assert not report.is_regular
        (a, b), = report.zero_brackets
        assert b - a < 1e-10
        assert a == pytest.approx(0.3123, abs=1e-10)

    def test_negative_ca_is_singular(self, grid):
        W = SampledFunction(grid, pt_w4(PTParams(KAPPA_FIG1, c_a=-1.0), grid.x))
        report = regularity_scan(W)
        assert not report.is_regular
        for a, b in report.zero_brackets:
            assert b - a < 1e-10

    def test_unit_kappa_negative_ca_zero_at_log_two(self, grid):
        # W is proportional to (1 - tanh x)(2 C_a + exp(2x) / 2)
        W = SampledFunction(grid, pt_w4(PTParams(1.0, c_a=-1.0), grid.x))
        report = regularity_scan(W)
        (a, b), = report.zero_brackets
        assert a == pytest.approx(np.log(2.0), abs=1e-8)
        assert b == pytest.approx(np.log(2.0), abs=1e-8)

    def test_report_serializes(self):
        grid = Grid(-1.0, 1.0, 201)
        data = regularity_scan(SampledFunction(grid, grid.x + 0.25)).to_dict()
        assert data["is_regular"] is False
        assert len(data["zero_brackets"]) == 1


class TestConditionNotes:
    def test_even_order_positive_ca(self):
        notes = condition_notes({"order": 4, "constants": [None, None, 50.0, None]})
        assert "C_a > 0 satisfied" in notes

    def test_odd_order_negative_cb(self):
        notes = condition_notes({"order": 5, "constants": [None, None, None, -0.1, None],
                                 "lambda": -1.5, "ground_energy": -1.0})
        assert "C_b >= 0 not satisfied" in notes
        assert "lambda <= ground energy satisfied" in notes

    def test_odd_order_lambda_above_ground(self):
        notes = condition_notes({"order": 3, "constants": [None, 0.0, None], "lambda": -0.5, "ground_energy": -1.0})
        assert "lambda <= ground energy not satisfied" in notes

    def test_empty_context(self):
        assert condition_notes(None) == ""


class TestTransformedPotential:
    @pytest.mark.parametrize("name", ["fig1_pipeline", "fig2_pipeline"])
    def test_asymptotics_match_initial_potential(self, request, name):
        V = request.getfixturevalue(name).result.potential_v_n
        assert abs(V.values[0]) < 1e-4
        assert abs(V.values[-1]) < 1e-4

    def test_fourth_order_matches_closed_form(self, grid, fig1_pipeline):
        w = SampledFunction(grid, pt_w4(PTParams(KAPPA_FIG1, c_a=50.0), grid.x))
        exact = -2.0 / np.cosh(grid.x) ** 2 - 2.0 * second_log_derivative(w).values
        assert np.max(np.abs(fig1_pipeline.result.potential_v_n.values - exact)) < 1e-4

    def test_fifth_order_double_well(self, fig2_pipeline):
        minima, _ = find_peaks(-fig2_pipeline.result.potential_v_n.values, prominence=1e-3)
        assert len(minima) == 2


class TestTransformedSolutions:
    @pytest.mark.parametrize("name", ["fig1_pipeline", "fig2_pipeline"])
    def test_residuals(self, request, name):
        residuals = request.getfixturevalue(name).result.residuals
        for key in ("chi_perp", "phi", "chi"):
            assert residuals[key] < 1e-5, key
        assert residuals["unity"] < 1e-4

    @pytest.mark.parametrize("name", ["fig1_pipeline", "fig2_pipeline"])
    def test_phi_orthogonal_to_chi_perp(self, request, name):
        result = request.getfixturevalue(name).result
        assert abs(normalized_overlap(result.phi_n, result.chi_n_perp)) < 1e-4

    def test_fourth_order_closed_forms(self, grid, fig1_pipeline):
        params = PTParams(KAPPA_FIG1, c_a=50.0)
        result = fig1_pipeline.result
        assert matched_difference(result.chi_n_perp, sample(lambda x: pt_chi4perp(params, x), grid, "p")) < 1e-5
        assert matched_difference(result.phi_n, sample(lambda x: pt_phi4(params, x), grid, "phi4")) < 1e-5

    def test_fourth_order_patched_levels(self, fig1_pipeline):
        # u0 and W_{u0 u1 u2} have zeros, so levels 2 and 4 are patched around them
        tower = fig1_pipeline.tower
        assert "patched" in tower.sources
        assert max(reconcile_tower(tower).values()) < 1e-5
        assert fig1_pipeline.result.residuals["chi"] < 1e-5

    def test_slowly_decaying_solutions_compared_without_normalizing(self, fig1_pipeline):
        # chi_4^perp decays like exp(-x / sqrt 2): its end/peak ratio is above the normalize threshold
        result = fig1_pipeline.result
        with pytest.raises(NotSquareIntegrableError):
            normalize(result.chi_n_perp)
        assert abs(normalized_overlap(result.phi_n, result.chi_n_perp)) < 1e-4
        assert abs(normalized_overlap(normalize(result.phi_n, 1e-4), normalize(result.chi_n_perp, 1e-4))) < 1e-4

    def test_fifth_order_closed_forms(self, grid, fig2_pipeline):
        params = PTParams(KAPPA_FIG2, c_b=0.01)
        result = fig2_pipeline.result
        assert matched_difference(result.chi_n_perp, sample(lambda x: pt_chi5perp(params, x), grid, "p")) < 1e-5
        assert matched_difference(result.phi_n, sample(lambda x: pt_phi5(params, x), grid, "phi5")) < 1e-5

    def test_integral_form_agrees_with_ratio(self, fig2_pipeline):
        assert fig2_pipeline.result.residuals["phi_integral_vs_ratio"] < 1e-5

    def test_integral_form_skipped_when_lower_level_has_zeros(self, fig1_pipeline):
        assert "phi_integral_vs_ratio" not in fig1_pipeline.result.residuals
        assert fig1_pipeline.result.phi_integral is None

    def test_energies_recorded(self, fig2_pipeline):
        assert fig2_pipeline.result.energies == (-1.0, -1.5)
        assert fig2_pipeline.result.order == 5

    def test_order_one_intertwining(self, grid, chain_fig2):
        tower = build_tower(chain_fig2, ["auto"])
        psi = pt_psi_sampled(grid)
        u0 = chain_fig2[0]
        phi, chi = transform_ratio(tower, tower.chain, psi, -1.0)
        expected = psi.derivatives - u0.derivatives / u0.values * psi.values
        assert np.max(np.abs(phi.values - expected)) < 1e-10 * np.max(np.abs(expected))
        assert chi is not None

    def test_zero_psi_gives_chi_perp_multiple(self, grid, fig2_pipeline):
        tower = fig2_pipeline.tower
        zero = SampledFunction(grid, np.zeros(grid.n_points), np.zeros(grid.n_points), "zero")
        phi = transform_integral(tower, zero, -1.0, -1.5, constant=2.0)
        expected = -0.5 * 2.0 * fig2_pipeline.result.chi_n_perp.values
        np.testing.assert_allclose(phi.values, expected, rtol=1e-10, atol=1e-300)

    def test_matched_integral_starts_on_target(self, grid, fig2_pipeline):
        result = fig2_pipeline.result
        phi = transform_integral(fig2_pipeline.tower, fig2_pipeline.psi, -1.0, -1.5, match=result.phi_n)
        assert phi.values[0] == pytest.approx(result.phi_n.values[0], rel=1e-12)

    def test_equal_energies_rejected(self, grid, fig2_pipeline):
        psi = pt_psi_sampled(grid)
        with pytest.raises(PreconditionError):
            transform_integral(fig2_pipeline.tower, psi, -1.5, -1.5)
        with pytest.raises(PreconditionError):
            transform_ratio(fig2_pipeline.tower, fig2_pipeline.tower.chain, psi, -1.5)

    def test_psi_without_energy(self, grid, fig2_pipeline):
        with pytest.raises(PreconditionError):
            run_transform(fig2_pipeline.tower, PoschlTeller(), pt_psi_sampled(grid), None)


class TestReductionOfOrder:
    def test_rebuilds_chi(self, fig2_pipeline):
        result = fig2_pipeline.result
        rebuilt = reduction_of_order(result.chi_n_perp, result.chi_n)
        scale = np.max(np.abs(result.chi_n.values))
        assert np.max(np.abs(rebuilt.values - result.chi_n.values)) / scale < 1e-5

    def test_refuses_chi_perp_with_node(self, fig1_pipeline):
        result = fig1_pipeline.result
        with pytest.raises(SingularityError):
            reduction_of_order(result.chi_n_perp, result.chi_n)


class TestNormalize:
    def test_bound_state_is_normalized(self, grid):
        psi = pt_psi_sampled(grid)
        np.testing.assert_allclose(normalize(psi).values, psi.values, rtol=1e-12)
        np.testing.assert_allclose(normalize(psi.scaled(2.0)).values, psi.values, rtol=1e-12)

    def test_rejects_non_decaying(self, grid):
        with pytest.raises(NotSquareIntegrableError):
            normalize(SampledFunction(grid, np.ones(grid.n_points), name="one"))

    def test_decay_ratio_threshold(self, grid):
        f = SampledFunction(grid, np.exp(-0.75 * np.abs(grid.x)), name="slow")
        with pytest.raises(NotSquareIntegrableError):
            normalize(f)
        assert normalize(f, decay_ratio=1e-4).max_abs > 0

    def test_rejects_zero(self, grid):
        with pytest.raises(NotSquareIntegrableError):
            normalize(SampledFunction(grid, np.zeros(grid.n_points), name="zero"))


class TestSingularRun:
    @pytest.fixture
    def singular_config(self, tmp_path):
        return os.path.join(CONFIG_DIR, "singular.toml"), str(tmp_path)

    def test_strict_run_raises(self, singular_config):
        path, out = singular_config
        pipeline = ConfluentTransformPipeline(load_config(path, {"out": out}))
        with pytest.raises(SingularityError) as info:
            pipeline.run_transform()
        assert info.value.brackets
        assert pipeline.results["regularity"]["is_regular"] is False

    def test_forced_run_warns(self, singular_config, caplog):
        path, out = singular_config
        pipeline = ConfluentTransformPipeline(load_config(path, {"out": out, "force": True}))
        with caplog.at_level(logging.WARNING):
            result = pipeline.run_transform()
        assert not result.regularity.is_regular
        assert "strict mode is off" in caplog.text


class TestTransformedAsPotential:
    def test_samples_reproduced_at_nodes(self, grid, fig2_pipeline):
        V = Transformed.from_result(fig2_pipeline.result)
        np.testing.assert_allclose(V.value(grid.x), fig2_pipeline.result.potential_v_n.values, atol=1e-12)
        assert abs(V.asymptotic_value) < 1e-4

    def test_outside_domain(self, fig2_pipeline):
        V = Transformed.from_result(fig2_pipeline.result)
        with pytest.raises(DomainError):
            V.value(16.0)
        with pytest.raises(DomainError):
            V.check_covers(Grid(-20.0, 0.0, 101))

    def test_chi_perp_integrates_on_transformed_potential(self, fig2_pipeline):
        perp = fig2_pipeline.result.chi_n_perp
        sub = Grid(-15.0, 3.0, 3601)
        y = integrate_ivp(Transformed.from_result(fig2_pipeline.result), -1.5, sub,
                          perp.values[0], perp.derivatives[0], residual_tol=None)
        reference = perp.values[: sub.n_points]
        assert np.max(np.abs(y.values - reference)) / np.max(np.abs(reference)) < 1e-5
