"""
Confluent SUSY Toolkit - Transform Pipeline
Grid -> potential -> Jordan chain -> Wronskian tower -> transformation ->
spectrum / verification / export, driven by a RunConfig
"""

import json
import logging
import os
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from .config import RunConfig
from .errors import ConfigError, NotSquareIntegrableError, PreconditionError, SingularityError
from .jordan_chain import (
    ChainSpec,
    IVPSeed,
    JordanChain,
    PoschlTellerSeed,
    build_chain,
    closed_form_constants,
    parametric_chain_check,
    verify_chain,
)
from .poschl_teller import PTParams, pt_chi4perp, pt_chi5perp, pt_phi4, pt_phi5, pt_psi_sampled, pt_u_sampled, sample
from .schrodinger_core import (
    Grid,
    PoschlTeller,
    PotentialSpec,
    SampledFunction,
    integrate_ivp,
    is_zero_free,
    max_norm_difference,
    max_relative_difference,
    potential_on_grid,
    schrodinger_residual,
)
from .spectral_check import SpectrumReport, spectrum
from .susy_transform import (
    RegularityReport,
    TransformResult,
    matched_difference,
    normalized_overlap,
    reduction_of_order,
    regularity_scan,
    run_transform,
)
from .wronskian import (
    WronskianTower,
    bracket_monotonicity,
    build_ladder,
    build_tower,
    factorized_wronskian,
    reconcile_tower,
    sign_alternation_holds,
)

logger = logging.getLogger(__name__)

PT_GROUND_ENERGY = -1.0
FLOAT_FORMAT = "%.12e"
TELESCOPING_TOL = 1e-10


def _check(name: str, value: Optional[float], tolerance: Optional[float], passed: bool,
           kind: str = "tolerance", note: str = "") -> Dict[str, Any]:
    return {"name": name, "value": value, "tolerance": tolerance, "passed": bool(passed),
            "kind": kind, "note": note}


def _skipped(name: str, note: str) -> Dict[str, Any]:
    return {"name": name, "value": None, "tolerance": None, "passed": True, "kind": "skipped", "note": note}


class ConfluentTransformPipeline:
    """Confluent SUSY transformation run for one RunConfig"""

    def __init__(self, config: RunConfig):
        """
        Initialize the pipeline

        Args:
            config: Validated run configuration
        """
        self.config = config
        self.grid: Optional[Grid] = None
        self.potential: Optional[PotentialSpec] = None
        self.chain: Optional[JordanChain] = None
        self.tower: Optional[WronskianTower] = None
        self.psi: Optional[SampledFunction] = None
        self.result: Optional[TransformResult] = None
        self.results: Dict[str, Any] = {}

    @property
    def order(self) -> int:
        return self.config.transform.order

    @property
    def lambda_(self) -> float:
        return self.config.transform.lambda_

    @property
    def ground_energy(self) -> Optional[float]:
        return PT_GROUND_ENERGY if isinstance(self.potential, PoschlTeller) else None

    def build_grid(self) -> Grid:
        """Build the grid and load the potential, checking coverage"""
        try:
            self.grid = self.config.grid.build()
            self.potential = self.config.build_potential()
            self.potential.check_covers(self.grid)
        except ValueError as e:
            logger.error(f"Grid / potential setup failed: {e}")
            raise
        logger.info(f"Grid [{self.grid.x_min}, {self.grid.x_max}] with {self.grid.n_points} points (h={self.grid.h:.4g})")
        return self.grid

    def _seed(self) -> SampledFunction:
        seed = self.config.seed
        if seed.mode == "closed_form":
            return pt_u_sampled(0, PTParams.from_lambda(self.lambda_), self.grid)
        return integrate_ivp(self.potential, self.lambda_, self.grid, seed.y0, seed.dy0, residual_tol=None, name="u0")

    def build_chain(self) -> JordanChain:
        """
        Build u0..un, choosing the integral method when u0 is zero-free

        Returns:
            JordanChain of order n
        """
        seed_config = self.config.seed
        method = seed_config.method
        if method is None:
            method = "integral" if is_zero_free(self._seed()) else "ivp"
            if method == "ivp":
                logger.info("u0 has zeros on the grid; building the chain level by level with IVPs")
        if seed_config.mode == "closed_form":
            seed = PoschlTellerSeed()
            constants = closed_form_constants(PTParams.from_lambda(self.lambda_), self.grid, self.order, method)
        else:
            seed = IVPSeed(seed_config.y0, seed_config.dy0)
            constants = ()
        spec = ChainSpec(self.lambda_, self.order, seed, constants, method)
        self.chain = build_chain(spec, self.potential, self.grid, residual_tol=None)
        self.results["chain"] = {"method": method, "order": self.chain.order, "seed": seed.kind}
        return self.chain

    def _record_failure(self, stage: str, error: SingularityError) -> None:
        brackets = [list(b) for b in error.brackets]
        self.results["failure"] = {"stage": stage, "error": str(error), "zero_brackets": brackets}
        if stage == "transform":
            self.results["regularity"] = {"is_regular": False, "zero_brackets": brackets, "condition_notes": ""}

    def build_tower(self) -> WronskianTower:
        try:
            self.tower = build_tower(self.chain, self.config.tower_constants,
                                     self.config.transform.constant_convention)
        except SingularityError as e:
            self._record_failure("tower", e)
            raise
        self.results["tower"] = self.tower.summary()
        logger.info(f"Tower levels: {', '.join(self.tower.sources)}")
        return self.tower

    def build_psi(self) -> Optional[SampledFunction]:
        psi_config = self.config.psi
        if psi_config.mode == "none":
            self.psi = None
        elif psi_config.mode == "closed_form":
            if psi_config.energy != PT_GROUND_ENERGY:
                raise ConfigError(f"The closed-form psi is the bound state at E = -1, not E = {psi_config.energy}")
            self.psi = pt_psi_sampled(self.grid)
        else:
            self.psi = integrate_ivp(self.potential, psi_config.energy, self.grid, psi_config.y0, psi_config.dy0,
                                     residual_tol=None, name="psi")
        return self.psi

    def scan(self) -> RegularityReport:
        """Regularity scan of the transformation Wronskian W_{u0..u(n-1)}"""
        context = {"order": self.order, "constants": list(self.tower.recursion_constants),
                   "lambda": self.lambda_, "ground_energy": self.ground_energy}
        report = regularity_scan(self.tower.level(self.order - 1), context)
        self.results["regularity"] = report.to_dict()
        return report

    def transform(self) -> TransformResult:
        """Run the transformation; singular Wronskians raise unless outputs.force is set"""
        force = self.config.outputs.force
        energy = self.config.psi.energy if self.psi is not None else None
        try:
            self.result = run_transform(self.tower, self.potential, self.psi, energy, strict=not force,
                                        ground_energy=self.ground_energy)
        except SingularityError as e:
            self._record_failure("transform", e)
            logger.error(f"Transformation failed: {e}")
            raise
        self.results["regularity"] = self.result.regularity.to_dict()
        self.results["residuals"] = dict(self.result.residuals)
        self.results["chi_scale"] = self.result.chi_scale
        self.results["energies"] = {"E": energy, "lambda": self.lambda_}
        return self.result

    def prepare(self) -> None:
        """Grid, potential, chain and tower"""
        self.build_grid()
        self.build_chain()
        self.build_tower()

    def run_transform(self) -> TransformResult:
        self.prepare()
        self.build_psi()
        return self.transform()

    def run_scan(self) -> RegularityReport:
        self.prepare()
        return self.scan()

    def run_spectrum(self, count: Optional[int] = None, base: bool = False) -> SpectrumReport:
        """
        Lowest eigenvalues of V_n (or of V0 with base=True)

        Args:
            count: Number of eigenvalues (defaults to [spectrum].count)
            base: Use the initial potential instead of the transformed one

        Returns:
            SpectrumReport
        """
        count = count or self.config.spectrum.count
        if base:
            self.build_grid()
            V = potential_on_grid(self.potential, self.grid).renamed("V0")
        else:
            V = self.run_transform().potential_v_n
        report = spectrum(V, count, threshold=self.potential.asymptotic_value)
        self.results["spectrum"] = report.to_dict()
        return report

    def _closed_form_checks(self, tolerance: float) -> List[Dict[str, Any]]:
        n = self.order
        convention = self.config.transform.constant_convention
        constant = self.tower.recursion_constants[n - 2] if n >= 2 else None
        if n not in (4, 5) or not isinstance(self.chain.spec.seed, PoschlTellerSeed):
            return [_skipped("closed_form_match", "closed forms exist for the Pöschl-Teller orders 4 and 5")]
        if convention != "asymptotic" or constant is None:
            return [_skipped("closed_form_match", "closed forms use the asymptotic constant convention")]
        kappa = float(np.sqrt(-self.lambda_))
        params = PTParams(kappa, c_a=constant) if n == 4 else PTParams(kappa, c_b=constant)
        phi_form, perp_form = (pt_phi4, pt_chi4perp) if n == 4 else (pt_phi5, pt_chi5perp)
        checks = []
        pairs: List[tuple] = [("chi_perp", self.result.chi_n_perp, perp_form)]
        if self.result.phi_n is not None and self.config.psi.mode == "closed_form":
            pairs.append(("phi", self.result.phi_n, phi_form))
        for label, numeric, form in pairs:
            exact = sample(lambda x, f=form: f(params, x), self.grid, f"{label}_closed_form")
            difference = matched_difference(numeric, exact)
            checks.append(_check(f"closed_form_{label}", difference, tolerance, difference < tolerance))
        return checks

    def verify(self) -> Dict[str, Any]:
        """
        Run every invariant check on the built chain, tower and transformation

        Returns:
            Dictionary with the check list and the overall verdict
        """
        tol = self.config.tolerances
        checks: List[Dict[str, Any]] = []

        def guarded(name: str, compute: Callable[[], List[Dict[str, Any]]]) -> None:
            try:
                checks.extend(compute())
            except (SingularityError, NotSquareIntegrableError, PreconditionError) as e:
                checks.append(_skipped(name, str(e)))

        report = verify_chain(self.tower.chain, tol.residual_tol)
        checks.append(_check("chain_residuals", report.worst, tol.residual_tol, report.passed))

        reconciliation = reconcile_tower(self.tower)
        worst = max(reconciliation.values(), default=0.0)
        checks.append(_check("tower_reconciliation", worst, tol.reconciliation, worst < tol.reconciliation))

        for key, value in self.result.residuals.items():
            if key == "unity":
                checks.append(_check("unity_wronskian", value, tol.unity, value < tol.unity))
            elif key == "phi_integral_vs_ratio":
                checks.append(_check("phi_integral_vs_ratio", value, tol.reconciliation, value < tol.reconciliation))
            else:
                checks.append(_check(f"residual_{key}", value, tol.residual_tol, value < tol.residual_tol))

        def orthogonality():
            if self.result.phi_n is None:
                return [_skipped("orthogonality", "no psi given")]
            value = abs(normalized_overlap(self.result.phi_n, self.result.chi_n_perp))
            return [_check("orthogonality", value, tol.orthogonality, value < tol.orthogonality)]

        def telescoping():
            product = factorized_wronskian(build_ladder(self.tower), self.tower.order)
            value = max_relative_difference(product, self.tower.level(self.tower.order))
            return [_check("factorized_wronskian", value, TELESCOPING_TOL, value < TELESCOPING_TOL)]

        def reduction():
            if self.result.chi_n is None:
                return [_skipped("reduction_of_order", "chi_n not available")]
            rebuilt = reduction_of_order(self.result.chi_n_perp, self.result.chi_n)
            value = max_norm_difference(rebuilt, self.result.chi_n)
            return [_check("reduction_of_order", value, tol.reduction_of_order, value < tol.reduction_of_order)]

        def parametric():
            chain = self.tower.chain
            if not isinstance(chain.spec.seed, PoschlTellerSeed) or chain.order < 1:
                return [_skipped("parametric_u1", "needs a closed-form seed and u1")]
            check = parametric_chain_check(chain.spec, self.potential, self.grid)
            difference = check.u1.plus(chain[1], -1.0)
            homogeneous = schrodinger_residual(difference, self.potential.value(self.grid.x), chain.lambda_)
            return [
                _check("parametric_u1", check.residual, tol.parametric, check.residual < tol.parametric),
                _check("parametric_minus_chain_u1", homogeneous, tol.parametric, homogeneous < tol.parametric),
            ]

        guarded("orthogonality", orthogonality)
        guarded("factorized_wronskian", telescoping)
        guarded("reduction_of_order", reduction)
        guarded("parametric_u1", parametric)
        guarded("closed_form_match", lambda: self._closed_form_checks(tol.reconciliation))

        monotone = bracket_monotonicity(self.tower)
        checks.append(_check("bracket_monotonicity", monotone, -1e-12, monotone >= -1e-12, kind="correctness"))
        alternation = sign_alternation_holds(self.tower)
        if alternation is None:
            checks.append(_skipped("sign_alternation", "odd order or an even level is patched around zeros"))
        else:
            checks.append(_check("sign_alternation", None, None, alternation, kind="correctness"))
        checks.append(_check("regularity", self.result.regularity.min_abs_w, None,
                             self.result.regularity.is_regular, kind="correctness"))

        failed = [c["name"] for c in checks if not c["passed"]]
        for c in checks:
            if not c["passed"]:
                logger.warning(f"Check '{c['name']}' failed ({c['kind']}): value {c['value']} vs {c['tolerance']}")
        verification = {"passed": not failed, "failed": failed, "checks": checks}
        self.results["verification"] = verification
        logger.info(f"Verification: {len(checks) - len(failed)}/{len(checks)} checks passed")
        return verification

    def run_verify(self) -> Dict[str, Any]:
        self.run_transform()
        return self.verify()

    def output_dir(self) -> str:
        return self.config.outputs.dir

    def write_outputs(self, extra_frames: Optional[Dict[str, pd.DataFrame]] = None) -> str:
        """
        Write the function CSVs (x,value) and report.json

        Args:
            extra_frames: Additional tables keyed by file stem (e.g. spectrum)

        Returns:
            Output directory
        """
        out = self.output_dir()
        os.makedirs(out, exist_ok=True)
        frames: Dict[str, pd.DataFrame] = {}
        if self.result is not None:
            frames["potential"] = self.result.potential_v_n.to_frame()
            frames["chi_perp"] = self.result.chi_n_perp.to_frame()
            frames["wronskian"] = self.tower.level(self.order - 1).to_frame()
            if self.result.phi_n is not None:
                frames["phi"] = self.result.phi_n.to_frame()
            if self.result.chi_n is not None:
                frames["chi"] = self.result.chi_n.to_frame()
        elif self.tower is not None:
            frames["wronskian"] = self.tower.level(self.order - 1).to_frame()
        frames.update(extra_frames or {})

        try:
            for stem, frame in frames.items():
                frame.to_csv(os.path.join(out, f"{stem}.csv"), index=False, float_format=FLOAT_FORMAT)
            report = {"config": self.config.model_dump(mode="json", by_alias=True), **self.results}
            with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as f:
                json.dump(report, f, indent=2, sort_keys=True, default=float)
        except OSError as e:
            logger.error(f"Writing outputs failed: {e}")
            raise
        logger.info(f"Wrote {len(frames)} CSV files and report.json to {out}")
        return out
