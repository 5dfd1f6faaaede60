"""
Confluent SUSY Toolkit - SUSY Transform
Transformed potential V_n, transformed solutions Phi_n, chi_n, chi_n^perp
(ratio and integral forms) and the regularity verdict
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect

from .errors import NotSquareIntegrableError, PreconditionError, SingularityError
from .jordan_chain import JordanChain
from .schrodinger_core import (
    PotentialSpec,
    SampledFunction,
    cumulative_integral,
    definite_integral,
    max_norm_difference,
    ratio,
    schrodinger_residual,
    second_log_derivative,
    sign_change_brackets,
)
from .wronskian import WronskianTower, augmented_wronskian

logger = logging.getLogger(__name__)

ROOT_XTOL = 2.5e-11
DECAY_RATIO = 1e-6


@dataclass
class RegularityReport:
    """Zero brackets of a transformation Wronskian"""

    is_regular: bool
    zero_brackets: List[Tuple[float, float]]
    min_abs_w: float
    condition_notes: str = ""

    def to_dict(self) -> Dict:
        return {
            "is_regular": self.is_regular,
            "zero_brackets": [list(b) for b in self.zero_brackets],
            "min_abs_w": self.min_abs_w,
            "condition_notes": self.condition_notes,
        }


@dataclass(frozen=True, eq=False)
class TransformResult:
    """Everything produced by a transformation of order n"""

    order: int
    potential_v_n: SampledFunction
    phi_n: Optional[SampledFunction]
    chi_n: Optional[SampledFunction]
    chi_n_perp: SampledFunction
    regularity: RegularityReport
    source: WronskianTower
    energies: Tuple[Optional[float], float]
    chi_scale: float = 1.0
    phi_integral: Optional[SampledFunction] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    spectrum: Optional[List[float]] = None


def _energies_distinct(energy: float, lambda_: float) -> None:
    if abs(energy - lambda_) <= 1e-12 * max(1.0, abs(lambda_)):
        raise PreconditionError(f"Transformed solutions require E != lambda (both {lambda_:.6g})")


def _require_zero_free(w: SampledFunction, label: str) -> None:
    brackets = sign_change_brackets(w.values, w.grid.x)
    if brackets:
        raise SingularityError(f"{label} '{w.name}' has zeros", brackets)


def condition_notes(context: Optional[Dict]) -> str:
    """Sufficient regularity conditions known for the Pöschl-Teller family"""
    if not context:
        return ""
    order = context.get("order")
    constants = list(context.get("constants") or [])
    top = constants[order - 2] if order and order >= 2 and len(constants) >= order - 1 else None
    notes = []
    if order and order % 2 == 0 and top is not None:
        verdict = "satisfied" if top > 0 else "not satisfied"
        notes.append(f"even order: C_a > 0 {verdict} (C_a = {top:g})")
    elif order and order % 2 == 1 and order > 1 and top is not None:
        verdict = "satisfied" if top >= 0 else "not satisfied"
        notes.append(f"odd order: C_b >= 0 {verdict} (C_b = {top:g})")
    lambda_ = context.get("lambda")
    ground = context.get("ground_energy")
    if order and order % 2 == 1 and lambda_ is not None and ground is not None:
        verdict = "satisfied" if lambda_ <= ground else "not satisfied"
        notes.append(f"odd order: lambda <= ground energy {verdict} ({lambda_:g} vs {ground:g})")
    notes.append("advisory only; the numerical scan decides")
    return "; ".join(notes)


def regularity_scan(W: SampledFunction, context: Optional[Dict] = None) -> RegularityReport:
    """
    Locate sign changes of W and refine each by bisection on a cubic interpolant

    Args:
        W: Transformation Wronskian
        context: Optional order / constants / lambda / ground_energy for the advisory notes

    Returns:
        RegularityReport; brackets narrower than 1e-10 except exact zeros reported at the node
    """
    x = W.grid.x
    peak = W.max_abs or 1.0
    spline = CubicSpline(x, W.values / peak)
    brackets = []
    for a, b in sign_change_brackets(W.values, x):
        if a == b:
            brackets.append((a, b))
            continue
        root = bisect(spline, a, b, xtol=ROOT_XTOL)
        brackets.append((max(a, root - ROOT_XTOL), min(b, root + ROOT_XTOL)))
    report = RegularityReport(not brackets, brackets, float(np.min(np.abs(W.values))), condition_notes(context))
    if brackets:
        logger.warning(f"'{W.name}' changes sign {len(brackets)} time(s); first near x={brackets[0][0]:.6g}")
    else:
        logger.info(f"'{W.name}' is zero-free (min |W| = {report.min_abs_w:.3e})")
    return report


def transformed_potential(tower: WronskianTower, base: PotentialSpec, order: Optional[int] = None,
                          allow_singular: bool = False) -> SampledFunction:
    """
    V_n = V_0 - 2 (log W_{u0..u(n-1)})''

    Args:
        tower: Wronskian tower
        base: Initial potential V_0
        order: Transformation order n (defaults to the tower order)
        allow_singular: Emit even if the Wronskian has zeros

    Returns:
        Sampled V_n
    """
    n = tower.order if order is None else order
    grid = tower.grid
    d2 = second_log_derivative(tower.level(n - 1), allow_singular=allow_singular)
    return SampledFunction(grid, base.value(grid.x) - 2.0 * d2.values, name=f"V{n}")


def transform_ratio(tower: WronskianTower, chain: JordanChain, psi: SampledFunction, energy: float,
                    order: Optional[int] = None, allow_singular: bool = False
                    ) -> Tuple[SampledFunction, Optional[SampledFunction]]:
    """
    Phi_n = W_{u0..u(n-1),psi} / W_{u0..u(n-1)} and chi_n = W_{u0..un} / W_{u0..u(n-1)}

    Args:
        tower: Wronskian tower
        chain: Chain consistent with the tower (the tower's aligned chain)
        psi: Solution of the initial problem at `energy`
        energy: E, distinct from lambda
        order: Transformation order n (defaults to the tower order)
        allow_singular: Skip the zero check on the denominator

    Returns:
        (phi_n, chi_n); chi_n is None when the tower stops at level n-1
    """
    _energies_distinct(energy, chain.lambda_)
    n = tower.order if order is None else order
    denominator = tower.level(n - 1)
    if not allow_singular:
        _require_zero_free(denominator, "Transformation Wronskian")
    phi = ratio(augmented_wronskian(chain, n - 1, psi, energy), denominator, name=f"Phi{n}")
    chi = ratio(tower.level(n), denominator, name=f"chi{n}") if tower.order >= n else None
    return phi, chi


def chi_perp(tower: WronskianTower, order: Optional[int] = None, allow_singular: bool = False) -> SampledFunction:
    """chi_n^perp = W_{u0..u(n-2)} / W_{u0..u(n-1)}"""
    n = tower.order if order is None else order
    denominator = tower.level(n - 1)
    if not allow_singular:
        _require_zero_free(denominator, "Transformation Wronskian")
    return ratio(tower.level(n - 2), denominator, name=f"chi{n}_perp")


def pair_wronskian(first: SampledFunction, second: SampledFunction) -> np.ndarray:
    return (first.values * second.require_derivatives("pair_wronskian")
            - first.require_derivatives("pair_wronskian") * second.values)


def unity_scale(perp: SampledFunction, chi: SampledFunction) -> float:
    """Scalar s with W_{perp, s chi} = 1 (median over the interior)"""
    w = pair_wronskian(perp, chi)
    level = float(np.median(w[2:-2]))
    if level == 0.0:
        raise SingularityError("chi_n and chi_n^perp are linearly dependent")
    return 1.0 / level


def transform_integral(tower: WronskianTower, psi: SampledFunction, E: float, lambda_: float,
                       constant: float = 0.0, match: Optional[SampledFunction] = None,
                       order: Optional[int] = None) -> SampledFunction:
    """
    Phi_n = (lambda - E) (W_{n-2}/W_{n-1}) [C + int^x (W_{n-1}/W_{n-2}) Phi_{n-1} dt]

    The integral is anchored at -infinity: the piece from -infinity to x_min is
    W_{chi_{n-1}, Phi_{n-1}}(x_min) / (lambda - E), so constant = 0 yields the
    solution of the E-equation. A `match` function fixes the constant instead
    so that the result equals match at x_min.

    Args:
        tower: Wronskian tower
        psi: Solution of the initial problem at E
        E: Energy of psi
        lambda_: Factorization energy
        constant: C
        match: Optional target whose value at x_min determines C
        order: Transformation order n (defaults to the tower order)

    Returns:
        Phi_n with derivatives
    """
    _energies_distinct(E, lambda_)
    n = tower.order if order is None else order
    w2 = tower.level(n - 2)
    w1 = tower.level(n - 1)
    if n >= 2:
        _require_zero_free(w2, "Wronskian")
    _require_zero_free(w1, "Transformation Wronskian")

    phi_prev = ratio(augmented_wronskian(tower.chain, n - 2, psi, E), w2)
    chi_prev = ratio(w1, w2)
    perp = ratio(w2, w1)
    factor = lambda_ - E
    tail = float(pair_wronskian(chi_prev, phi_prev)[0]) / factor
    if match is not None:
        anchor = float(match.values[0]) / (factor * float(perp.values[0]))
        logger.debug(f"Matched transform-integral constant {anchor - tail:.6g}")
    else:
        anchor = constant + tail

    integrand = SampledFunction(tower.grid, chi_prev.values * phi_prev.values)
    bracket = cumulative_integral(integrand, anchor)
    values = factor * perp.values * bracket.values
    derivatives = factor * (perp.derivatives * bracket.values + perp.values * integrand.values)
    return SampledFunction(tower.grid, values, derivatives, name=f"Phi{n}_integral")


def reduction_of_order(perp: SampledFunction, chi: SampledFunction) -> SampledFunction:
    """chi rebuilt as perp * [c + int dt / perp^2] with c matching chi at x_min"""
    _require_zero_free(perp, "chi_perp")
    inverse = SampledFunction(perp.grid, 1.0 / perp.values ** 2)
    bracket = cumulative_integral(inverse, float(chi.values[0] / perp.values[0]))
    derivatives = perp.derivatives * bracket.values + 1.0 / perp.values if perp.has_derivatives else None
    return SampledFunction(perp.grid, perp.values * bracket.values, derivatives, name="chi_reduction_of_order")


def normalize(f: SampledFunction, decay_ratio: float = DECAY_RATIO) -> SampledFunction:
    """
    Scale f to unit L2 norm over the grid

    Args:
        f: Function decaying at both grid ends
        decay_ratio: Largest accepted |f| at either end relative to max|f|

    Returns:
        f / sqrt(int f^2)
    """
    peak = f.max_abs
    if peak == 0.0:
        raise NotSquareIntegrableError(f"'{f.name}' is identically zero")
    ends = max(abs(f.values[0]), abs(f.values[-1]))
    if ends >= decay_ratio * peak:
        raise NotSquareIntegrableError(
            f"'{f.name}' does not decay at the grid ends (|f_end| / max|f| = {ends / peak:.2e})"
        )
    norm = definite_integral(SampledFunction(f.grid, f.values ** 2))
    return f.scaled(1.0 / np.sqrt(norm))


def overlap(f: SampledFunction, g: SampledFunction) -> float:
    return definite_integral(SampledFunction(f.grid, f.values * g.values))


def normalized_overlap(f: SampledFunction, g: SampledFunction) -> float:
    """int f g / sqrt(int f^2 int g^2); 0 when either function vanishes"""
    norm = np.sqrt(overlap(f, f) * overlap(g, g))
    return overlap(f, g) / norm if norm > 0 else 0.0


def matched_difference(candidate: SampledFunction, reference: SampledFunction) -> float:
    """
    max |s c - r| / max |r| with s the least-squares scale of candidate onto reference

    Compares shapes of solutions whose overall constant (sign included) is free.
    """
    power = overlap(candidate, candidate)
    peak = reference.max_abs
    if power == 0.0 or peak == 0.0:
        return 0.0 if power == peak == 0.0 else 1.0
    s = overlap(candidate, reference) / power
    return float(np.max(np.abs(s * candidate.values - reference.values)) / peak)


def run_transform(tower: WronskianTower, base: PotentialSpec, psi: Optional[SampledFunction] = None,
                  energy: Optional[float] = None, strict: bool = True,
                  ground_energy: Optional[float] = None, order: Optional[int] = None) -> TransformResult:
    """
    Full transformation of order n: scan, V_n, Phi_n, chi_n, chi_n^perp and their residuals

    Args:
        tower: Wronskian tower (its chain is used for the ratio forms)
        base: Initial potential
        psi: Optional solution of the initial problem
        energy: Energy of psi
        strict: Raise SingularityError on a singular Wronskian instead of warning
        ground_energy: Ground-state energy of the initial problem, for the advisory notes
        order: Transformation order (defaults to the tower order)

    Returns:
        TransformResult
    """
    n = tower.order if order is None else order
    chain = tower.chain
    lambda_ = chain.lambda_
    logger.info(f"Running order-{n} transformation at lambda={lambda_:.6g}")

    context = {"order": n, "constants": list(tower.recursion_constants),
               "lambda": lambda_, "ground_energy": ground_energy}
    regularity = regularity_scan(tower.level(n - 1), context)
    if not regularity.is_regular:
        if strict:
            raise SingularityError(f"Transformation Wronskian of order {n} vanishes", regularity.zero_brackets)
        logger.warning("Singular Wronskian; continuing because strict mode is off")
    allow = not regularity.is_regular

    v_n = transformed_potential(tower, base, n, allow_singular=allow)
    perp = chi_perp(tower, n, allow_singular=allow)
    residuals: Dict[str, float] = {
        "chi_perp": schrodinger_residual(perp, v_n, lambda_),
    }

    phi, chi = None, None
    if psi is not None:
        if energy is None:
            raise PreconditionError("psi given without its energy")
        phi, chi = transform_ratio(tower, chain, psi, energy, n, allow_singular=allow)
        residuals["phi"] = schrodinger_residual(phi, v_n, energy)
    elif tower.order >= n:
        chi = ratio(tower.level(n), tower.level(n - 1), name=f"chi{n}")

    scale = 1.0
    if chi is not None:
        scale = unity_scale(perp, chi)
        chi = chi.scaled(scale)
        residuals["chi"] = schrodinger_residual(chi, v_n, lambda_)
        residuals["unity"] = float(np.max(np.abs(pair_wronskian(perp, chi) - 1.0)[2:-2]))
        logger.info(f"Scaled chi_{n} by {scale:.6g} so that W(chi_perp, chi) = 1")

    phi_integral = None
    if psi is not None and n >= 1:
        try:
            phi_integral = transform_integral(tower, psi, energy, lambda_, order=n)
            residuals["phi_integral_vs_ratio"] = max_norm_difference(phi_integral, phi)
        except SingularityError as e:
            logger.info(f"Integral form of Phi_{n} skipped: {e}")

    logger.info("Transformation residuals: " + ", ".join(f"{k}={v:.2e}" for k, v in residuals.items()))
    return TransformResult(
        order=n,
        potential_v_n=v_n,
        phi_n=phi,
        chi_n=chi,
        chi_n_perp=perp,
        regularity=regularity,
        source=tower,
        energies=(energy, lambda_),
        chi_scale=scale,
        phi_integral=phi_integral,
        residuals=residuals,
    )
