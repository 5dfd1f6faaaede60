"""
Confluent SUSY Toolkit - Jordan Chain
Construction and validation of the transformation functions u0..un solving
u0'' + (lambda - V) u0 = 0 and uj'' + (lambda - V) uj = -u(j-1)
"""

import logging
from dataclasses import dataclass, field
from typing import ClassVar, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    NumericalAccuracyError,
    PreconditionError,
    SingularityError,
    UnsupportedError,
)
from .poschl_teller import MAX_CLOSED_FORM_LEVEL, PTParams, pt_u, pt_u_prime, pt_u_sampled
from .schrodinger_core import (
    DEFAULT_RESIDUAL_TOL,
    Grid,
    PoschlTeller,
    PotentialSpec,
    SampledFunction,
    cumulative_integral,
    eval_potential,
    integrate_ivp,
    schrodinger_residual,
    sign_change_brackets,
)

logger = logging.getLogger(__name__)

CHAIN_METHODS = ("integral", "ivp")
DEFAULT_DLAMBDA = 1e-4


@dataclass(frozen=True)
class PoschlTellerSeed:
    """u0 from the closed form with kappa = sqrt(-lambda)"""

    kind: ClassVar[str] = "closed_form"


@dataclass(frozen=True)
class IVPSeed:
    """u0 integrated from (u0, u0') at x_min"""

    y0: float
    dy0: float
    kind: ClassVar[str] = "ivp"


ChainSeed = Union[PoschlTellerSeed, IVPSeed]


@dataclass(frozen=True)
class ChainSpec:
    """
    Factorization energy, chain order, seed and per-level constants.

    For method 'integral' each pair is (c_inner, c_outer), the constants of the
    nested integrals with the homogeneous admixture fixed to zero. For method
    'ivp' each pair is (u_j(x_min), u_j'(x_min)).
    """

    lambda_: float
    order: int
    seed: ChainSeed = field(default_factory=PoschlTellerSeed)
    inner_constants: Tuple[Tuple[float, float], ...] = ()
    method: str = "integral"

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 0:
            raise ValueError(f"Chain order must be a non-negative integer, got {self.order}")
        if self.method not in CHAIN_METHODS:
            raise ValueError(f"Unknown chain method '{self.method}', expected one of {CHAIN_METHODS}")
        if isinstance(self.seed, PoschlTellerSeed) and self.lambda_ >= 0:
            raise ValueError(f"Closed-form seed needs lambda < 0 so that kappa > 0, got {self.lambda_}")
        if len(self.inner_constants) > self.order:
            raise ValueError(f"{len(self.inner_constants)} constant pairs given for a chain of order {self.order}")
        pairs = tuple((float(a), float(b)) for a, b in self.inner_constants)
        object.__setattr__(self, "inner_constants", pairs)
        object.__setattr__(self, "order", int(self.order))

    def constants_for(self, level: int) -> Tuple[float, float]:
        if level - 1 < len(self.inner_constants):
            return self.inner_constants[level - 1]
        return (0.0, 0.0)


@dataclass(frozen=True, eq=False)
class JordanChain:
    """u0..un sampled with first derivatives"""

    spec: ChainSpec
    functions: Tuple[SampledFunction, ...]
    potential: PotentialSpec

    @property
    def order(self) -> int:
        return len(self.functions) - 1

    @property
    def grid(self) -> Grid:
        return self.functions[0].grid

    @property
    def lambda_(self) -> float:
        return self.spec.lambda_

    def __getitem__(self, level: int) -> SampledFunction:
        return self.functions[level]

    def truncated(self, order: int) -> "JordanChain":
        return JordanChain(self.spec, self.functions[: order + 1], self.potential)


@dataclass
class ChainResidualReport:
    """Per-level interior residuals of the chain equations"""

    absolute: List[float]
    relative: List[float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(r < self.tolerance for r in self.relative)

    @property
    def worst(self) -> float:
        return max(self.relative)

    def to_dict(self) -> Dict:
        return {
            "absolute": self.absolute,
            "relative": self.relative,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass
class ParametricCheck:
    """u1 built as d u0 / d lambda and its chain residual"""

    u1: SampledFunction
    residual: float
    dlambda: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


def _seed_function(spec: ChainSpec, potential: PotentialSpec, grid: Grid) -> SampledFunction:
    if isinstance(spec.seed, PoschlTellerSeed):
        if not isinstance(potential, PoschlTeller):
            raise PreconditionError("The closed-form seed only solves the Pöschl-Teller potential")
        return pt_u_sampled(0, PTParams.from_lambda(spec.lambda_), grid)
    return integrate_ivp(potential, spec.lambda_, grid, spec.seed.y0, spec.seed.dy0, residual_tol=None, name="u0")


def _integral_level(u0: SampledFunction, previous: SampledFunction, constants: Tuple[float, float],
                    level: int) -> SampledFunction:
    brackets = sign_change_brackets(u0.values, u0.grid.x)
    if brackets:
        raise SingularityError("u0 has zeros; 1/u0^2 in the integral representation is undefined", brackets)
    c_inner, c_outer = constants
    grid = u0.grid
    inner = cumulative_integral(SampledFunction(grid, u0.values * previous.values), c_inner)
    outer = cumulative_integral(SampledFunction(grid, inner.values / u0.values ** 2), c_outer)
    values = -u0.values * outer.values
    derivatives = -u0.derivatives * outer.values - inner.values / u0.values
    return SampledFunction(grid, values, derivatives, name=f"u{level}")


def _next_level(spec: ChainSpec, potential: PotentialSpec, u0: SampledFunction,
                previous: SampledFunction, level: int) -> SampledFunction:
    constants = spec.constants_for(level)
    if spec.method == "integral":
        return _integral_level(u0, previous, constants, level)
    y0, dy0 = constants
    return integrate_ivp(potential, spec.lambda_, u0.grid, y0, dy0, source=previous,
                         residual_tol=None, name=f"u{level}")


def build_chain(spec: ChainSpec, potential: PotentialSpec, grid: Grid,
                residual_tol: Optional[float] = DEFAULT_RESIDUAL_TOL) -> JordanChain:
    """
    Build u0..un through nested cumulative integrals (or level-by-level IVPs)

    Args:
        spec: Chain specification
        potential: Potential V
        grid: Sampling grid
        residual_tol: Relative residual bound for every level; None skips verification

    Returns:
        JordanChain with first derivatives on every level
    """
    logger.info(f"Building Jordan chain of order {spec.order} at lambda={spec.lambda_:.6g} ({spec.method})")
    try:
        functions = [_seed_function(spec, potential, grid)]
        for level in range(1, spec.order + 1):
            functions.append(_next_level(spec, potential, functions[0], functions[-1], level))
        chain = JordanChain(spec, tuple(functions), potential)
    except Exception as e:
        logger.error(f"Jordan chain construction failed: {e}")
        raise

    if residual_tol is not None:
        report = verify_chain(chain, residual_tol)
        if not report.passed:
            raise NumericalAccuracyError(
                f"Chain residual {report.worst:.3e} exceeds {residual_tol:.1e}",
                {f"u{j}": r for j, r in enumerate(report.relative)},
            )
    return chain


def verify_chain(chain: JordanChain, residual_tol: float = DEFAULT_RESIDUAL_TOL) -> ChainResidualReport:
    """
    Interior 5-point residuals of the chain equations, one per level

    Args:
        chain: Built chain
        residual_tol: Relative tolerance deciding `passed`

    Returns:
        ChainResidualReport
    """
    potential = chain.potential.value(chain.grid.x)
    absolute, relative = [], []
    for j, u in enumerate(chain.functions):
        source = chain.functions[j - 1] if j > 0 else None
        absolute.append(schrodinger_residual(u, potential, chain.lambda_, source, relative=False))
        relative.append(absolute[-1] / (1.0 + u.max_abs))
    return ChainResidualReport(absolute, relative, residual_tol)


def matched_constants(u0: SampledFunction, value: float, derivative: float, method: str) -> Tuple[float, float]:
    """Constant pair reproducing a target (value, derivative) at x_min"""
    if method == "ivp":
        return (float(value), float(derivative))
    a = float(u0.values[0])
    da = float(u0.require_derivatives("matched_constants")[0])
    c_outer = -value / a
    c_inner = -(a * derivative - da * value)
    return (c_inner, c_outer)


def closed_form_constants(params: PTParams, grid: Grid, order: int, method: str) -> Tuple[Tuple[float, float], ...]:
    """Constant pairs reproducing the closed forms u1..u3; higher levels get zeros"""
    u0 = pt_u_sampled(0, params, grid)
    pairs = []
    for j in range(1, order + 1):
        if j <= MAX_CLOSED_FORM_LEVEL:
            value = pt_u(j, params, grid.x_min)
            derivative = pt_u_prime(j, params, grid.x_min)
            pairs.append(matched_constants(u0, value, derivative, method))
        else:
            pairs.append((0.0, 0.0))
    return tuple(pairs)


def closed_form_chain(params: PTParams, grid: Grid, order: int = MAX_CLOSED_FORM_LEVEL) -> JordanChain:
    """Chain u0..u_order evaluated from the closed forms (order <= 3)"""
    if order > MAX_CLOSED_FORM_LEVEL:
        raise UnsupportedError(f"Closed-form chain available up to order {MAX_CLOSED_FORM_LEVEL}")
    spec = ChainSpec(params.lambda_, order, PoschlTellerSeed(),
                     closed_form_constants(params, grid, order, "integral"), "integral")
    functions = tuple(pt_u_sampled(j, params, grid) for j in range(order + 1))
    return JordanChain(spec, functions, PoschlTeller())


def replace_level(chain: JordanChain, level: int, function: SampledFunction) -> JordanChain:
    """Swap u_level and rebuild every higher level from it with the chain's own constants"""
    if not 1 <= level <= chain.order:
        raise ValueError(f"Level {level} outside 1..{chain.order}")
    functions = list(chain.functions[:level]) + [function.renamed(f"u{level}")]
    for j in range(level + 1, chain.order + 1):
        functions.append(_next_level(chain.spec, chain.potential, functions[0], functions[-1], j))
    logger.debug(f"Replaced u{level} and rebuilt {chain.order - level} higher levels")
    return JordanChain(chain.spec, tuple(functions), chain.potential)


def recessive_solution(potential: PotentialSpec, lambda_: float, grid: Grid) -> SampledFunction:
    """Homogeneous solution at lambda decaying towards x_max, integrated right to left"""
    gap = eval_potential(potential, grid.x_max) - lambda_
    if gap <= 0:
        raise PreconditionError(f"No decaying solution at x_max: V(x_max) - lambda = {gap:.3g}")
    return integrate_ivp(potential, lambda_, grid, 1.0, -float(np.sqrt(gap)),
                         direction="backward", name="r")


def parametric_chain_check(spec: ChainSpec, potential: PotentialSpec, grid: Grid,
                           dlambda: float = DEFAULT_DLAMBDA) -> ParametricCheck:
    """
    Build u1 = d u0 / d lambda by a central difference and check the j = 1 chain equation

    Args:
        spec: Chain specification (closed-form seed required)
        potential: Must be the Pöschl-Teller potential
        grid: Sampling grid
        dlambda: Finite-difference step in lambda

    Returns:
        ParametricCheck with the relative residual
    """
    if not isinstance(spec.seed, PoschlTellerSeed) or not isinstance(potential, PoschlTeller):
        raise UnsupportedError("The parametric representation needs u0 as a closed form in lambda")
    if spec.lambda_ + dlambda >= 0:
        raise PreconditionError(f"lambda + dlambda must stay negative, got {spec.lambda_ + dlambda}")
    plus = PTParams.from_lambda(spec.lambda_ + dlambda)
    minus = PTParams.from_lambda(spec.lambda_ - dlambda)
    x = grid.x
    values = (pt_u(0, plus, x) - pt_u(0, minus, x)) / (2 * dlambda)
    derivatives = (pt_u_prime(0, plus, x) - pt_u_prime(0, minus, x)) / (2 * dlambda)
    u1 = SampledFunction(grid, values, derivatives, name="u1_parametric")
    u0 = pt_u_sampled(0, PTParams.from_lambda(spec.lambda_), grid)
    residual = schrodinger_residual(u1, potential.value(x), spec.lambda_, source=u0)
    logger.info(f"Parametric u1 residual {residual:.3e} at dlambda={dlambda:g}")
    return ParametricCheck(u1, residual, dlambda, max(1e-4, dlambda ** 2))
