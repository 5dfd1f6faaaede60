"""
Confluent SUSY Toolkit - Wronskian
Transformation Wronskians computed by direct determinant, by the recursive
formula W_k = -W_{k-2} [C + int (W_{k-1}/W_{k-2})^2] and by the chi-ladder
factorization, plus the tower that ties them together
"""

import logging
from dataclasses import dataclass
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import NumericalAccuracyError, PreconditionError, SingularityError
from .jordan_chain import JordanChain, recessive_solution, replace_level
from .schrodinger_core import (
    Grid,
    PotentialSpec,
    SampledFunction,
    cumulative_integral,
    five_point_derivative,
    local_envelope,
    max_relative_difference,
    potential_derivatives,
    ratio,
    sign_change_brackets,
)

logger = logging.getLogger(__name__)

AUTO = "auto"
CONVENTIONS = ("asymptotic", "anchor")
ALIGNMENT_SKIP_TOL = 1e-6
ALIGNMENT_TOL = 1e-5
INDEPENDENCE_TOL = 1e-8
# relative rounding floor above which a direct determinant is not compared or anchored on
DETERMINANT_TRUST = 1e-8
PATCH_MARGIN = 0.5
PATCH_MARGIN_POINTS = 20
MIN_RUN_POINTS = 9

# (function, energy, index of its source column or None)
Column = Tuple[SampledFunction, float, Optional[int]]


def _derivative_table(columns: Sequence[Column], potential: List[np.ndarray], max_order: int) -> List[List[np.ndarray]]:
    """Derivatives 0..max_order of every column from f'' = (V - e) f - s, differentiated"""
    table = [[f.values, f.require_derivatives("Wronskian")] for f, _, _ in columns]
    for m in range(2, max_order + 1):
        for c, (_, energy, source) in enumerate(columns):
            d = -energy * table[c][m - 2]
            for i in range(m - 1):
                d = d + comb(m - 2, i) * potential[i] * table[c][m - 2 - i]
            if source is not None:
                d = d - table[source][m - 2]
            table[c].append(d)
    return table


def _determinant(table: List[List[np.ndarray]], advance_last: bool) -> np.ndarray:
    size = len(table)
    rows = list(range(size))
    if advance_last:
        rows[-1] = size
    matrix = np.stack([np.stack([table[c][m] for c in range(size)], axis=-1) for m in rows], axis=-2)
    return np.linalg.det(matrix)


def _trusted(table: List[List[np.ndarray]], determinant: np.ndarray) -> np.ndarray:
    """
    Nodes where the determinant carries less than DETERMINANT_TRUST relative rounding noise

    The noise is bounded by eps times the Hadamard product of the column norms;
    nearly parallel columns (all chain functions share one exponential at large
    |x|) push it far above eps |W|.
    """
    size = len(table)
    hadamard = np.prod([np.sqrt(sum(table[c][m] ** 2 for m in range(size))) for c in range(size)], axis=0)
    return np.finfo(float).eps * hadamard <= DETERMINANT_TRUST * local_envelope(determinant)


def _column_wronskian(columns: Sequence[Column], potential: PotentialSpec, grid: Grid,
                      name: str) -> Tuple[SampledFunction, np.ndarray]:
    size = len(columns)
    if size == 0:
        ones = SampledFunction(grid, np.ones(grid.n_points), np.zeros(grid.n_points), name=name)
        return ones, np.ones(grid.n_points, dtype=bool)
    if size == 1:
        f = columns[0][0]
        single = SampledFunction(grid, f.values, f.require_derivatives("Wronskian"), name=name)
        return single, np.ones(grid.n_points, dtype=bool)
    table = _derivative_table(columns, potential_derivatives(potential, grid, max(0, size - 2)), size)
    values = _determinant(table, False)
    return SampledFunction(grid, values, _determinant(table, True), name=name), _trusted(table, values)


def column_wronskian(columns: Sequence[Column], potential: PotentialSpec, grid: Grid, name: str = "W") -> SampledFunction:
    """
    Wronskian of arbitrary solution columns, with its derivative

    Args:
        columns: (function, energy, source column index) triples
        potential: Potential whose derivatives feed the ODE reduction
        grid: Common grid
        name: Label for the result

    Returns:
        Determinant per grid point; derivative from the determinant with its last row advanced
    """
    return _column_wronskian(columns, potential, grid, name)[0]


def _chain_columns(chain: JordanChain, upto: int) -> List[Column]:
    return [(chain[j], chain.lambda_, j - 1 if j else None) for j in range(upto + 1)]


def _direct(chain: JordanChain, upto: int) -> Tuple[SampledFunction, np.ndarray]:
    if not 0 <= upto <= chain.order:
        raise PreconditionError(f"Requested W up to u{upto} but the chain stops at u{chain.order}")
    name = f"W[u0..u{upto}]"
    if upto == 0:
        return chain[0].renamed(name), np.ones(chain.grid.n_points, dtype=bool)
    return _column_wronskian(_chain_columns(chain, upto), chain.potential, chain.grid, name)


def direct_wronskian(chain: JordanChain, upto: int) -> SampledFunction:
    """
    W_{u0..u_upto} from the (upto+1) x (upto+1) determinant of derivative rows

    Args:
        chain: Jordan chain carrying first derivatives
        upto: Highest level k included (k = 0 returns u0 itself)

    Returns:
        Wronskian with derivatives
    """
    return _direct(chain, upto)[0]


def trusted_nodes(chain: JordanChain, upto: int) -> np.ndarray:
    """Grid nodes where direct_wronskian(chain, upto) is free of rounding noise above DETERMINANT_TRUST"""
    return _direct(chain, upto)[1]


def augmented_wronskian(chain: JordanChain, upto: int, psi: SampledFunction, energy: float) -> SampledFunction:
    """W_{u0..u_upto, psi}; upto = -1 returns psi"""
    if upto > chain.order:
        raise PreconditionError(f"Requested W up to u{upto} but the chain stops at u{chain.order}")
    columns = _chain_columns(chain, upto) + [(psi, energy, None)]
    return column_wronskian(columns, chain.potential, chain.grid, name=f"W[u0..u{upto},psi]")


def _ones(grid: Grid) -> SampledFunction:
    return SampledFunction(grid, np.ones(grid.n_points), np.zeros(grid.n_points), name="W[]")


def _quotient(prev2: Optional[SampledFunction], prev1: SampledFunction) -> SampledFunction:
    if prev2 is None:
        return prev1
    brackets = sign_change_brackets(prev2.values, prev2.grid.x)
    if brackets:
        raise SingularityError(f"Recursion divides by '{prev2.name}', which has zeros", brackets)
    return ratio(prev1, prev2)


def recursion_bracket(prev2: Optional[SampledFunction], prev1: SampledFunction, constant: float) -> SampledFunction:
    """constant + int_{x_min}^x (W_{k-1}/W_{k-2})^2 dt; prev2 None stands for W_{} = 1"""
    q = _quotient(prev2, prev1)
    return cumulative_integral(SampledFunction(prev1.grid, q.values ** 2), constant)


def _level_from_bracket(prev2: Optional[SampledFunction], prev1: SampledFunction,
                        bracket: SampledFunction, name: str) -> SampledFunction:
    if prev2 is None:
        return SampledFunction(prev1.grid, -bracket.values, -prev1.values ** 2, name=name)
    values = -prev2.values * bracket.values
    derivatives = -prev2.require_derivatives("recursion") * bracket.values - prev1.values ** 2 / prev2.values
    return SampledFunction(prev1.grid, values, derivatives, name=name)


def asymptotic_tail(prev2: Optional[SampledFunction], prev1: SampledFunction) -> float:
    """int_{-inf}^{x_min} (W_{k-1}/W_{k-2})^2 estimated from the exponential decay at x_min"""
    q = _quotient(prev2, prev1)
    value = float(q.values[0])
    if value == 0.0 or q.derivatives is None:
        return 0.0
    slope = 2.0 * float(q.derivatives[0]) / value
    if slope <= 0:
        logger.warning(f"Integrand for '{prev1.name}' does not decay towards x_min; tail set to 0")
        return 0.0
    return value * value / slope


def recursive_wronskian(lower: Union["WronskianTower", Sequence[SampledFunction]], constant: float,
                        name: Optional[str] = None) -> SampledFunction:
    """
    Next tower level from the two levels below it

    Args:
        lower: Tower (or list of levels) ending at level n-1; a single level means W_{-1} = 1
        constant: Value of the bracket at x_min
        name: Label for the result

    Returns:
        W_{u0..un} = -W_{n-2} [constant + int_{x_min}^x (W_{n-1}/W_{n-2})^2]
    """
    levels = list(lower.levels if isinstance(lower, WronskianTower) else lower)
    prev1 = levels[-1]
    prev2 = levels[-2] if len(levels) >= 2 else None
    bracket = recursion_bracket(prev2, prev1, constant)
    return _level_from_bracket(prev2, prev1, bracket, name or f"W[u0..u{len(levels)}]")


@dataclass(frozen=True, eq=False)
class WronskianTower:
    """
    Levels W_{u0..uk}, k = 0..n, with the constants used at each recursion step.

    recursion_constants holds, per level 1..n, the constant in the tower's
    convention (None where the level is patched around zeros). anchor_constants
    holds the bracket value at x_min actually used.
    """

    chain: JordanChain
    levels: Tuple[SampledFunction, ...]
    recursion_constants: Tuple[Optional[float], ...]
    anchor_constants: Tuple[Optional[float], ...]
    brackets: Tuple[Optional[SampledFunction], ...]
    sources: Tuple[str, ...]
    convention: str = "asymptotic"

    @property
    def order(self) -> int:
        return len(self.levels) - 1

    @property
    def grid(self) -> Grid:
        return self.levels[0].grid

    def level(self, k: int) -> SampledFunction:
        """Level k, with level -1 the constant function 1"""
        return _ones(self.grid) if k < 0 else self.levels[k]

    def summary(self) -> Dict:
        return {
            "convention": self.convention,
            "sources": list(self.sources),
            "recursion_constants": list(self.recursion_constants),
            "anchor_constants": list(self.anchor_constants),
        }


def _is_auto(entry) -> bool:
    return entry is None or (isinstance(entry, str) and entry.lower() == AUTO)


def align_chain(chain: JordanChain, level: int, target: SampledFunction,
                tolerance: float = ALIGNMENT_TOL) -> Tuple[JordanChain, float]:
    """
    Add b * r (r recessive at x_max) to u_level so that W_{u0..u_level} reproduces target

    W_{u0..u_(level-1), r} is proportional to W_{u0..u_(level-2)}, so b shifts
    the constant of the level. It is fitted over every node where the direct
    determinant is trustworthy.

    Args:
        chain: Jordan chain through u_level at least
        level: Level whose constant is realised
        target: Recursion level carrying the requested constant
        tolerance: Largest relative mismatch accepted after the fit

    Returns:
        Aligned chain (higher levels rebuilt) and the coefficient b
    """
    current, trusted = _direct(chain, level)
    if max_relative_difference(current, target, trusted) < ALIGNMENT_SKIP_TOL:
        return chain, 0.0

    r = recessive_solution(chain.potential, chain.lambda_, chain.grid)
    u0 = chain[0]
    pair = u0.values * r.derivatives - u0.derivatives * r.values
    if abs(pair[0]) < INDEPENDENCE_TOL * np.max(np.abs(u0.values * r.derivatives) + np.abs(u0.derivatives * r.values)):
        raise PreconditionError(
            f"Cannot realise the constant at level {level}: the recessive solution is proportional to u0"
        )
    basis = column_wronskian(_chain_columns(chain, level - 1) + [(r, chain.lambda_, None)],
                             chain.potential, chain.grid)
    scale = np.abs(target.values) + np.abs(current.values)
    weights = np.where(trusted & (scale > 0), 1.0 / np.where(scale > 0, scale, 1.0), 0.0)
    a = basis.values * weights
    y = (target.values - current.values) * weights
    norm = float(a @ a)
    if norm == 0.0:
        raise PreconditionError(f"Cannot realise the constant at level {level}: no usable nodes")
    b = float(a @ y / norm)
    aligned = replace_level(chain, level, chain[level].plus(r, b))
    realised, trusted = _direct(aligned, level)
    mismatch = max_relative_difference(realised, target, trusted)
    if mismatch > tolerance:
        logger.error(f"Aligning u{level} left a relative mismatch of {mismatch:.2e}")
        raise NumericalAccuracyError(
            f"W_{{u0..u{level}}} realises its constant only to {mismatch:.2e} (tolerance {tolerance:.1e})",
            {f"W{level}": mismatch},
        )
    logger.info(f"Aligned u{level} with {b:.6g} x recessive solution (relative mismatch {mismatch:.2e})")
    return aligned, b


def _zero_free_runs(prev2: Optional[SampledFunction], grid: Grid) -> List[Tuple[int, int]]:
    """Inclusive index ranges clear of every zero of prev2 by the patch margin"""
    n = grid.n_points
    if prev2 is None:
        return [(0, n - 1)]
    x = grid.x
    margin = max(PATCH_MARGIN, PATCH_MARGIN_POINTS * grid.h)
    keep = np.ones(n, dtype=bool)
    for a, b in sign_change_brackets(prev2.values, x):
        keep &= (x < a - margin) | (x > b + margin)
    edges = np.flatnonzero(np.diff(np.concatenate(([0], keep.astype(int), [0]))))
    return [(int(i), int(j) - 1) for i, j in zip(edges[::2], edges[1::2]) if j - i >= MIN_RUN_POINTS]


def _anchored_level(prev2: Optional[SampledFunction], prev1: SampledFunction, direct: SampledFunction,
                    trusted: np.ndarray, name: str) -> Tuple[SampledFunction, Optional[SampledFunction], str]:
    """
    Level k from the recursion, anchored on the direct determinant

    On every run where level k-2 is zero-free the bracket -W_k / W_{k-2} is
    integrated from the trusted node where it is smallest in magnitude, so the
    accumulated integral never cancels against the anchor. Nodes outside the
    runs keep the direct values.

    Returns:
        (level, bracket over the whole grid or None, source label)
    """
    grid = prev1.grid
    runs = _zero_free_runs(prev2, grid)
    values = np.array(direct.values)
    derivatives = np.array(direct.require_derivatives("anchored recursion"))
    bracket = None
    for i0, i1 in runs:
        span = slice(i0, i1 + 1)
        below = np.ones(i1 - i0 + 1) if prev2 is None else prev2.values[span]
        below_d = np.zeros(i1 - i0 + 1) if prev2 is None else prev2.require_derivatives("recursion")[span]
        above = prev1.values[span]
        sub = Grid(float(grid.x[i0]), float(grid.x[i1]), i1 - i0 + 1)
        integral = cumulative_integral(SampledFunction(sub, (above / below) ** 2)).values
        estimate = -direct.values[span] / below
        candidates = np.flatnonzero(trusted[span]) if np.any(trusted[span]) else np.arange(i1 - i0 + 1)
        a = candidates[np.argmin(np.abs(estimate[candidates]))]
        bracket = estimate[a] + integral - integral[a]
        values[span] = -below * bracket
        derivatives[span] = -below_d * bracket - above ** 2 / below

    level = SampledFunction(grid, values, derivatives, name=name)
    if runs == [(0, grid.n_points - 1)]:
        return level, SampledFunction(grid, bracket, name=f"bracket {name}"), "recursion"
    return level, None, "patched" if runs else "direct"


def build_tower(chain: JordanChain, constants: Optional[Sequence] = None,
                convention: str = "asymptotic") -> WronskianTower:
    """
    Iterate the recursion from W_{u0} up to level n = len(constants)

    Args:
        chain: Jordan chain built through order n-1 at least
        constants: One entry per level 1..n; a number, or 'auto' for the
            constant implied by the chain (defaults to all 'auto' up to the chain order)
        convention: 'asymptotic' reads numbers as brackets anchored at -infinity,
            'anchor' as the bracket value at x_min

    Returns:
        WronskianTower; the stored chain is aligned to every user constant
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"Unknown constant convention '{convention}', expected one of {CONVENTIONS}")
    constants = list(constants) if constants is not None else [AUTO] * chain.order
    n = len(constants)
    if chain.order < n - 1:
        raise PreconditionError(f"A tower of order {n} needs the chain through u{n - 1}, got u{chain.order}")
    logger.info(f"Building Wronskian tower of order {n} ({convention} constants)")

    levels = [chain[0].renamed("W[u0]")]
    recursion_constants: List[Optional[float]] = []
    anchor_constants: List[Optional[float]] = []
    brackets: List[Optional[SampledFunction]] = []
    sources = ["seed"]

    try:
        for k in range(1, n + 1):
            entry = constants[k - 1]
            prev2 = levels[k - 2] if k >= 2 else None
            prev1 = levels[k - 1]
            name = f"W[u0..u{k}]"

            if not _is_auto(entry):
                zeros = [] if prev2 is None else sign_change_brackets(prev2.values, prev2.grid.x)
                if zeros:
                    raise SingularityError(f"Level {k} with a user constant needs a zero-free level {k - 2}", zeros)
                tail = asymptotic_tail(prev2, prev1) if convention == "asymptotic" else 0.0
                anchor = float(entry) + tail
                bracket = recursion_bracket(prev2, prev1, anchor)
                level = _level_from_bracket(prev2, prev1, bracket, name)
                if chain.order >= k:
                    chain, _ = align_chain(chain, k, level)
                levels.append(level)
                recursion_constants.append(float(entry))
                anchor_constants.append(anchor)
                brackets.append(bracket)
                sources.append("user")
                continue

            if chain.order < k:
                raise PreconditionError(f"Level {k} is '{AUTO}' but the chain stops at u{chain.order}")
            direct, trusted = _direct(chain, k)
            level, bracket, source = _anchored_level(prev2, prev1, direct, trusted, name)
            levels.append(level)
            brackets.append(bracket)
            sources.append(source)
            if bracket is None:
                logger.info(f"Level {k - 2} has zeros; level {k} is {source} around them")
                recursion_constants.append(None)
                anchor_constants.append(None)
                continue
            anchor = float(bracket.values[0])
            tail = asymptotic_tail(prev2, prev1) if convention == "asymptotic" else 0.0
            recursion_constants.append(anchor - tail)
            anchor_constants.append(anchor)
    except Exception as e:
        logger.error(f"Wronskian tower construction failed: {e}")
        raise

    return WronskianTower(chain, tuple(levels), tuple(recursion_constants), tuple(anchor_constants),
                          tuple(brackets), tuple(sources), convention)


def reconcile_tower(tower: WronskianTower) -> Dict[int, float]:
    """Max relative difference between each tower level and the direct determinant, over its trusted nodes"""
    differences = {}
    for k in range(1, min(tower.order, tower.chain.order) + 1):
        direct, trusted = _direct(tower.chain, k)
        differences[k] = max_relative_difference(tower.levels[k], direct, trusted)
    return differences


def bracket_monotonicity(tower: WronskianTower) -> float:
    """Most negative step of any recursion bracket, relative to its size (>= 0 when monotone)"""
    worst = 0.0
    for bracket in tower.brackets:
        if bracket is None:
            continue
        steps = np.diff(bracket.values)
        worst = min(worst, float(steps.min()) / max(float(np.max(np.abs(bracket.values))), np.finfo(float).tiny))
    return worst


def sign_alternation_holds(tower: WronskianTower) -> Optional[bool]:
    """
    For even n: sign(W_n) = sign((-1)^(n/2) u0) wherever every even-level bracket is positive.
    None when n is odd or an even level is not recursion-derived.
    """
    n = tower.order
    if n % 2 or n == 0:
        return None
    even = [tower.brackets[k - 1] for k in range(2, n + 1, 2)]
    if any(b is None for b in even):
        return None
    mask = np.all([b.values > 0 for b in even], axis=0) & (tower.levels[0].values != 0)
    expected = np.sign((-1) ** (n // 2) * tower.levels[0].values[mask])
    return bool(np.all(np.sign(tower.levels[n].values[mask]) == expected))


@dataclass(frozen=True, eq=False)
class ChiLadder:
    """chi_j = W_{u0..uj} / W_{u0..u(j-1)}, chi_0 = u0"""

    tower: WronskianTower
    chis: Tuple[SampledFunction, ...]


def build_ladder(tower: WronskianTower) -> ChiLadder:
    chis = [tower.levels[0].renamed("chi0")]
    for j in range(1, tower.order + 1):
        chis.append(ratio(tower.levels[j], tower.levels[j - 1], name=f"chi{j}"))
    return ChiLadder(tower, tuple(chis))


def factorized_wronskian(ladder: ChiLadder, upto: int) -> SampledFunction:
    """
    Product chi_0 * ... * chi_upto

    Args:
        ladder: Ladder populated through chi_upto
        upto: Last factor

    Returns:
        Product with derivatives by the product rule
    """
    factors = ladder.chis[: upto + 1]
    values = np.prod([f.values for f in factors], axis=0)
    derivatives = None
    if all(f.has_derivatives for f in factors):
        derivatives = np.zeros_like(values)
        for j, f in enumerate(factors):
            others = [g.values for i, g in enumerate(factors) if i != j]
            derivatives += f.derivatives * (np.prod(others, axis=0) if others else 1.0)
    return SampledFunction(ladder.tower.grid, values, derivatives, name=f"prod chi0..chi{upto}")


def wronskian_derivative_check(ladder: ChiLadder, level: int, xi: SampledFunction) -> float:
    """
    Max residual of d/dx W_{chi_j, xi} + chi_j^2, relative to (1 + max chi_j^2)

    Args:
        ladder: Chi ladder
        level: j
        xi: Jordan partner of chi_j in the level-j transformed problem

    Returns:
        Relative max residual over interior points
    """
    chi = ladder.chis[level]
    chi_d = chi.require_derivatives("wronskian_derivative_check")
    xi_d = xi.require_derivatives("wronskian_derivative_check")
    w = chi.values * xi_d - chi_d * xi.values
    residual = np.abs(five_point_derivative(w, chi.grid.h) + chi.values ** 2)[2:-2]
    return float(residual.max() / (1.0 + np.max(chi.values ** 2)))
