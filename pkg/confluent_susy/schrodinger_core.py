"""
Confluent SUSY Toolkit - Schrödinger Core
Grids, sampled functions, potentials, quadrature, finite differences and RK4
integration of homogeneous / inhomogeneous 1-D Schrödinger equations
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy.integrate import simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.ndimage import maximum_filter1d

from .errors import (
    BlowUpError,
    ConfigError,
    DomainError,
    NumericalAccuracyError,
    PreconditionError,
    SingularityError,
)

logger = logging.getLogger(__name__)

DEFAULT_RESIDUAL_TOL = 1e-6
BLOW_UP_LIMIT = 1e300
ENVELOPE_FRACTION = 0.01
MIN_ENVELOPE_WINDOW = 5

# Per-panel weights of the 4-point (cubic) cumulative rule
CUBIC_EDGE_WEIGHTS = np.array([9.0, 19.0, -5.0, 1.0]) / 24.0
CUBIC_INTERIOR_WEIGHTS = np.array([-1.0, 13.0, 13.0, -1.0]) / 24.0

_TANH_PRIME = Polynomial([1.0, 0.0, -1.0])


@dataclass(frozen=True)
class Grid:
    """Uniform abscissae x_min + i*h, i = 0..n_points-1"""

    x_min: float = -15.0
    x_max: float = 15.0
    n_points: int = 6001

    def __post_init__(self):
        if not float(self.x_min) < float(self.x_max):
            raise ValueError(f"Grid requires x_min < x_max, got [{self.x_min}, {self.x_max}]")
        if int(self.n_points) != self.n_points or self.n_points < 9:
            raise ValueError(f"Grid needs at least 9 points for 5-point stencils, got {self.n_points}")
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.h * np.arange(self.n_points)
        x.setflags(write=False)
        return x

    def covers(self, lower: float, upper: float) -> bool:
        """True when [x_min, x_max] lies inside [lower, upper]"""
        slack = 1e-9 * (self.x_max - self.x_min)
        return lower - slack <= self.x_min and self.x_max <= upper + slack

    def coarsen(self, factor: int = 2) -> "Grid":
        """Grid on the same interval keeping every factor-th node"""
        if (self.n_points - 1) % factor:
            raise ValueError(f"Cannot coarsen {self.n_points} points by {factor}")
        return Grid(self.x_min, self.x_max, (self.n_points - 1) // factor + 1)


def _frozen_array(data, length: int, label: str) -> np.ndarray:
    array = np.array(data, dtype=float)
    if array.shape != (length,):
        raise PreconditionError(f"{label} has shape {array.shape}, expected ({length},)")
    if not np.all(np.isfinite(array)):
        bad = int(np.flatnonzero(~np.isfinite(array))[0])
        raise PreconditionError(f"{label} is not finite at index {bad}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Function values (and optionally first derivatives) on a Grid"""

    grid: Grid
    values: np.ndarray
    derivatives: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        label = self.name or "function"
        object.__setattr__(self, "values", _frozen_array(self.values, self.grid.n_points, f"{label} values"))
        if self.derivatives is not None:
            object.__setattr__(
                self, "derivatives",
                _frozen_array(self.derivatives, self.grid.n_points, f"{label} derivatives"),
            )

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def has_derivatives(self) -> bool:
        return self.derivatives is not None

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def require_derivatives(self, context: str) -> np.ndarray:
        if self.derivatives is None:
            raise PreconditionError(f"{context}: '{self.name or 'function'}' carries no derivative data")
        return self.derivatives

    def scaled(self, factor: float, name: Optional[str] = None) -> "SampledFunction":
        derivatives = None if self.derivatives is None else factor * self.derivatives
        return SampledFunction(self.grid, factor * self.values, derivatives, name or self.name)

    def plus(self, other: "SampledFunction", factor: float = 1.0, name: Optional[str] = None) -> "SampledFunction":
        """self + factor * other"""
        if other.grid != self.grid:
            raise PreconditionError("Cannot combine functions sampled on different grids")
        derivatives = None
        if self.derivatives is not None and other.derivatives is not None:
            derivatives = self.derivatives + factor * other.derivatives
        return SampledFunction(self.grid, self.values + factor * other.values, derivatives, name or self.name)

    def renamed(self, name: str) -> "SampledFunction":
        return SampledFunction(self.grid, self.values, self.derivatives, name)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.grid.x, "value": self.values})


def sech(x) -> np.ndarray:
    """Overflow-free sech"""
    a = np.abs(np.asarray(x, dtype=float))
    e = np.exp(-a)
    return 2.0 * e / (1.0 + e * e)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PoschlTeller:
    """V(x) = -2 sech^2(x); no free parameters"""

    kind: ClassVar[str] = "poschl_teller"
    asymptotic_value: ClassVar[float] = 0.0

    def value(self, x) -> np.ndarray:
        return -2.0 * sech(x) ** 2

    def derivative(self, x, order: int) -> np.ndarray:
        # V = 2t^2 - 2 with t = tanh x and d/dx p(t) = p'(t) (1 - t^2)
        poly = Polynomial([-2.0, 0.0, 2.0])
        for _ in range(order):
            poly = poly.deriv() * _TANH_PRIME
        return poly(np.tanh(np.asarray(x, dtype=float)))

    def check_covers(self, grid: Grid) -> None:
        return None


@dataclass(frozen=True)
class Tabulated:
    """Potential read from a CSV with header x,v; linear interpolation, no extrapolation"""

    path: str
    kind: ClassVar[str] = "tabulated"
    table: pd.DataFrame = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        try:
            table = pd.read_csv(self.path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            logger.error(f"Reading tabulated potential failed: {e}")
            raise ConfigError(f"Cannot read tabulated potential {self.path}: {e}") from e
        if list(table.columns) != ["x", "v"]:
            raise ConfigError(f"{self.path}: expected header 'x,v', got {','.join(map(str, table.columns))}")
        xs = table["x"].to_numpy(dtype=float)
        vs = table["v"].to_numpy(dtype=float)
        if len(xs) < 2 or not np.all(np.isfinite(xs)) or not np.all(np.isfinite(vs)):
            raise ConfigError(f"{self.path}: need at least two finite rows")
        if np.any(np.diff(xs) <= 0):
            raise ConfigError(f"{self.path}: x column must be strictly increasing")
        object.__setattr__(self, "table", table)
        logger.info(f"Loaded tabulated potential with {len(table)} rows on [{xs[0]}, {xs[-1]}]")

    @property
    def xs(self) -> np.ndarray:
        return self.table["x"].to_numpy(dtype=float)

    @property
    def vs(self) -> np.ndarray:
        return self.table["v"].to_numpy(dtype=float)

    @property
    def asymptotic_value(self) -> float:
        vs = self.vs
        return float(min(vs[0], vs[-1]))

    def _slack(self) -> float:
        xs = self.xs
        return 1e-9 * (xs[-1] - xs[0])

    def check_covers(self, grid: Grid) -> None:
        xs = self.xs
        if not grid.covers(xs[0], xs[-1]):
            raise DomainError(
                f"Tabulated potential on [{xs[0]}, {xs[-1]}] does not cover grid [{grid.x_min}, {grid.x_max}]"
            )

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        xs = self.xs
        outside = (x < xs[0] - self._slack()) | (x > xs[-1] + self._slack())
        if np.any(outside):
            raise DomainError(f"x={np.atleast_1d(x)[np.atleast_1d(outside)][0]:.6g} outside [{xs[0]}, {xs[-1]}]")
        return np.interp(x, xs, self.vs)

    def derivative(self, x, order: int) -> np.ndarray:
        values = self.value(x)
        if order == 0:
            return values
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size < 5:
            raise PreconditionError("Tabulated derivatives need a uniform array of at least 5 abscissae")
        h = float(x[1] - x[0])
        for _ in range(order):
            values = five_point_derivative(values, h)
        return values


@dataclass(frozen=True)
class Transformed:
    """Potential given by samples of a transformed V_n, cubic-spline evaluated"""

    sampled: SampledFunction
    kind: ClassVar[str] = "transformed"
    spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "spline", CubicSpline(self.sampled.x, self.sampled.values))

    @classmethod
    def from_result(cls, result) -> "Transformed":
        return cls(result.potential_v_n)

    @property
    def asymptotic_value(self) -> float:
        values = self.sampled.values
        return float(min(values[0], values[-1]))

    def check_covers(self, grid: Grid) -> None:
        if not grid.covers(self.sampled.grid.x_min, self.sampled.grid.x_max):
            raise DomainError("Transformed potential does not cover the requested grid")

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        own = self.sampled.grid
        slack = 1e-9 * (own.x_max - own.x_min)
        if np.any((x < own.x_min - slack) | (x > own.x_max + slack)):
            raise DomainError(f"Evaluation outside transformed potential domain [{own.x_min}, {own.x_max}]")
        return self.spline(x)

    def derivative(self, x, order: int) -> np.ndarray:
        if order <= 3:
            self.value(x)
            return self.spline(np.asarray(x, dtype=float), order)
        values = self.spline(np.asarray(x, dtype=float), 3)
        h = float(np.asarray(x)[1] - np.asarray(x)[0])
        for _ in range(order - 3):
            values = five_point_derivative(values, h)
        return values


PotentialSpec = Union[PoschlTeller, Tabulated, Transformed]


def eval_potential(spec: PotentialSpec, x):
    """
    Evaluate V(x) for any potential variant

    Args:
        spec: Potential specification
        x: Scalar or array of positions

    Returns:
        V(x) as a float for scalar input, otherwise an array
    """
    values = spec.value(x)
    return float(values) if np.ndim(x) == 0 else values


def potential_on_grid(spec: PotentialSpec, grid: Grid) -> SampledFunction:
    spec.check_covers(grid)
    return SampledFunction(grid, spec.value(grid.x), spec.derivative(grid.x, 1), name="V")


def potential_derivatives(spec: PotentialSpec, grid: Grid, max_order: int) -> List[np.ndarray]:
    """[V, V', ..., V^(max_order)] on the grid"""
    spec.check_covers(grid)
    return [spec.value(grid.x)] + [spec.derivative(grid.x, m) for m in range(1, max_order + 1)]


# ---------------------------------------------------------------------------
# Quadrature and finite differences
# ---------------------------------------------------------------------------

def cumulative_integral(f: SampledFunction, constant: float = 0.0, method: str = "cubic") -> SampledFunction:
    """
    Running integral F(x) = constant + int_{x_min}^x f(t) dt

    Args:
        f: Integrand sampled on a grid
        constant: Value of F at x_min
        method: 'cubic' (4-point rule per panel, O(h^4) at every node) or
            'simpson' (composite Simpson with a trapezoid final panel at odd nodes)

    Returns:
        F with derivatives set to the integrand
    """
    y = f.values
    h = f.grid.h
    if method == "cubic":
        steps = np.empty(y.size - 1)
        steps[0] = CUBIC_EDGE_WEIGHTS @ y[:4]
        steps[-1] = CUBIC_EDGE_WEIGHTS @ y[-1:-5:-1]
        steps[1:-1] = np.convolve(y, CUBIC_INTERIOR_WEIGHTS, mode="valid")
        values = np.concatenate(([0.0], np.cumsum(steps * h)))
    elif method == "simpson":
        values = np.empty_like(y)
        values[0] = 0.0
        values[2::2] = np.cumsum((y[:-2:2] + 4.0 * y[1:-1:2] + y[2::2]) * h / 3.0)
        values[1::2] = values[:-1:2] + 0.5 * h * (y[:-1:2] + y[1::2])
    else:
        raise ValueError(f"Unknown quadrature method '{method}'")
    return SampledFunction(f.grid, constant + values, np.array(y), name=f"int({f.name})")


def definite_integral(f: SampledFunction) -> float:
    """Composite Simpson over the whole grid"""
    return float(simpson(f.values, x=f.grid.x))


def five_point_derivative(values: np.ndarray, h: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    d = np.gradient(values, h, edge_order=2)
    d[2:-2] = (values[:-4] - 8.0 * values[1:-3] + 8.0 * values[3:-1] - values[4:]) / (12.0 * h)
    return d


def five_point_second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """5-point central second difference; two edge points per side copy the nearest interior value"""
    values = np.asarray(values, dtype=float)
    d = np.empty_like(values)
    d[2:-2] = (-values[:-4] + 16.0 * values[1:-3] - 30.0 * values[2:-2]
               + 16.0 * values[3:-1] - values[4:]) / (12.0 * h * h)
    d[:2] = d[2]
    d[-2:] = d[-3]
    return d


def schrodinger_residual(
    f: SampledFunction,
    potential,
    energy: float,
    source: Optional[SampledFunction] = None,
    relative: bool = True,
) -> float:
    """
    Interior residual of f'' + (E - V) f + source

    Args:
        f: Candidate solution
        potential: V on the same grid (array or SampledFunction)
        energy: Energy E
        source: Optional inhomogeneity
        relative: Divide by (1 + max|f|)

    Returns:
        Max residual over the interior points
    """
    potential = np.asarray(getattr(potential, "values", potential), dtype=float)
    residual = five_point_second_derivative(f.values, f.grid.h) + (energy - potential) * f.values
    if source is not None:
        residual = residual + source.values
    worst = float(np.max(np.abs(residual[2:-2])))
    return worst / (1.0 + f.max_abs) if relative else worst


def sign_change_brackets(values: np.ndarray, x: np.ndarray) -> List[Tuple[float, float]]:
    """Intervals between adjacent samples where values change sign; exact zeros reported at the node"""
    signs = np.sign(values)
    brackets = [(float(x[i]), float(x[i])) for i in np.flatnonzero(signs == 0)]
    crossings = np.flatnonzero(signs[:-1] * signs[1:] < 0)
    brackets += [(float(x[i]), float(x[i + 1])) for i in crossings]
    return sorted(brackets)


def is_zero_free(f: SampledFunction) -> bool:
    return not sign_change_brackets(f.values, f.grid.x)


def ratio(numerator: SampledFunction, denominator: SampledFunction, name: str = "") -> SampledFunction:
    """numerator / denominator with the quotient rule applied to the derivatives"""
    if np.any(denominator.values == 0.0):
        raise SingularityError(
            f"Denominator '{denominator.name}' vanishes",
            sign_change_brackets(denominator.values, denominator.grid.x),
        )
    values = numerator.values / denominator.values
    derivatives = None
    if numerator.has_derivatives and denominator.has_derivatives:
        derivatives = (numerator.derivatives - values * denominator.derivatives) / denominator.values
    return SampledFunction(numerator.grid, values, derivatives, name)


def second_log_derivative(W: SampledFunction, allow_singular: bool = False) -> SampledFunction:
    """
    d^2/dx^2 log|W| by the 5-point stencil

    Args:
        W: Nonvanishing function (usually a Wronskian)
        allow_singular: Skip the zero check (forced runs); zeros are clipped to the smallest float

    Returns:
        Second log-derivative with edge points copied from the nearest interior value
    """
    brackets = sign_change_brackets(W.values, W.grid.x)
    if brackets and not allow_singular:
        raise SingularityError(f"'{W.name or 'W'}' has zeros on the grid", brackets)
    magnitude = np.abs(W.values)
    if allow_singular:
        magnitude = np.maximum(magnitude, np.finfo(float).tiny)
    values = five_point_second_derivative(np.log(magnitude), W.grid.h)
    return SampledFunction(W.grid, values, name=f"d2log({W.name})")


# ---------------------------------------------------------------------------
# Initial-value integration
# ---------------------------------------------------------------------------

def integrate_ivp(
    spec: PotentialSpec,
    energy: float,
    grid: Grid,
    y0: float,
    dy0: float,
    source: Optional[SampledFunction] = None,
    direction: str = "forward",
    residual_tol: Optional[float] = DEFAULT_RESIDUAL_TOL,
    name: str = "y",
) -> SampledFunction:
    """
    Fixed-step RK4 for y'' + (E - V) y = -source

    Args:
        spec: Potential
        energy: Energy E
        grid: Integration grid
        y0: y at the start node (x_min forward, x_max backward)
        dy0: y' at the start node
        source: Optional right-hand side term sampled on the grid
        direction: 'forward' sweeps left to right, 'backward' right to left
        residual_tol: Relative interior residual bound checked afterwards; None skips the check
        name: Label for the result

    Returns:
        y with derivatives populated
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"Unknown sweep direction '{direction}'")
    if source is not None and source.grid != grid:
        raise PreconditionError("Source must be sampled on the integration grid")
    spec.check_covers(grid)

    x = grid.x
    h = grid.h
    n = grid.n_points
    q_nodes = (spec.value(x) - energy).tolist()
    q_mid = (spec.value(x[:-1] + 0.5 * h) - energy).tolist()
    if source is None:
        s_nodes = [0.0] * n
        s_mid = [0.0] * (n - 1)
    else:
        if source.has_derivatives:
            interpolant = CubicHermiteSpline(x, source.values, source.derivatives)
        else:
            interpolant = CubicSpline(x, source.values)
        s_nodes = source.values.tolist()
        s_mid = interpolant(x[:-1] + 0.5 * h).tolist()

    y = np.empty(n)
    p = np.empty(n)
    if direction == "forward":
        start, dt, indices = 0, h, range(n - 1)
    else:
        start, dt, indices = n - 1, -h, range(n - 1, 0, -1)
    yc, pc = float(y0), float(dy0)
    y[start], p[start] = yc, pc
    half = 0.5 * dt

    for i in indices:
        j = i + 1 if dt > 0 else i - 1
        m = min(i, j)
        qi, qm, qj = q_nodes[i], q_mid[m], q_nodes[j]
        si, sm, sj = s_nodes[i], s_mid[m], s_nodes[j]
        k1y, k1p = pc, qi * yc - si
        k2y = pc + half * k1p
        k2p = qm * (yc + half * k1y) - sm
        k3y = pc + half * k2p
        k3p = qm * (yc + half * k2y) - sm
        k4y = pc + dt * k3p
        k4p = qj * (yc + dt * k3y) - sj
        yc += dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        pc += dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if not abs(yc) <= BLOW_UP_LIMIT:
            logger.error(f"IVP integration failed at x={x[j]:.6g}")
            raise BlowUpError(float(x[j]), abs(yc))
        y[j], p[j] = yc, pc

    result = SampledFunction(grid, y, p, name=name)
    if residual_tol is not None:
        residual = schrodinger_residual(result, np.asarray(q_nodes) + energy, energy, source)
        if residual > residual_tol:
            raise NumericalAccuracyError(
                f"IVP residual {residual:.3e} for '{name}' exceeds {residual_tol:.1e}",
                {name: residual},
            )
    logger.debug(f"Integrated '{name}' {direction} at E={energy:.6g} over {n} points")
    return result


def local_envelope(values: np.ndarray, window: Optional[int] = None) -> np.ndarray:
    """Running max of |values| over `window` points (about 1% of the samples by default)"""
    magnitude = np.abs(np.asarray(getattr(values, "values", values), dtype=float))
    if window is None:
        window = max(MIN_ENVELOPE_WINDOW, int(ENVELOPE_FRACTION * magnitude.size))
    return maximum_filter1d(magnitude, size=int(window) | 1, mode="nearest")


def max_relative_difference(candidate: np.ndarray, reference: np.ndarray,
                            mask: Optional[np.ndarray] = None, window: Optional[int] = None) -> float:
    """
    Max |candidate - reference| relative to the local envelope of |reference|

    Every point of the grid counts, so functions spanning many decades are
    compared at both ends; near a simple zero of the reference the envelope
    stays finite.

    Args:
        candidate: SampledFunction or array
        reference: SampledFunction or array on the same grid
        mask: Optional boolean selection of the points to compare
        window: Envelope width in points

    Returns:
        Largest relative difference (0 when no point is compared)
    """
    candidate = np.asarray(getattr(candidate, "values", candidate), dtype=float)
    reference = np.asarray(getattr(reference, "values", reference), dtype=float)
    envelope = local_envelope(reference, window)
    select = envelope > 0
    if mask is not None:
        select &= np.asarray(mask, dtype=bool)
    if not np.any(select):
        return 0.0
    return float(np.max(np.abs(candidate[select] - reference[select]) / envelope[select]))


def max_norm_difference(candidate: np.ndarray, reference: np.ndarray) -> float:
    """Max |candidate - reference| / max |reference|"""
    candidate = np.asarray(getattr(candidate, "values", candidate), dtype=float)
    reference = np.asarray(getattr(reference, "values", reference), dtype=float)
    peak = np.max(np.abs(reference))
    if peak == 0.0:
        return float(np.max(np.abs(candidate)))
    return float(np.max(np.abs(candidate - reference)) / peak)
