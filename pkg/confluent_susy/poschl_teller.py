"""
Confluent SUSY Toolkit - Pöschl-Teller Closed Forms
Exact evaluators for V0 = -2 sech^2 x, its bound state, the Jordan chain
u0..u3, the transformation Wronskians and the transformed eigenfunctions
of the fourth- and fifth-order partners
"""

import logging
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from .errors import UnsupportedError
from .schrodinger_core import Grid, SampledFunction, sech

logger = logging.getLogger(__name__)

MAX_CLOSED_FORM_LEVEL = 3


@dataclass(frozen=True)
class PTParams:
    """kappa = sqrt(-lambda) plus the fourth- and fifth-order integration constants"""

    kappa: float
    c_a: float = 0.0
    c_b: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.kappa) or self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def lambda_(self) -> float:
        return -self.kappa ** 2

    @classmethod
    def from_lambda(cls, lambda_: float, c_a: float = 0.0, c_b: float = 0.0) -> "PTParams":
        if lambda_ >= 0:
            raise ValueError(f"Pöschl-Teller closed forms need lambda < 0, got {lambda_}")
        return cls(float(np.sqrt(-lambda_)), c_a, c_b)


def _out(x, values):
    return float(values) if np.ndim(x) == 0 else values


def _exp_scaled(log_scale, mantissa) -> np.ndarray:
    """mantissa * exp(log_scale), combined in log space"""
    mantissa = np.asarray(mantissa, dtype=float)
    with np.errstate(divide="ignore"):
        log_magnitude = log_scale + np.log(np.abs(mantissa))
    return np.sign(mantissa) * np.exp(log_magnitude)


def _exp_sum(a, b, s) -> Tuple[np.ndarray, np.ndarray]:
    """a + exp(s) b written as exp(shift) * mantissa with shift = max(s, 0)"""
    s = np.asarray(s, dtype=float)
    shift = np.maximum(s, 0.0)
    return a * np.exp(-shift) + b * np.exp(s - shift), shift


def pt_v0(x):
    """V0(x) = -2 / cosh^2(x)"""
    return _out(x, -2.0 * sech(x) ** 2)


def pt_psi(x):
    """Normalized bound state 1 / (sqrt(2) cosh x) at E = -1"""
    return _out(x, sech(x) / np.sqrt(2.0))


def pt_psi_prime(x):
    return _out(x, -sech(x) * np.tanh(x) / np.sqrt(2.0))


def _one_minus_tanh(x) -> np.ndarray:
    """1 - tanh x without cancellation for large positive x"""
    x = np.asarray(x, dtype=float)
    e = np.exp(-2.0 * np.abs(x))
    return np.where(x > 0, 2.0 * e, 2.0) / (1.0 + e)


def _binomial_bracket(m: int, k: float, x) -> np.ndarray:
    """
    a_m - b_m tanh x with a_m, b_m the even and odd parts of (k + 1)^m

    Written as ((k + 1)^m (1 - tanh x) + (k - 1)^m (1 + tanh x)) / 2 so that
    the bracket keeps full relative precision as tanh x -> 1, where it
    reduces to (k - 1)^m and vanishes for kappa = 1.
    """
    return 0.5 * ((k + 1) ** m * _one_minus_tanh(x) + (k - 1) ** m * _one_minus_tanh(-x))


def _chain_terms(j: int, kappa: float) -> Tuple[float, Polynomial, Polynomial]:
    """u_j = c exp(kappa x) [P(x) + Q(x) tanh x]"""
    k = kappa
    if j == 0:
        c, p, q = np.sqrt(2 * k), [-k], [1.0]
    elif j == 1:
        c, p, q = -1.0 / np.sqrt(2 * k ** 3), [0.0, k ** 2], [1.0, -k]
    elif j == 2:
        c, p, q = 1.0 / (4 * np.sqrt(2 * k ** 7)), [0.0, k ** 2, -k ** 3], [3.0, -3 * k, k ** 2]
    elif j == 3:
        c = 1.0 / (24 * np.sqrt(2 * k ** 11))
        p, q = [0.0, -3 * k ** 2, 3 * k ** 3, -k ** 4], [-15.0, 15 * k, -6 * k ** 2, k ** 3]
    else:
        raise UnsupportedError(f"Closed-form transformation functions exist up to u3, not u{j}")
    # odd levels carry an extra sign so that u_j'' + (lambda - V0) u_j = -u_{j-1}
    return (-1) ** j * c, Polynomial(p), Polynomial(q)


def pt_u(j: int, params: PTParams, x):
    """
    Closed-form Jordan-chain function u_j, j = 0..3

    Args:
        j: Chain level
        params: Pöschl-Teller parameters
        x: Scalar or array of positions

    Returns:
        u_j(x)
    """
    c, p, q = _chain_terms(j, params.kappa)
    xa = np.asarray(x, dtype=float)
    # P + Q tanh = (P + Q) - Q (1 - tanh)
    mantissa = c * ((p + q)(xa) - q(xa) * _one_minus_tanh(xa))
    return _out(x, _exp_scaled(params.kappa * xa, mantissa))


def pt_u_prime(j: int, params: PTParams, x):
    c, p, q = _chain_terms(j, params.kappa)
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    lower, upper = _one_minus_tanh(xa), _one_minus_tanh(-xa)
    slope = k * q + q.deriv()
    lead = k * p + p.deriv() + slope
    bracket = lead(xa) - slope(xa) * lower + q(xa) * lower * upper
    return _out(x, _exp_scaled(k * xa, c * bracket))


def pt_w01(params: PTParams, x):
    """W_{u0,u1} = -exp(2 kappa x) (1 + kappa^2 - 2 kappa tanh x)"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    return _out(x, _exp_scaled(2 * k * xa, -_binomial_bracket(2, k, xa)))


def pt_w012(params: PTParams, x):
    """W_{u0,u1,u2}"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    return _out(x, _exp_scaled(3 * k * xa, _binomial_bracket(3, k, xa) / (2 * np.sqrt(2 * k ** 3))))


def pt_w4_ca0(params: PTParams, x):
    """W_{u0,u1,u2,u3} computed from the closed-form chain (C_a = 0)"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    return _out(x, _exp_scaled(4 * k * xa, _binomial_bracket(4, k, xa) / (16 * k ** 4)))


def pt_w4(params: PTParams, x):
    """Fourth-order transformation Wronskian with constant C_a"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    mantissa, shift = _exp_sum(params.c_a * _binomial_bracket(2, k, xa),
                               _binomial_bracket(4, k, xa) / (16 * k ** 4), 2 * k * xa)
    return _out(x, _exp_scaled(2 * k * xa + shift, mantissa))


def pt_w5(params: PTParams, x):
    """Fifth-order transformation Wronskian W_{u0..u4} with constant C_b"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    mantissa, shift = _exp_sum(params.c_b * _binomial_bracket(3, k, xa),
                               _binomial_bracket(5, k, xa) / (64 * k ** 6), 2 * k * xa)
    return _out(x, _exp_scaled(3 * k * xa + shift, -mantissa / (2 * np.sqrt(2 * k ** 3))))


def pt_phi4(params: PTParams, x):
    """Transformed bound state at E = -1 for the fourth-order partner V4"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    s = 2 * k * xa
    c = 16 * params.c_a * k ** 4
    num, shift_num = _exp_sum(c, -(k ** 2 - 1), s)
    den, shift_den = _exp_sum(c * _binomial_bracket(2, k, xa), _binomial_bracket(4, k, xa), s)
    values = (k ** 2 - 1) ** 2 * sech(xa) * num / (np.sqrt(2.0) * den) * np.exp(shift_num - shift_den)
    return _out(x, values)


def pt_chi4perp(params: PTParams, x):
    """chi_4^perp = W_{u0,u1,u2} / W_{u0..u3}, eigenfunction at lambda"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    den, shift = _exp_sum(params.c_a * _binomial_bracket(2, k, xa),
                          _binomial_bracket(4, k, xa) / (16 * k ** 4), 2 * k * xa)
    g = _binomial_bracket(3, k, xa)
    return _out(x, _exp_scaled(k * xa - shift, g / (2 * np.sqrt(2 * k ** 3) * den)))


def pt_phi5(params: PTParams, x):
    """Transformed state at E = -1 for the fifth-order partner V5"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    s = 2 * k * xa
    c = 64 * params.c_b * k ** 6
    num, shift_num = _exp_sum(-c, k ** 2 - 1, s)
    den, shift_den = _exp_sum(c * _binomial_bracket(3, k, xa), _binomial_bracket(5, k, xa), s)
    values = (k ** 2 - 1) ** 3 * sech(xa) * num / (np.sqrt(2.0) * den) * np.exp(shift_num - shift_den)
    return _out(x, values)


def pt_chi5perp(params: PTParams, x):
    """chi_5^perp = W_{u0..u3} / W_{u0..u4}, ground state at lambda"""
    k = params.kappa
    xa = np.asarray(x, dtype=float)
    den, shift = _exp_sum(64 * params.c_b * k ** 6 * _binomial_bracket(3, k, xa),
                          _binomial_bracket(5, k, xa), 2 * k * xa)
    return _out(x, _exp_scaled(k * xa - shift, -8 * np.sqrt(2 * k ** 7) * _binomial_bracket(4, k, xa) / den))


def sample(func: Callable, grid: Grid, name: str, derivative: Callable = None) -> SampledFunction:
    """Evaluate a closed form (and optionally its derivative) on a grid"""
    derivatives = None if derivative is None else derivative(grid.x)
    return SampledFunction(grid, func(grid.x), derivatives, name=name)


def pt_psi_sampled(grid: Grid) -> SampledFunction:
    return sample(pt_psi, grid, "psi", pt_psi_prime)


def pt_u_sampled(j: int, params: PTParams, grid: Grid) -> SampledFunction:
    return sample(lambda x: pt_u(j, params, x), grid, f"u{j}", lambda x: pt_u_prime(j, params, x))
