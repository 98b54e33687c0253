"""Special functions and quadrature kernels.

Everything here is a pure function of its arguments.  The modified Bessel
function is evaluated in the log domain so that detector metrics stay finite
at high SNR; the Marcum Q-function uses the Poisson mixture of regularized
incomplete gamma functions with the small tail chosen by ``b`` versus ``a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .exceptions import ConvergenceError, DomainError

__all__ = [
    "QuadratureRule",
    "SeriesConfig",
    "chebyshev_rule",
    "gauss_chebyshev",
    "ln_bessel_i",
    "bessel_i_asymptotic",
    "marcum_q",
    "marcum_p",
    "kummer_1f1",
    "ln_kummer_1f1_int",
    "laguerre_generalized",
    "BESSEL_SWITCH",
]

#: Argument above which ``ln_bessel_i`` uses the large-argument expansion.
BESSEL_SWITCH = 50.0


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Chebyshev (first kind) rule of order ``order``.

    Node ``l`` (1-based) is ``cos(pi (2l - 1) / (2L))`` and every weight is
    ``pi / L``.
    """

    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.order < 1:
            raise DomainError(f"quadrature order must be positive, got {self.order}")
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def angles(self) -> np.ndarray:
        """Node angles ``pi (2l - 1) / (2L)`` such that ``nodes = cos(angles)``."""
        l = np.arange(1, self.order + 1)
        return np.pi * (2 * l - 1) / (2 * self.order)


def chebyshev_rule(order: int = 64) -> QuadratureRule:
    """Build the order-``order`` Gauss-Chebyshev rule."""
    if order < 1:
        raise DomainError(f"quadrature order must be positive, got {order}")
    l = np.arange(1, order + 1)
    nodes = np.cos(np.pi * (2 * l - 1) / (2 * order))
    weights = np.full(order, np.pi / order)
    return QuadratureRule(order, nodes, weights)


@dataclass(frozen=True)
class SeriesConfig:
    """Truncation controls shared by the series engines.

    ``max_terms`` caps every infinite sum; ``term_rel_tol`` is the early-exit
    tolerance on the ratio of the latest term to the running sum.
    ``asymp_order`` is the number of correction terms kept in the
    large-argument Bessel expansion and ``quad_order`` the Gauss-Chebyshev
    order used by the detectors.
    """

    max_terms: int = 20
    term_rel_tol: float = 1e-12
    asymp_order: int = 2
    quad_order: int = 64

    def __post_init__(self):
        if self.max_terms < 1:
            raise DomainError("max_terms must be >= 1")
        if not self.term_rel_tol > 0:
            raise DomainError("term_rel_tol must be strictly positive")
        if self.asymp_order < 1:
            raise DomainError("asymp_order must be >= 1")
        if self.quad_order < 1:
            raise DomainError("quad_order must be >= 1")


def gauss_chebyshev(rule: QuadratureRule, integrand: Callable) -> float:
    r"""Approximate :math:`\int_{-1}^{1} f(y) / \sqrt{1-y^2}\,dy`.

    ``integrand`` is called once with the full node array and must be
    vectorized.
    """
    values = np.asarray(integrand(rule.nodes), dtype=float)
    return float(np.pi / rule.order * values.sum())


# ---------------------------------------------------------------------------
# Modified Bessel function of the first kind
# ---------------------------------------------------------------------------

def _ln_bessel_series(v: int, z: np.ndarray) -> np.ndarray:
    # ln I_v(z) = v ln(z/2) - ln v! + ln sum_k t_k / t_0
    q = 0.25 * z * z
    term = np.ones_like(z)
    total = np.ones_like(z)
    k = 0
    while True:
        k += 1
        term = term * q / (k * (k + v))
        total = total + term
        if np.all(term <= 1e-17 * total) or k > 1000:
            break
    if v == 0:
        return np.log(total)
    with np.errstate(divide="ignore"):
        return v * np.log(0.5 * z) - math.lgamma(v + 1) + np.log(total)


def _ln_bessel_asymptotic(v: int, z: np.ndarray) -> np.ndarray:
    mu = 4.0 * v * v
    term = np.ones_like(z)
    total = np.ones_like(z)
    prev = np.full_like(z, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for q in range(1, 80):
        term = -term * (mu - (2 * q - 1) ** 2) / (8.0 * q * z)
        size = np.abs(term)
        # stop each entry once terms fall below eps or start to grow
        active &= (size < prev) & (size > 1e-17 * np.abs(total))
        if not active.any():
            break
        total = np.where(active, total + term, total)
        prev = size
    return z - 0.5 * np.log(2 * np.pi * z) + np.log(total)


def ln_bessel_i(order, z):
    """Natural log of the modified Bessel function ``I_order(z)``.

    Parameters
    ----------
    order : int
        Nonnegative integer order.
    z : float or array_like
        Nonnegative argument.  Arrays are evaluated elementwise.

    Returns
    -------
    float or ndarray
        ``ln I_order(z)``; ``-inf`` where ``I_order(z) = 0`` (``z = 0`` and
        ``order > 0``).  Power series for ``z <= 50``, large-argument
        expansion above, so the result stays finite for huge ``z``.
    """
    v = int(order)
    if v < 0 or v != order:
        raise DomainError(f"order must be a nonnegative integer, got {order}")
    zarr = np.asarray(z, dtype=float)
    if np.any(zarr < 0) or np.any(np.isnan(zarr)):
        raise DomainError("ln_bessel_i requires z >= 0")
    flat = np.atleast_1d(zarr).ravel()
    out = np.empty_like(flat)
    small = flat <= BESSEL_SWITCH
    if small.any():
        out[small] = _ln_bessel_series(v, flat[small])
    if (~small).any():
        out[~small] = _ln_bessel_asymptotic(v, flat[~small])
    if zarr.ndim == 0:
        return float(out[0])
    return out.reshape(zarr.shape)


def bessel_i_asymptotic(order: int, z: float, terms: int = 2) -> float:
    """Truncated large-argument expansion of ``I_order(z)``.

    Returns ``exp(z)/sqrt(2 pi z) * (1 + sum_{q=1}^{terms} (-1)^q
    prod_{k=1}^q [4 order^2 - (2k-1)^2] / (q! 8^q z^q))``.  Only valid for
    ``z >= 10``.
    """
    if z < 10:
        raise DomainError(f"asymptotic Bessel expansion needs z >= 10, got {z}")
    if terms < 1:
        raise DomainError("terms must be >= 1")
    mu = 4.0 * order * order
    term = 1.0
    total = 1.0
    for q in range(1, terms + 1):
        term *= -(mu - (2 * q - 1) ** 2) / (8.0 * q * z)
        total += term
    return math.exp(z) / math.sqrt(2 * math.pi * z) * total


# ---------------------------------------------------------------------------
# Marcum Q
# ---------------------------------------------------------------------------

def marcum_q(order: int, a, b):
    """Generalized Marcum Q-function ``Q_order(a, b)``.

    Computed as the Poisson(a^2/2) mixture of regularized upper incomplete
    gamma functions ``Q(order + k, b^2/2)``.  When ``b > a`` the upper tail is
    summed directly; otherwise ``1 - sum P(order + k, b^2/2)`` is used, so the
    small quantity is always the one accumulated.  Only the window of ``k``
    carrying Poisson mass is visited.
    """
    return _marcum_vec(order, a, b, upper=True)


def marcum_p(order: int, a, b):
    """Complement ``1 - Q_order(a, b)``, accurate when it is tiny.

    This is the noncentral chi-square CDF; subtracting ``marcum_q`` from one
    would lose all relative precision deep in the lower tail.
    """
    return _marcum_vec(order, a, b, upper=False)


def _marcum_vec(order, a, b, upper):
    n = int(order)
    if n < 1 or n != order:
        raise DomainError(f"Marcum Q order must be a positive integer, got {order}")
    a_arr, b_arr = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    if np.any(a_arr < 0) or np.any(b_arr < 0):
        raise DomainError("marcum_q requires a, b >= 0")
    flat_a = np.atleast_1d(a_arr).ravel()
    flat_b = np.atleast_1d(b_arr).ravel()
    out = np.empty(flat_a.shape)
    for i, (ai, bi) in enumerate(zip(flat_a, flat_b)):
        out[i] = _marcum_scalar(n, float(ai), float(bi), upper)
    if a_arr.ndim == 0:
        return float(out[0])
    return out.reshape(a_arr.shape)


def _marcum_scalar(n: int, a: float, b: float, upper: bool = True) -> float:
    if b == 0.0:
        return 1.0 if upper else 0.0
    lam = 0.5 * a * a
    y = 0.5 * b * b
    if lam == 0.0:
        return float(special.gammaincc(n, y) if upper else special.gammainc(n, y))
    spread = 12.0 * math.sqrt(lam) + 40.0
    k = np.arange(max(0, int(lam - spread)), int(lam + spread) + 1, dtype=float)
    log_pois = k * math.log(lam) - lam - special.gammaln(k + 1)
    weights = np.exp(log_pois)
    if b > a:
        tail = math.fsum(weights * special.gammaincc(n + k, y))
        return float(tail if upper else 1.0 - tail)
    tail = math.fsum(weights * special.gammainc(n + k, y))
    return float(1.0 - tail if upper else tail)


# ---------------------------------------------------------------------------
# Confluent hypergeometric and Laguerre
# ---------------------------------------------------------------------------

def kummer_1f1(a: float, b: float, z: float, *, rel_tol: float = 1e-15,
               max_iter: int = 10_000) -> float:
    """Kummer's function ``1F1(a; b; z)`` by direct summation.

    Terms ``(a)_n z^n / ((b)_n n!)`` are accumulated until the latest term
    is below ``rel_tol`` times the running sum.  For ``z < 0`` the series
    alternates, so ``e^z 1F1(b - a; b; -z)`` is summed instead.
    """
    if b <= 0 and float(b).is_integer():
        raise DomainError(f"1F1 undefined for nonpositive integer b={b}")
    if z < 0 and not (a <= 0 and float(a).is_integer()):
        # Kummer's transformation avoids the alternating series
        return math.exp(z) * kummer_1f1(b - a, b, -z, rel_tol=rel_tol, max_iter=max_iter)
    term = 1.0
    total = 1.0
    comp = 0.0
    for n in range(max_iter):
        term *= (a + n) * z / ((b + n) * (n + 1))
        # Kahan summation; the series alternates for z < 0
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        if term == 0.0 or abs(term) <= rel_tol * abs(total):
            return total
    raise ConvergenceError(f"1F1({a}; {b}; {z}) did not converge in {max_iter} terms")


def ln_kummer_1f1_int(a, b: int, z: float):
    """``ln 1F1(a; b; z)`` for integer ``a >= b >= 1`` and ``z >= 0``.

    Kummer's transformation turns the function into ``exp(z)`` times a
    polynomial with positive coefficients,
    ``1F1(a; b; z) = e^z sum_{j=0}^{a-b} C(a-b, j) z^j / (b)_j``,
    which is summed exactly in the log domain.  ``a`` may be an array.
    """
    a_arr = np.atleast_1d(np.asarray(a, dtype=np.int64))
    if np.any(a_arr < b) or b < 1:
        raise DomainError("ln_kummer_1f1_int needs integer a >= b >= 1")
    if z < 0:
        raise DomainError("ln_kummer_1f1_int needs z >= 0")
    p_max = int(a_arr.max()) - b
    if z == 0.0:
        out = np.zeros(a_arr.shape)
    else:
        j = np.arange(p_max + 1, dtype=float)
        # ln[z^j / ((b)_j j!)] without the binomial's p! / (p-j)!
        base = j * math.log(z) - (special.gammaln(b + j) - math.lgamma(b)) - special.gammaln(j + 1)
        out = np.empty(a_arr.shape)
        for idx, ai in enumerate(a_arr):
            p = int(ai) - b
            jj = j[: p + 1]
            logs = base[: p + 1] + special.gammaln(p + 1) - special.gammaln(p - jj + 1)
            out[idx] = z + special.logsumexp(logs)
    if np.ndim(a) == 0:
        return float(out[0])
    return out


def laguerre_generalized(n: int, alpha: float, x: float) -> float:
    """Generalized Laguerre polynomial ``L_n^(alpha)(x)`` by its explicit sum.

    ``sum_{k=0}^{n} Gamma(n+alpha+1) / (Gamma(k+alpha+1) Gamma(n-k+1))
    (-x)^k / k!``.
    """
    if n < 0 or int(n) != n:
        raise DomainError(f"degree must be a nonnegative integer, got {n}")
    n = int(n)
    terms = [special.binom(n + alpha, n - k) * (-x) ** k / math.factorial(k)
             for k in range(n + 1)]
    return math.fsum(terms)
