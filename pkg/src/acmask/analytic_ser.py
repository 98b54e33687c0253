"""Analytical SER of the heuristic amplitude-coherent detector.

The heuristic detector thresholds ``zeta = sum|r_i|^2 / sum alpha_i^2``, so
its SER follows from the conditional CDF ``F(zeta | E_m)``.  Four engines
compute that CDF:

``numeric``
    One-dimensional quadrature over ``x = sum alpha_i^2`` of the Marcum-Q
    conditional CDF.  Slow but dependable; it is the reference for the rest.
``approach1``
    Gamma-mixture expansion of the density of ``x`` combined with the
    large-argument Bessel expansion of the conditional density, integrated
    over ``zeta`` by quadrature.  Exact (incomplete beta mixture) for ``m = 0``.
``approach2``
    Marcum-Q / Laguerre double series with Kummer-function coefficients.
    The ``zeta < E_m`` series alternates and cancels heavily, so it is summed
    in multiple precision with the working precision chosen from a float
    map of the term magnitudes.
``asymptotic``
    High-SNR closed forms.

Every engine exposes *tail* probabilities rather than only the CDF: the SER
needs ``P(zeta < eta | E_m)`` and ``P(zeta > eta | E_m)`` for thresholds on
either side of ``E_m``, and each of these can be far below double-precision
resolution of ``1 - F``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from scipy import integrate, special, stats

from .channel import MaskConstellation, RicianParams, build_constellation, noise_variance
from .exceptions import ConvergenceError, DomainError, RegimeError
from .specfun import SeriesConfig, ln_bessel_i, ln_kummer_1f1_int, marcum_p, marcum_q

__all__ = [
    "Engine",
    "SerScenario",
    "pdf_x",
    "pdf_zeta_cond",
    "pdf_zeta",
    "pdf_zeta_numeric",
    "cdf_zeta_numeric",
    "cdf_zeta_approach1",
    "cdf_zeta_approach2",
    "cdf_zeta_asymptotic",
    "tail_probability",
    "ser_heuristic",
    "lower_series_identity",
]

log = logging.getLogger(__name__)

#: Relative half-width of the sliver around ``E_m`` where both series diverge.
BRANCH_SLIVER = 1e-9

#: Smallest Bessel argument accepted by the large-argument expansion.
REGIME_MIN_ARG = 10.0
#: Probability mass of ``x`` allowed below the regime boundary.
REGIME_MASS = 1e-3

#: Ceiling on the working precision of the multiple-precision series (digits).
MAX_DIGITS = 4000


class Engine(str, enum.Enum):
    """Conditional-CDF engines accepted by :func:`ser_heuristic`."""

    NUMERIC = "numeric"
    APPROACH1 = "approach1"
    APPROACH2 = "approach2"
    ASYMPTOTIC = "asymptotic"

    @classmethod
    def parse(cls, value) -> "Engine":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "").replace("-", "")
        aliases = {"numeric": cls.NUMERIC, "approach1": cls.APPROACH1, "approachi": cls.APPROACH1,
                   "approach2": cls.APPROACH2, "approachii": cls.APPROACH2,
                   "asymptotic": cls.ASYMPTOTIC, "asymp": cls.ASYMPTOTIC}
        try:
            return aliases[key]
        except KeyError:
            raise DomainError(f"unknown engine {value!r}") from None


@dataclass(frozen=True)
class SerScenario:
    """Operating point for the analytical SER.

    Attributes
    ----------
    c : MaskConstellation
    p : RicianParams
    N : int
        Number of receive antennas.
    sigma_n_sq : float
        Per-dimension noise variance.
    series : SeriesConfig
        Truncation and tolerance settings for the series engines.
    """

    c: MaskConstellation
    p: RicianParams
    N: int
    sigma_n_sq: float
    series: SeriesConfig = field(default_factory=SeriesConfig)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        if not self.sigma_n_sq > 0:
            raise DomainError("sigma_n_sq must be > 0")

    @classmethod
    def from_snr(cls, M: int, N: int, K: float, snr_db: float, *, omega: float = 1.0,
                 phi: float = 0.0, series: SeriesConfig | None = None) -> "SerScenario":
        """Build a scenario from the average SNR ``omega / (2 sigma_n^2)`` in dB."""
        return cls(build_constellation(M), RicianParams(K, omega, phi), int(N),
                   noise_variance(snr_db, omega), series or SeriesConfig())

    @property
    def M(self) -> int:
        return self.c.M

    @property
    def K(self) -> float:
        return self.p.K

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.gamma)

    @property
    def gamma(self) -> float:
        """Average SNR in linear scale, ``omega / (2 sigma_n^2)``."""
        return self.p.omega / (2.0 * self.sigma_n_sq)

    @property
    def lam(self) -> float:
        """Noncentrality ``2KN`` of ``x / sigma_h^2``."""
        return 2.0 * self.p.K * self.N

    @property
    def lam0(self) -> float:
        return 1.0 / (2.0 * self.sigma_n_sq)

    def energy(self, m: int) -> float:
        if not 0 <= m < self.c.M:
            raise IndexError(f"symbol index {m} out of range for M={self.c.M}")
        return float(self.c.energies[m])

    def replace(self, **kw) -> "SerScenario":
        from dataclasses import replace
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def pdf_x(x, sc: SerScenario):
    """Density of ``x = sum_i alpha_i^2``.

    ``x / sigma_h^2`` is noncentral chi-square with ``2N`` degrees of freedom
    and noncentrality ``lambda = 2KN``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise DomainError("x must be >= 0")
    N, s2h, lam = sc.N, sc.p.sigma_h_sq, sc.lam
    with np.errstate(divide="ignore", invalid="ignore"):
        if lam == 0.0:
            logf = ((N - 1) * np.log(xa) - xa / (2 * s2h)
                    - N * math.log(2 * s2h) - math.lgamma(N))
        else:
            logf = (-math.log(2 * s2h) - 0.5 * lam - xa / (2 * s2h)
                    + 0.5 * (N - 1) * np.log(xa / (lam * s2h))
                    + ln_bessel_i(N - 1, np.sqrt(lam * xa / s2h)))
        out = np.exp(logf)
    # x = 0: only the N = 1 density is nonzero there
    at0 = xa == 0
    if np.any(at0):
        out = np.where(at0, math.exp(-0.5 * lam) / (2 * s2h) if N == 1 else 0.0, out)
    return float(out) if out.ndim == 0 else out


def pdf_zeta_cond(zeta, x: float, m: int, sc: SerScenario):
    """Density of ``zeta`` given ``x`` and symbol ``m``.

    For ``m > 0`` the noncentral chi-square form with ``2N`` degrees of freedom;
    for ``m = 0`` the Erlang density with rate ``x / (2 sigma_n^2)``.
    """
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0):
        raise DomainError("zeta must be >= 0")
    if not x > 0:
        raise DomainError("x must be > 0")
    N, s2 = sc.N, sc.sigma_n_sq
    Em = sc.energy(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        if m == 0:
            lam0 = sc.lam0
            logf = (N * math.log(lam0 * x) + (N - 1) * np.log(z) - lam0 * x * z
                    - math.lgamma(N))
        else:
            arg = x * np.sqrt(Em * z) / s2
            logf = (math.log(x / (2 * s2)) + 0.5 * (N - 1) * np.log(z / Em)
                    - x * (z + Em) / (2 * s2) + ln_bessel_i(N - 1, arg))
        out = np.exp(logf)
    if np.any(z == 0):
        if m == 0:
            val = sc.lam0 * x if N == 1 else 0.0
        else:
            val = x / (2 * s2) * math.exp(-x * Em / (2 * s2)) if N == 1 else 0.0
        out = np.where(z == 0, val, out)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Numeric engine
# ---------------------------------------------------------------------------

def _x_quantile(q: float, sc: SerScenario, upper: bool = False) -> float:
    dist = stats.ncx2(2 * sc.N, sc.lam) if sc.lam > 0 else stats.chi2(2 * sc.N)
    v = dist.isf(q) if upper else dist.ppf(q)
    return float(v) * sc.p.sigma_h_sq


def _tail_numeric(zeta: float, m: int, sc: SerScenario, upper: bool) -> float:
    Em = sc.energy(m)
    N, s2 = sc.N, sc.sigma_n_sq
    if zeta <= 0.0:
        return 1.0 if upper else 0.0
    if math.isinf(zeta):
        return 0.0 if upper else 1.0
    cond = marcum_q if upper else marcum_p
    ra, rb = math.sqrt(Em / s2), math.sqrt(zeta / s2)

    def integrand(x):
        if x <= 0.0:
            return 0.0
        sx = math.sqrt(x)
        return cond(N, ra * sx, rb * sx) * pdf_x(x, sc)

    x_hi = _x_quantile(1e-22, sc, upper=True)
    breaks = {_x_quantile(q, sc) for q in (1e-9, 1e-6, 1e-3, 0.1, 0.5, 0.9)}
    # where the conditional probability changes regime: x ~ sigma_n^2 / gap
    gap = (math.sqrt(zeta) - math.sqrt(Em)) ** 2
    if gap > 0:
        breaks.update(c * s2 / gap for c in (0.3, 1.0, 3.0, 10.0, 30.0))
    pts = sorted(b for b in breaks if 0 < b < x_hi)
    edges = [0.0] + pts + [x_hi]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err, *info = integrate.quad(integrand, lo, hi, epsabs=1e-16, epsrel=1e-11,
                                         limit=200, full_output=1)
        if info[0]["last"] >= 200 and err > max(1e-12, 1e-7 * abs(val)):
            raise ConvergenceError(
                f"numeric CDF quadrature did not converge on [{lo:g}, {hi:g}] (err {err:.2e})")
        total += val
    return min(max(total, 0.0), 1.0)


def cdf_zeta_numeric(zeta: float, m: int, sc: SerScenario) -> float:
    """``F(zeta | E_m)`` by adaptive quadrature over ``x``.

    Integrates ``1 - Q_N(sqrt(x E_m) / sigma_n, sqrt(x zeta) / sigma_n)``
    against the density of ``x``.  When ``zeta > E_m`` the complement is
    integrated instead, so both small tails keep full relative precision.
    """
    if zeta < 0:
        raise DomainError("zeta must be >= 0")
    Em = sc.energy(m)
    if zeta > Em:
        return 1.0 - _tail_numeric(zeta, m, sc, upper=True)
    return _tail_numeric(zeta, m, sc, upper=False)


# ---------------------------------------------------------------------------
# Approach I
# ---------------------------------------------------------------------------

def _poisson_weights(sc: SerScenario) -> np.ndarray:
    """Log Poisson(lambda/2) weights of the gamma mixture for ``x``.

    Truncated once the neglected mass is below ``term_rel_tol``; raises if that
    needs more than ``max_terms`` components.
    """
    cfg = sc.series
    half = 0.5 * sc.lam
    if half == 0.0:
        return np.zeros(1)
    tol = cfg.term_rel_tol
    n_need = int(stats.poisson.isf(tol, half)) + 1
    if n_need > cfg.max_terms:
        raise ConvergenceError(
            f"gamma-mixture series needs {n_need} terms (max_terms={cfg.max_terms})")
    l = np.arange(n_need)
    return -half + l * math.log(half) - special.gammaln(l + 1)


def _asym_coeffs(N: int, Q: int) -> list[float]:
    out = [1.0]
    for q in range(1, Q + 1):
        prod = 1.0
        for k in range(1, q + 1):
            prod *= 4 * (N - 1) ** 2 - (2 * k - 1) ** 2
        out.append((-1) ** q * prod / (math.factorial(q) * 8.0**q))
    return out


def _check_regime(zeta: float, m: int, sc: SerScenario) -> None:
    """Refuse when too much of ``x`` sits where the Bessel expansion is poor."""
    Em = sc.energy(m)
    if zeta <= 0:
        raise RegimeError("large-argument expansion is invalid at zeta = 0")
    x_star = REGIME_MIN_ARG * sc.sigma_n_sq / math.sqrt(Em * zeta)
    dist = stats.ncx2(2 * sc.N, sc.lam) if sc.lam > 0 else stats.chi2(2 * sc.N)
    mass = float(dist.cdf(x_star / sc.p.sigma_h_sq))
    if mass > REGIME_MASS:
        raise RegimeError(
            f"P(x < {x_star:.3g}) = {mass:.2e} exceeds {REGIME_MASS:g}; the large-argument "
            "Bessel expansion is not accurate at this operating point")


def _pdf_series_m(zeta: np.ndarray, m: int, sc: SerScenario) -> np.ndarray:
    """Series density of ``zeta`` for ``m > 0`` (no regime check)."""
    N, s2 = sc.N, sc.sigma_n_sq
    Em = sc.energy(m)
    ch = 1.0 / (2.0 * sc.p.sigma_h_sq)
    lnP = _poisson_weights(sc)
    l = np.arange(lnP.size)[None, :]
    z = np.atleast_1d(np.asarray(zeta, dtype=float))[:, None]
    b = np.sqrt(Em * z) / s2
    Cz = (np.sqrt(z) - math.sqrt(Em)) ** 2 / (2 * s2) + ch
    # terms with q > N would integrate a nonintegrable power of zeta at 0
    Q = min(sc.series.asymp_order, N)
    coef = _asym_coeffs(N, Q)
    base = lnP[None, :] + (N + l) * math.log(ch) - special.gammaln(N + l)
    tot = np.zeros(z.shape)
    with np.errstate(divide="ignore"):
        for q in range(Q + 1):
            e = N + l + 0.5 - q
            lt = base + special.gammaln(e) - e * np.log(Cz)
            tot = tot + coef[q] * b ** (-q) * np.exp(lt).sum(axis=1, keepdims=True)
        pref = (z / Em) ** (0.5 * (N - 1)) / (2 * s2 * np.sqrt(2 * np.pi * b))
    out = (pref * tot)[:, 0]
    return np.where(z[:, 0] > 0, out, 0.0)


def _tail_m0_approach1(zeta: float, sc: SerScenario, upper: bool) -> float:
    # Exact: F = sum_l Poisson_l(lambda/2) * I_u(N, N + l), u = lam0 z / (lam0 z + c)
    lnP = _poisson_weights(sc)
    l = np.arange(lnP.size)
    N = sc.N
    c = 1.0 / (2.0 * sc.p.sigma_h_sq)
    a = sc.lam0 * zeta
    u, v = a / (a + c), c / (a + c)
    w = np.exp(lnP)
    if upper:
        return float(np.sum(w * special.betainc(N + l, N, v)))
    return float(np.sum(w * special.betainc(N, N + l, u)))


def _tail_approach1(zeta: float, m: int, sc: SerScenario, upper: bool) -> float:
    if zeta <= 0.0:
        return 1.0 if upper else 0.0
    if m == 0:
        return _tail_m0_approach1(zeta, sc, upper)
    _check_regime(zeta, m, sc)
    Em = sc.energy(m)

    def f(y):
        return 2.0 * y * _pdf_series_m(np.array([y * y]), m, sc)[0]

    ry, re = math.sqrt(zeta), math.sqrt(Em)
    if upper:
        pieces = [(ry, re), (re, np.inf)] if ry < re else [(ry, np.inf)]
    else:
        pieces = [(0.0, ry)] if ry <= re else [(0.0, re), (re, ry)]
    total = 0.0
    for lo, hi in pieces:
        val, err = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-10, limit=400)
        total += val
    return total


def cdf_zeta_approach1(zeta: float, m: int, sc: SerScenario) -> float:
    """``F(zeta | E_m)`` from the gamma-mixture / Bessel-expansion series.

    Raises
    ------
    RegimeError
        When more than ``REGIME_MASS`` of the distribution of ``x`` lies where
        the Bessel argument ``x sqrt(E_m zeta) / sigma_n^2`` is below 10.
    ConvergenceError
        When the mixture needs more than ``series.max_terms`` components.
    """
    if zeta < 0:
        raise DomainError("zeta must be >= 0")
    Em = sc.energy(m)
    if m > 0 and zeta > Em:
        return _clamp(1.0 - _tail_approach1(zeta, m, sc, upper=True))
    return _clamp(_tail_approach1(zeta, m, sc, upper=False))


def pdf_zeta(zeta, m: int, sc: SerScenario):
    """Unconditional density ``f(zeta | E_m)``.

    ``m = 0`` uses the exact gamma-mixture/Erlang form.  ``m > 0`` uses the
    series with the large-argument Bessel expansion; its regime is checked
    once per symbol at the threshold just below ``E_m``.
    """
    z = np.asarray(zeta, dtype=float)
    if np.any(z < 0):
        raise DomainError("zeta must be >= 0")
    if m == 0:
        lnP = _poisson_weights(sc)
        l = np.arange(lnP.size)[None, :]
        N = sc.N
        c = 1.0 / (2.0 * sc.p.sigma_h_sq)
        a = sc.lam0 * np.atleast_1d(z)[:, None]
        u = a / (a + c)
        with np.errstate(divide="ignore"):
            lb = stats.beta.logpdf(u, N, N + l) + math.log(sc.lam0 * c) - 2 * np.log(a + c)
        out = np.exp(lnP[None, :] + lb).sum(axis=1)
    else:
        _check_regime(float(sc.c.thresholds[m - 1]), m, sc)
        out = _pdf_series_m(np.atleast_1d(z), m, sc)
    return float(out[0]) if z.ndim == 0 else out.reshape(z.shape)


def pdf_zeta_numeric(zeta, m: int, sc: SerScenario):
    """Density ``f(zeta | E_m)`` by quadrature of ``f(zeta | x) f(x)`` over ``x``.

    Valid at every operating point; used where the series density is
    outside its regime.
    """
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    if np.any(z < 0):
        raise DomainError("zeta must be >= 0")
    sc.energy(m)
    x_hi = _x_quantile(1e-22, sc, upper=True)
    pts = sorted({_x_quantile(q, sc) for q in (1e-6, 1e-3, 0.1, 0.5, 0.9)})
    out = np.empty(z.size)
    for i, zi in enumerate(z):
        val, _ = integrate.quad(lambda x: pdf_zeta_cond(zi, x, m, sc) * pdf_x(x, sc),
                                0.0, x_hi, points=pts, limit=400, epsabs=0.0, epsrel=1e-10)
        out[i] = val
    out = out.reshape(np.shape(zeta))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Approach II
# ---------------------------------------------------------------------------

def _n_guess(t: float, N: int, tol: float) -> int:
    # the summed terms decay roughly like n^(2N-1) t^n
    n = 8
    lt = math.log(t)
    while (2 * N - 1) * math.log(n + N) + n * lt > math.log(tol) - 4 and n < 100_000:
        n = int(n * 1.25) + 1
    return n


def _lower_series(t: float, kc: float, sc: SerScenario) -> float:
    """``sum_n t^(n+N) sum_k (...)`` series for ``P(zeta < t E)``-type tails.

    ``t`` is ``zeta / E_m`` with ``kc = (1 + K) / E_m`` for the CDF below
    ``E_m``, and ``E_m / zeta`` with ``kc = (1 + K) / zeta`` for the ``1 - B``
    part of the upper tail.  The inner sum alternates and cancels by many
    orders of magnitude, so it is summed in binary multiple precision.  The
    precision is chosen from a float map of the term magnitudes and raised
    until the cancellation left at least 20 significant digits.
    """
    if t <= 0.0:
        return 0.0
    if not t < 1.0:
        raise ConvergenceError(f"series ratio {t} >= 1; the series diverges")
    N, K, gam = sc.N, sc.p.K, sc.gamma
    cfg = sc.series
    T = cfg.max_terms
    w = gam / (gam + kc)
    u = kc / (gam + kc)
    z = N * K * u
    n_hi = min(T, _n_guess(t, N, cfg.term_rel_tol))
    ln_pre = -K * N * w + N * math.log(u * w)
    while True:
        # float log-magnitudes of every (n, k) term
        n = np.arange(n_hi)[:, None]
        k = np.arange(n_hi)[None, :]
        j = n + k
        ln_p = ln_kummer_1f1_int(np.arange(N, 2 * n_hi + 2 * N), N, z) - z
        with np.errstate(invalid="ignore"):
            lnH = j * math.log(w) + special.gammaln(j + 2 * N) + ln_p[np.minimum(j + N, ln_p.size - 1)]
            lnc = (-np.log(N + n) - math.lgamma(N) - special.gammaln(N + k) - special.gammaln(k + 1)
                   - special.gammaln(np.maximum(n - k, 0) + 1))
            lt = np.where(k <= n, lnc + lnH + (n + N) * math.log(t), -np.inf) + ln_pre
        l10_max = float(lt.max()) / math.log(10)
        digits = 30.0 + max(0.0, l10_max)
        for _ in range(6):
            if digits > MAX_DIGITS:
                raise ConvergenceError(
                    f"series cancellation needs {digits:.0f} digits (limit {MAX_DIGITS})")
            res, converged = _lower_series_mp(t, kc, sc, n_hi, int(digits * 3.33) + 32)
            if not converged:
                break
            if res == 0.0:
                digits += 40
                continue
            need = l10_max - math.log10(abs(res)) + 20.0
            if need <= digits:
                return res
            digits = need + 5.0
        else:
            raise ConvergenceError("multiple-precision series did not settle")
        if n_hi >= T:
            raise ConvergenceError(
                f"series did not reach term_rel_tol={cfg.term_rel_tol:g} within "
                f"max_terms={T} (ratio {t:.4f})")
        n_hi = min(T, 2 * n_hi)


def _lower_series_mp(t: float, kc: float, sc: SerScenario, n_hi: int, bits: int):
    N, K = sc.N, sc.p.K
    tol = sc.series.term_rel_tol
    ctx = gmpy2.context(gmpy2.get_context(), precision=bits)
    with ctx:
        mpf = gmpy2.mpfr
        gam = mpf(sc.gamma)
        kc_ = mpf(kc)
        W = gam / (gam + kc_)
        U = kc_ / (gam + kc_)
        Z = N * mpf(K) * U
        J = 2 * n_hi + 1
        # 1F1(a; N; Z) e^{-Z} by forward recurrence in a (the dominant solution)
        P = [mpf(1), 1 + Z / N]
        for a in range(N + 1, N + J + N):
            P.append(((2 * a - N + Z) * P[-1] + (N - a) * P[-2]) / a)
        H = []
        fac = mpf(math.factorial(2 * N - 1))
        wp = mpf(1)
        for j in range(J):
            h = wp * fac * P[j + N]
            H.append(h if j % 2 == 0 else -h)
            wp *= W
            fac *= j + 2 * N
        A = [1 / (mpf(math.factorial(N + k - 1)) * math.factorial(k)) for k in range(n_hi)]
        B = [1 / mpf(math.factorial(i)) for i in range(n_hi)]
        tt = mpf(t)
        tp = tt**N
        S = mpf(0)
        quiet = 0
        denom0 = math.factorial(N - 1)
        converged = False
        for n in range(n_hi):
            inner = gmpy2.fsum([A[k] * B[n - k] * H[n + k] for k in range(n + 1)])
            add = inner * tp / ((N + n) * denom0)
            S += add
            tp *= tt
            quiet = quiet + 1 if abs(add) <= tol * abs(S) else 0
            if quiet >= 3:
                converged = True
                break
        res = gmpy2.exp(-K * N * W) * (U * W) ** N * S
        return float(res), converged


def _c_acute(Em: float, zeta: float, sc: SerScenario) -> float:
    """Positive Bessel-series term of the upper tail (reflection identity part)."""
    N, K, gam = sc.N, sc.p.K, sc.gamma
    T = sc.series.max_terms
    kmz = (1.0 + K) / (Em + zeta)
    w = gam / (gam + kmz)
    u = kmz / (gam + kmz)
    z = N * K * u
    rho = math.sqrt(Em * zeta) / (Em + zeta)
    n = np.arange(T)
    total = 0.0
    tails = []
    for k in range(1 - N, N):
        ak = abs(k)
        p = 2 * n + ak
        lt = (p * math.log(rho * w) + special.gammaln(p + N) - special.gammaln(n + 1)
              - special.gammaln(n + ak + 1) - math.lgamma(N)
              + ln_kummer_1f1_int(p + N, N, z) + 0.5 * k * math.log(Em / zeta))
        terms = np.exp(lt - K * N + N * math.log(u))
        total += math.fsum(terms)
        tails.append(terms[-1])
    if max(tails) > sc.series.term_rel_tol * total:
        raise ConvergenceError(
            f"Bessel-series tail term did not converge within max_terms={T}")
    return total


def _tail_m0_approach2(zeta: float, sc: SerScenario) -> float:
    # P(zeta' > zeta | E_0); each term carries a 1F1 factor from averaging
    # the Rician mixture (it reduces to one when K = 0).
    N, K, gam = sc.N, sc.p.K, sc.gamma
    kz = (1.0 + K) / zeta
    w = gam / (gam + kz)
    u = kz / (gam + kz)
    z = N * K * u
    k = np.arange(N)
    lt = (special.gammaln(N + k) - special.gammaln(k + 1) - math.lgamma(N) + k * math.log(w)
          + ln_kummer_1f1_int(k + N, N, z))
    return float(np.exp(lt - K * N + N * math.log(u)).sum())


def _tail_approach2(zeta: float, m: int, sc: SerScenario, upper: bool) -> float:
    if zeta <= 0.0:
        return 1.0 if upper else 0.0
    K = sc.p.K
    if m == 0:
        tail = _tail_m0_approach2(zeta, sc)
        return tail if upper else 1.0 - tail
    Em = sc.energy(m)
    if zeta <= Em * (1 - BRANCH_SLIVER):
        low = _lower_series(zeta / Em, (1.0 + K) / Em, sc)
        return 1.0 - low if upper else low
    if zeta >= Em * (1 + BRANCH_SLIVER):
        tail = _lower_series(Em / zeta, (1.0 + K) / zeta, sc) + _c_acute(Em, zeta, sc)
        return tail if upper else 1.0 - tail
    log.info("zeta within %g of E_%d; using the numeric engine", BRANCH_SLIVER, m)
    return _tail_numeric(zeta, m, sc, upper)


def cdf_zeta_approach2(zeta: float, m: int, sc: SerScenario) -> float:
    """``F(zeta | E_m)`` from the Marcum-Q / Laguerre series.

    Below ``E_m`` the CDF is the alternating double series; above it the CDF
    is ``B - C``, where ``1 - B`` is the same series with ``zeta`` and ``E_m``
    exchanged and ``C`` is the positive Bessel series from the Marcum
    reflection identity.  Within ``BRANCH_SLIVER`` of ``E_m`` both series
    diverge and the numeric engine is used.

    Raises
    ------
    ConvergenceError
        When a series needs more than ``series.max_terms`` terms.
    """
    if zeta < 0:
        raise DomainError("zeta must be >= 0")
    Em = sc.energy(m)
    if zeta > Em:
        return _clamp(1.0 - _tail_approach2(zeta, m, sc, upper=True))
    return _clamp(_tail_approach2(zeta, m, sc, upper=False))


# ---------------------------------------------------------------------------
# Asymptotic engine
# ---------------------------------------------------------------------------

def _tail_asymptotic(zeta: float, m: int, sc: SerScenario, upper: bool) -> float:
    N, K, gam = sc.N, sc.p.K, sc.gamma
    binom = math.comb(2 * N - 1, N)
    Em = sc.energy(m)
    if zeta <= 0.0:
        return 1.0 if upper else 0.0
    if zeta == Em:
        raise DomainError("asymptotic CDF is singular at zeta = E_m")
    if m == 0:
        kz = (1.0 + K) / zeta
        tail = binom * (kz * math.exp(-K) / (gam + kz)) ** N
        return tail if upper else 1.0 - tail
    if zeta < Em:
        t = zeta / Em
        km = (1.0 + K) / Em
        low = binom * (km * math.exp(-K) / (gam + km) * t / (t - 1.0) ** 2) ** N
        return 1.0 - low if upper else low
    t = Em / zeta
    kz = (1.0 + K) / zeta
    one_minus_b = binom * (kz * math.exp(-K) / (gam + kz) * t / (t - 1.0) ** 2) ** N
    kmz = (1.0 + K) / (Em + zeta)
    rho = math.sqrt(Em * zeta) / (Em + zeta)
    c_sum = 0.0
    for k in range(1 - N, N):
        ak = abs(k)
        c_sum += (t ** (0.5 * k) * math.comb(N + ak - 1, N - 1) * rho**ak
                  * special.hyp2f1(0.5 * (ak + N), 0.5 * (ak + N + 1), ak + 1, 4 * rho * rho))
    c_acute = math.exp(-K * N) * (kmz / (gam + kmz)) ** N * c_sum
    tail = one_minus_b + c_acute
    return tail if upper else 1.0 - tail


def cdf_zeta_asymptotic(zeta: float, m: int, sc: SerScenario) -> float:
    """High-SNR closed form of ``F(zeta | E_m)``.

    Raises ``DomainError`` at ``zeta = E_m`` where the forms are singular.
    """
    if zeta < 0:
        raise DomainError("zeta must be >= 0")
    Em = sc.energy(m)
    if zeta > Em or m == 0:
        return _clamp(1.0 - _tail_asymptotic(zeta, m, sc, upper=True))
    return _clamp(_tail_asymptotic(zeta, m, sc, upper=False))


# ---------------------------------------------------------------------------
# SER assembly
# ---------------------------------------------------------------------------

_TAILS = {
    Engine.NUMERIC: _tail_numeric,
    Engine.APPROACH1: _tail_approach1,
    Engine.APPROACH2: _tail_approach2,
    Engine.ASYMPTOTIC: _tail_asymptotic,
}


def tail_probability(zeta: float, m: int, sc: SerScenario, engine="numeric",
                     upper: bool = False) -> float:
    """``P(zeta' < zeta | E_m)``, or ``P(zeta' > zeta | E_m)`` with ``upper``."""
    return _TAILS[Engine.parse(engine)](float(zeta), m, sc, upper)


def ser_heuristic(sc: SerScenario, engine="numeric", *, fallback: bool = True) -> float:
    """Symbol error rate of the heuristic AC detector.

    ``P_e = (1/M) sum_m [P(zeta < eta_lo | E_m) + P(zeta > eta_up | E_m)]``,
    which equals ``1 - (1/M)[F(eta_01|E_0) + ...]`` but never subtracts two
    nearly equal numbers.  With ``fallback`` a series engine that reports a
    convergence or regime error is replaced by the numeric engine for the
    affected term, and the substitution is logged.
    """
    eng = Engine.parse(engine)
    tail = _TAILS[eng]
    c = sc.c
    parts = []
    for m in range(c.M):
        for upper, eta in ((False, c.lower_threshold(m)), (True, c.upper_threshold(m))):
            if (not upper and m == 0) or (upper and m == c.M - 1):
                continue
            try:
                val = tail(eta, m, sc, upper)
            except (ConvergenceError, RegimeError) as exc:
                if not fallback or eng is Engine.NUMERIC:
                    raise
                log.warning("%s engine failed for m=%d (%s); using numeric", eng.value, m, exc)
                val = _tail_numeric(eta, m, sc, upper)
            parts.append(val)
    return _clamp(math.fsum(parts) / c.M)


def _clamp(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def lower_series_identity(N: int, n: int) -> tuple[int, int]:
    """Both sides of the integer identity behind the high-SNR lower-tail form.

    ``sum_k (-1)^(n+k) C(N+n-1, N+k-1) (n+k+2N-1)! / k!`` and
    ``(n+2N-1)! (n+N)! / (n! N!)``, in exact integer arithmetic.
    """
    if N < 1 or n < 0:
        raise DomainError("need N >= 1 and n >= 0")
    f = math.factorial
    lhs = sum((-1) ** (n + k) * math.comb(N + n - 1, N + k - 1) * (f(n + k + 2 * N - 1) // f(k))
              for k in range(n + 1))
    rhs = f(n + 2 * N - 1) * f(n + N) // (f(n) * f(N))
    return lhs, rhs
