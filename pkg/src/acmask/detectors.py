"""Symbol detectors for MASK over Rician fading.

All detectors are vectorized: ``r`` and the per-antenna side information
have shape ``(..., N)`` and the decision has the leading shape ``(...)``.
Per-hypothesis metrics are formed as an array ``(..., M)`` and the decision
is its ``argmin``, which resolves exact ties to the lowest symbol index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .channel import ChannelRealization, MaskConstellation, RicianParams
from .exceptions import DegenerateChannelError, DomainError
from .specfun import QuadratureRule, chebyshev_rule, ln_bessel_i

__all__ = [
    "DetectorKind",
    "DecisionStatistic",
    "heuristic_statistic",
    "detect_coherent",
    "detect_noncoherent",
    "i_theta_gc",
    "detect_ac_near_optimum",
    "detect_ac_suboptimum_bessel",
    "detect_ac_suboptimum_quad",
    "detect_ac_heuristic",
    "detect",
    "apply_phase_noise",
    "phase_noise_variance",
    "von_mises_concentration",
    "DEGENERATE_ENERGY",
]

#: Combined envelope energy below which the heuristic statistic is undefined.
DEGENERATE_ENERGY = 1e-30

#: Phase variance represented by one unit of phase-noise level (rad^2).
PHASE_LEVEL_UNIT = (math.pi / 18.0) ** 2


class DetectorKind(str, enum.Enum):
    """The six detectors and the side information each one needs."""

    COHERENT = "coherent"
    NONCOHERENT = "noncoherent"
    AC_NEAR_OPTIMUM = "ac_near_optimum"
    AC_SUBOPT_BESSEL = "ac_subopt_bessel"
    AC_SUBOPT_QUAD = "ac_subopt_quad"
    AC_HEURISTIC = "ac_heuristic"

    @property
    def side_information(self) -> tuple[str, ...]:
        return _SIDE_INFO[self]

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, value) -> "DetectorKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for kind in cls:
            if key in (kind.value, kind.name.lower(), _LABELS[kind].lower().replace("-", "_")):
                return kind
        aliases = {"coh": cls.COHERENT, "nc": cls.NONCOHERENT, "acno": cls.AC_NEAR_OPTIMUM,
                   "acso": cls.AC_SUBOPT_BESSEL, "acsoq": cls.AC_SUBOPT_QUAD,
                   "ach": cls.AC_HEURISTIC, "heuristic": cls.AC_HEURISTIC}
        try:
            return aliases[key.replace("_", "")]
        except KeyError:
            raise DomainError(f"unknown detector {value!r}") from None


_SIDE_INFO = {
    DetectorKind.COHERENT: ("alpha", "theta"),
    DetectorKind.NONCOHERENT: ("mu_h", "sigma_h_sq", "sigma_n_sq"),
    DetectorKind.AC_NEAR_OPTIMUM: ("alpha", "K", "sigma_n_sq", "phi"),
    DetectorKind.AC_SUBOPT_BESSEL: ("alpha", "sigma_n_sq"),
    DetectorKind.AC_SUBOPT_QUAD: ("alpha", "sigma_n_sq"),
    DetectorKind.AC_HEURISTIC: ("alpha",),
}

_LABELS = {
    DetectorKind.COHERENT: "Coh",
    DetectorKind.NONCOHERENT: "NC",
    DetectorKind.AC_NEAR_OPTIMUM: "AC-NO",
    DetectorKind.AC_SUBOPT_BESSEL: "AC-SO",
    DetectorKind.AC_SUBOPT_QUAD: "AC-SO-Q",
    DetectorKind.AC_HEURISTIC: "AC-H",
}


@dataclass(frozen=True)
class DecisionStatistic:
    """Combined statistic ``zeta`` and the per-hypothesis metric values."""

    zeta: np.ndarray
    metric_values: np.ndarray


def _decide(metrics: np.ndarray):
    d = np.argmin(metrics, axis=-1)
    return int(d) if d.ndim == 0 else d


def _check_dims(r, *arrays):
    for a in arrays:
        if np.shape(a)[-1:] != np.shape(r)[-1:]:
            raise DomainError(f"antenna dimension mismatch: {np.shape(a)} vs {np.shape(r)}")


# ---------------------------------------------------------------------------
# Coherent and noncoherent
# ---------------------------------------------------------------------------

def detect_coherent(r, ch: ChannelRealization, c: MaskConstellation):
    """Minimum-distance detection with full channel knowledge.

    ``argmin_s sum_i |r_i - h_i s|^2``.
    """
    r = np.asarray(r)
    h = ch.h
    _check_dims(r, h)
    s = c.amplitudes
    # |r - h s|^2 = |r|^2 - 2 s Re(r conj(h)) + s^2 |h|^2; drop |r|^2
    cross = np.sum((r * np.conj(h)).real, axis=-1)[..., None]
    energy = np.sum(np.abs(h) ** 2, axis=-1)[..., None]
    return _decide(s * s * energy - 2.0 * s * cross)


def detect_noncoherent(r, p: RicianParams, sigma_n_sq: float, c: MaskConstellation):
    """ML detection knowing only the channel statistics.

    ``argmin_s N ln(pi v_s) + sum_i |r_i - m_h s|^2 / v_s`` with
    ``v_s = 2 (sigma_h^2 s^2 + sigma_n^2)``.
    """
    r = np.asarray(r)
    N = r.shape[-1]
    s = c.amplitudes
    v = 2.0 * (p.sigma_h_sq * s * s + sigma_n_sq)
    dist = np.sum(np.abs(r[..., None, :] - p.m_h * s[:, None]) ** 2, axis=-1)
    return _decide(N * np.log(np.pi * v) + dist / v)


# ---------------------------------------------------------------------------
# Amplitude-coherent detectors
# ---------------------------------------------------------------------------

def i_theta_gc(alpha_i, s, r_abs, theta_r, p: RicianParams, sigma_n_sq: float,
               rule: QuadratureRule | None = None, *, log: bool = False):
    """Gauss-Chebyshev evaluation of the phase-averaged likelihood factor.

    With ``A = Kbar cos(phi)``, ``B = cos(theta_r) / sigma_n^2``,
    ``C = Kbar sin(phi)``, ``D = sin(theta_r) / sigma_n^2``,
    ``a = A + B alpha s |r|`` and ``c = C + D alpha s |r|``, the integrand is
    shifted to its peak ``varphi = atan2(c, a)`` and summed as
    ``(1/L) sum_l exp(a cos(varphi + t_l) + c sin(varphi + t_l))``.
    The sum is formed in the log domain; pass ``log=True`` to receive
    ``ln I_theta`` (the linear value overflows at high SNR).
    """
    if np.any(np.asarray(s) <= 0):
        raise DomainError("i_theta_gc needs s > 0; the s = 0 hypothesis uses I0(Kbar)")
    rule = rule or chebyshev_rule()
    kbar = p.concentration
    g = np.asarray(alpha_i) * np.asarray(s) * np.asarray(r_abs) / sigma_n_sq
    a = kbar * math.cos(p.phi) + np.cos(theta_r) * g
    c = kbar * math.sin(p.phi) + np.sin(theta_r) * g
    varphi = np.arctan2(c, a)
    ang = varphi[..., None] + rule.angles
    expo = a[..., None] * np.cos(ang) + c[..., None] * np.sin(ang)
    out = special.logsumexp(expo, axis=-1) - math.log(rule.order)
    if not log:
        out = np.exp(out)
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=32)
def _ln_mean_exp_cos(order: int):
    cos_l = np.cos(chebyshev_rule(order).angles)
    top = cos_l.max()

    def f(R):
        # ln[(1/L) sum_l exp(R cos t_l)], shifted by the largest exponent;
        # looping over nodes keeps memory at the size of R
        R = np.asarray(R, dtype=float)
        acc = np.zeros_like(R)
        for cl in cos_l:
            acc += np.exp(R * (cl - top))
        return R * top + np.log(acc) - math.log(order)

    return f


def _ac_near_optimum_metrics(r, alpha, p, sigma_n_sq, c, rule):
    r = np.asarray(r)
    alpha = np.asarray(alpha, dtype=float)
    _check_dims(r, alpha)
    rule = rule or chebyshev_rule()
    kbar = p.concentration
    s = c.amplitudes
    r_abs = np.abs(r)
    # a + jc = Kbar e^{j phi} + (alpha s |r| / sigma^2) e^{j theta_r};
    # shifted to its peak the integrand is exp(|a + jc| cos t)
    base = kbar * complex(math.cos(p.phi), math.sin(p.phi))
    unit = np.where(r_abs > 0, r / np.where(r_abs > 0, r_abs, 1.0), 1.0)
    g = (alpha * r_abs / sigma_n_sq)[..., None, :] * s[1:, None]
    R = np.abs(base + g * unit[..., None, :])
    ln_i = _ln_mean_exp_cos(rule.order)(R)
    quad = (alpha**2)[..., None, :] * (s * s)[:, None] / (2.0 * sigma_n_sq)
    lead = ln_bessel_i(0, kbar)
    ln_all = np.concatenate([np.full(ln_i.shape[:-2] + (1,) + ln_i.shape[-1:], lead), ln_i],
                            axis=-2)
    return np.sum(quad - ln_all, axis=-1)


def detect_ac_near_optimum(r, alpha, p: RicianParams, sigma_n_sq: float,
                           c: MaskConstellation, rule: QuadratureRule | None = None):
    """Near-optimum AC detector.

    ``argmin_s sum_i alpha_i^2 s^2 / (2 sigma_n^2) - ln I_theta_i(s)``, with
    ``I_theta`` from :func:`i_theta_gc` and ``ln I0(Kbar)`` for ``s = 0``.
    """
    return _decide(_ac_near_optimum_metrics(r, alpha, p, sigma_n_sq, c, rule))


def _ac_subopt_metrics(r, alpha, sigma_n_sq, c, ln_kernel):
    r = np.asarray(r)
    alpha = np.asarray(alpha, dtype=float)
    _check_dims(r, alpha)
    s = c.amplitudes
    g = (alpha * np.abs(r) / sigma_n_sq)[..., None, :] * s[:, None]
    quad = (alpha**2)[..., None, :] * (s * s)[:, None] / (2.0 * sigma_n_sq)
    return np.sum(quad - ln_kernel(g), axis=-1)


def detect_ac_suboptimum_bessel(r, alpha, sigma_n_sq: float, c: MaskConstellation):
    """Suboptimum AC detector with ``ln I0(alpha s |r| / sigma_n^2)``."""
    return _decide(_ac_subopt_metrics(r, alpha, sigma_n_sq, c, lambda g: ln_bessel_i(0, g)))


def detect_ac_suboptimum_quad(r, alpha, sigma_n_sq: float, c: MaskConstellation,
                              rule: QuadratureRule | None = None):
    """Suboptimum AC detector with the Bessel function replaced by its quadrature."""
    rule = rule or chebyshev_rule()
    return _decide(_ac_subopt_metrics(r, alpha, sigma_n_sq, c, _ln_mean_exp_cos(rule.order)))


def heuristic_statistic(r, alpha, c: MaskConstellation | None = None) -> DecisionStatistic:
    """``zeta = sum|r_i|^2 / sum alpha_i^2`` with metrics ``(zeta - E_m)^2``."""
    r = np.asarray(r)
    alpha = np.asarray(alpha, dtype=float)
    _check_dims(r, alpha)
    x = np.sum(alpha * alpha, axis=-1)
    if np.any(x < DEGENERATE_ENERGY):
        raise DegenerateChannelError("sum of squared envelopes is below 1e-30")
    zeta = np.sum(r.real**2 + r.imag**2, axis=-1) / x
    metrics = None if c is None else (zeta[..., None] - c.energies) ** 2
    return DecisionStatistic(zeta, metrics)


def detect_ac_heuristic(r, alpha, c: MaskConstellation):
    """Threshold detector on ``zeta``.

    Returns ``m`` with ``eta_{m-1,m} < zeta <= eta_{m,m+1}``; a ``zeta`` that
    lands exactly on a threshold goes to the lower symbol.
    """
    zeta = heuristic_statistic(r, alpha).zeta
    thr = c.thresholds
    d = np.atleast_1d(np.searchsorted(thr, zeta, side="left"))
    z = np.atleast_1d(zeta)
    # A zeta within one ulp of a stored midpoint may sit on the other side of
    # the exact midpoint; settle those few in rational arithmetic.
    up = np.minimum(d, thr.size - 1)
    lo = np.maximum(d - 1, 0)
    near = (np.abs(z - thr[up]) <= np.spacing(thr[up])) | (np.abs(z - thr[lo]) <= np.spacing(thr[lo]))
    for i in np.flatnonzero(near):
        d[i] = _nearest_energy_exact(float(z[i]), c.energies)
    return int(d[0]) if np.ndim(zeta) == 0 else d.reshape(np.shape(zeta))


def _nearest_energy_exact(zeta: float, energies) -> int:
    """Index of the energy nearest ``zeta`` in exact arithmetic, ties to the lower."""
    zf = Fraction(zeta)
    dist = [abs(zf - Fraction(float(e))) for e in energies]
    return dist.index(min(dist))


def detect(kind, r, ch: ChannelRealization, p: RicianParams, sigma_n_sq: float,
           c: MaskConstellation, rule: QuadratureRule | None = None):
    """Run detector ``kind``, handing it only the side information it declares."""
    kind = DetectorKind.parse(kind)
    if kind is DetectorKind.COHERENT:
        return detect_coherent(r, ch, c)
    if kind is DetectorKind.NONCOHERENT:
        return detect_noncoherent(r, p, sigma_n_sq, c)
    if kind is DetectorKind.AC_NEAR_OPTIMUM:
        return detect_ac_near_optimum(r, ch.alpha, p, sigma_n_sq, c, rule)
    if kind is DetectorKind.AC_SUBOPT_BESSEL:
        return detect_ac_suboptimum_bessel(r, ch.alpha, sigma_n_sq, c)
    if kind is DetectorKind.AC_SUBOPT_QUAD:
        return detect_ac_suboptimum_quad(r, ch.alpha, sigma_n_sq, c, rule)
    return detect_ac_heuristic(r, ch.alpha, c)


# ---------------------------------------------------------------------------
# Phase noise
# ---------------------------------------------------------------------------

def phase_noise_variance(level: float) -> float:
    """Circular variance for a phase-noise severity level.

    A level counts phase variance in units of ``(10 degrees)^2``; the result is
    the circular variance ``1 - exp(-sigma^2 / 2)`` of a wrapped Gaussian with
    that variance.  Monotone, ``0 -> 0``.
    """
    if level < 0:
        raise DomainError("phase-noise level must be >= 0")
    return -math.expm1(-0.5 * level * PHASE_LEVEL_UNIT)


def von_mises_concentration(circular_variance: float) -> float:
    """Concentration ``kappa`` with ``I1(kappa) / I0(kappa) = 1 - V``."""
    V = float(circular_variance)
    if not 0.0 <= V < 1.0:
        raise DomainError("circular variance must lie in [0, 1)")
    if V == 0.0:
        return math.inf
    target = 1.0 - V

    def f(k):
        return special.i1e(k) / special.i0e(k) - target

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return optimize.brentq(f, 0.0, hi, xtol=1e-14, rtol=1e-14) if target > 0 else 0.0


def apply_phase_noise(r, sigma_phi_sq: float, rng: np.random.Generator | None = None):
    """Rotate each sample by an independent Tikhonov phase.

    ``sigma_phi_sq`` is the circular variance ``1 - E[cos psi]`` of the phase
    error; zero returns ``r`` unchanged.
    """
    if sigma_phi_sq < 0:
        raise DomainError("sigma_phi_sq must be >= 0")
    r = np.asarray(r)
    if sigma_phi_sq == 0:
        return r
    if rng is None:
        raise ValueError("a random generator is required for nonzero phase noise")
    kappa = von_mises_concentration(sigma_phi_sq)
    psi = rng.vonmises(0.0, kappa, size=r.shape)
    return r * np.exp(1j * psi)
