"""Unipolar MASK constellation, Rician channel model and received-signal model.

Arrays follow one convention throughout the package: the last axis indexes
receive antennas, any leading axes index independent trials.  A received
block is simply a complex array ``r`` of shape ``(..., N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .exceptions import DomainError
from .specfun import ln_bessel_i

__all__ = [
    "MaskConstellation",
    "RicianParams",
    "LinkBudget",
    "ChannelRealization",
    "build_constellation",
    "rician_envelope_pdf",
    "rician_phase_pdf",
    "von_mises_phase_pdf",
    "sample_channel",
    "transmit",
    "noise_variance",
]


@dataclass(frozen=True)
class MaskConstellation:
    """Unit-average-energy unipolar M-ASK alphabet.

    Attributes
    ----------
    M : int
        Modulation order.
    delta : float
        Amplitude spacing, ``sqrt(6 / ((2M-1)(M-1)))``.
    amplitudes, energies : ndarray
        ``s_m = m * delta`` and ``E_m = s_m**2``.
    thresholds : ndarray
        Midpoints ``(E_m + E_{m+1}) / 2`` between consecutive energies.
    """

    M: int
    delta: float
    amplitudes: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    thresholds: np.ndarray = field(repr=False)

    def __post_init__(self):
        for arr in (self.amplitudes, self.energies, self.thresholds):
            arr.setflags(write=False)

    def lower_threshold(self, m: int) -> float:
        """Threshold below ``E_m`` (``0`` for ``m = 0``)."""
        return 0.0 if m == 0 else float(self.thresholds[m - 1])

    def upper_threshold(self, m: int) -> float:
        """Threshold above ``E_m`` (``inf`` for the top symbol)."""
        return math.inf if m == self.M - 1 else float(self.thresholds[m])


def build_constellation(M: int) -> MaskConstellation:
    """Return the order-``M`` constellation with mean symbol energy one."""
    if int(M) != M or M < 2:
        raise DomainError(f"modulation order must be an integer >= 2, got {M}")
    M = int(M)
    delta = math.sqrt(6.0 / ((2 * M - 1) * (M - 1)))
    amplitudes = np.arange(M) * delta
    energies = amplitudes**2
    thresholds = 0.5 * (energies[:-1] + energies[1:])
    return MaskConstellation(M, delta, amplitudes, energies, thresholds)


@dataclass(frozen=True)
class RicianParams:
    """Rician fading parameters.

    ``K`` is the ratio of line-of-sight to scattered power, ``omega`` the
    total power ``E|h|^2`` and ``phi`` the line-of-sight phase.
    """

    K: float
    omega: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.K >= 0:
            raise DomainError(f"K must be >= 0, got {self.K}")
        if not self.omega > 0:
            raise DomainError(f"omega must be > 0, got {self.omega}")

    @property
    def mu_h(self) -> float:
        """Magnitude of the channel mean, ``sqrt(omega K / (K + 1))``."""
        return math.sqrt(self.omega * self.K / (self.K + 1.0))

    @property
    def sigma_h_sq(self) -> float:
        """Per-dimension variance of the scattered component."""
        return self.omega / (2.0 * (self.K + 1.0))

    @property
    def m_h(self) -> complex:
        """Complex channel mean ``mu_h * exp(j phi)``."""
        return self.mu_h * complex(math.cos(self.phi), math.sin(self.phi))

    @property
    def concentration(self) -> float:
        """Von Mises concentration ``2 sqrt(K (K + 1))`` of the phase approximation."""
        return 2.0 * math.sqrt(self.K * (self.K + 1.0))


def noise_variance(snr_db: float, omega: float = 1.0, p_s: float = 1.0) -> float:
    """Per-dimension noise variance for ``SNR = omega * p_s / (2 sigma_n^2)``."""
    return omega * p_s / (2.0 * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class LinkBudget:
    """Average SNR in dB together with the per-dimension noise variance."""

    snr_db: float
    sigma_n_sq: float

    @classmethod
    def from_snr(cls, snr_db: float, omega: float = 1.0, p_s: float = 1.0) -> "LinkBudget":
        return cls(float(snr_db), noise_variance(snr_db, omega, p_s))


@dataclass(frozen=True)
class ChannelRealization:
    """Per-antenna envelopes ``alpha`` and phases ``theta`` (shape ``(..., N)``)."""

    alpha: np.ndarray
    theta: np.ndarray

    @property
    def N(self) -> int:
        return self.alpha.shape[-1]

    @property
    def h(self) -> np.ndarray:
        """Complex gains ``alpha * exp(j theta)``."""
        return self.alpha * np.exp(1j * self.theta)


def rician_envelope_pdf(alpha, p: RicianParams):
    """Density of the envelope ``|h|``."""
    a = np.asarray(alpha, dtype=float)
    if np.any(a < 0):
        raise DomainError("envelope must be nonnegative")
    K, omega = p.K, p.omega
    arg = 2.0 * a * math.sqrt(K * (1.0 + K) / omega)
    with np.errstate(divide="ignore"):
        log_pdf = (np.log(2.0 * (1.0 + K) / omega) + np.log(a) - K
                   - (1.0 + K) * a * a / omega + ln_bessel_i(0, arg))
    out = np.exp(log_pdf)
    return float(out) if out.ndim == 0 else out


def rician_phase_pdf(theta, p: RicianParams):
    """Density of the channel phase, written with ``cos(theta + phi)``.

    With this form the density peaks at ``theta = -phi``; for the default
    ``phi = 0`` it coincides with the phase law of the sampled channel.
    """
    t = np.asarray(theta, dtype=float)
    rho = math.sqrt(2.0 * p.K)  # mu_h / sigma_h
    c = np.cos(t + p.phi)
    s = np.sin(t + p.phi)
    out = (np.exp(-p.K) / (2 * np.pi)
           + rho * c / math.sqrt(2 * np.pi) * np.exp(-0.5 * rho**2 * s * s)
           * special.ndtr(rho * c))
    return float(out) if out.ndim == 0 else out


def von_mises_phase_pdf(theta, p: RicianParams):
    """Von Mises approximation of the Rician phase density."""
    t = np.asarray(theta, dtype=float)
    kappa = p.concentration
    log_norm = math.log(2 * np.pi) + ln_bessel_i(0, kappa)
    out = np.exp(kappa * np.cos(t - p.phi) - log_norm)
    return float(out) if out.ndim == 0 else out


def sample_channel(p: RicianParams, N: int, rng: np.random.Generator,
                   size: int | tuple | None = None) -> ChannelRealization:
    """Draw iid Rician gains for ``N`` antennas.

    The complex gain is drawn from two independent real Gaussians with mean
    ``m_h`` and per-dimension variance ``sigma_h_sq``; envelope and phase are
    derived from it.  ``size`` prepends trial axes.
    """
    if int(N) != N or N < 1:
        raise DomainError(f"antenna count must be a positive integer, got {N}")
    shape = (int(N),) if size is None else tuple(np.atleast_1d(size)) + (int(N),)
    sd = math.sqrt(p.sigma_h_sq)
    mean = p.m_h
    re = rng.standard_normal(shape) * sd + mean.real
    im = rng.standard_normal(shape) * sd + mean.imag
    return ChannelRealization(np.hypot(re, im), np.arctan2(im, re))


def transmit(c: MaskConstellation, m, ch: ChannelRealization, sigma_n_sq: float,
             rng: np.random.Generator | None = None) -> np.ndarray:
    """Received samples ``r_i = alpha_i exp(j theta_i) s_m + n_i``.

    ``m`` is a symbol index, or an integer array matching the trial axes of
    ``ch``.  With ``sigma_n_sq = 0`` no noise is drawn and ``rng`` may be
    omitted.
    """
    m = np.asarray(m)
    if np.any(m < 0) or np.any(m >= c.M):
        raise IndexError(f"symbol index out of range for M={c.M}")
    s = c.amplitudes[m][..., None] if m.ndim else c.amplitudes[int(m)]
    r = ch.h * s
    if sigma_n_sq > 0:
        if rng is None:
            raise ValueError("a random generator is required when sigma_n_sq > 0")
        sd = math.sqrt(sigma_n_sq)
        r = r + sd * (rng.standard_normal(r.shape) + 1j * rng.standard_normal(r.shape))
    elif sigma_n_sq < 0:
        raise DomainError("sigma_n_sq must be >= 0")
    return r
