"""Self-check battery behind ``acmask validate``.

Each check is a small, fast cross-check of one module against an
independent oracle or an exact identity.  A check returns a short detail
string on success and raises :class:`AssertionError` on failure.

Setting ``AC_MASK_FAULT=threshold`` perturbs the heuristic thresholds fed to
the threshold-equivalence check; it exists so the failure path of the
battery itself can be tested.
"""

from __future__ import annotations

import dataclasses
import math
import os
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import analytic_ser as A
from .channel import RicianParams, build_constellation, sample_channel, transmit
from .detectors import DetectorKind, detect, detect_ac_heuristic, heuristic_statistic
from .mc_engine import McConfig, run_point
from .specfun import (SeriesConfig, chebyshev_rule, gauss_chebyshev, kummer_1f1, ln_bessel_i,
                      marcum_p, marcum_q)

__all__ = ["Check", "CheckResult", "CHECKS", "MODULES", "run_checks"]

MODULES = ("specfun", "channel", "detectors", "analytic_ser", "mc_engine")


@dataclass(frozen=True)
class Check:
    module: str
    name: str
    func: Callable[[], str]


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    passed: bool
    detail: str
    seconds: float


CHECKS: list[Check] = []


def _check(module: str):
    def wrap(f):
        CHECKS.append(Check(module, f.__name__.removeprefix("check_"), f))
        return f
    return wrap


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise AssertionError(msg)


# specfun --------------------------------------------------------------------

@_check("specfun")
def check_ln_bessel_i():
    z = np.logspace(-3, math.log10(700.0), 400)
    worst = 0.0
    for v in range(5):
        ref = np.log(special.ive(v, z)) + z
        got = ln_bessel_i(v, z)
        # relative accuracy of I_v is the absolute accuracy of its logarithm
        worst = max(worst, float(np.max(np.abs(got - ref))))
    _require(worst <= 1e-10, f"max |d ln I| = {worst:.2e}")
    return f"max |d ln I| = {worst:.1e}"


@_check("specfun")
def check_marcum_reflection():
    worst = 0.0
    for N in range(1, 5):
        for a in (0.3, 1.0, 2.5, 6.0, 12.0):
            for b in (0.2, 1.1, 3.0, 7.5, 11.0):
                lhs = marcum_q(N, a, b) + marcum_q(N, b, a)
                k = np.arange(1 - N, N)
                rhs = 1.0 + float(np.sum((a / b) ** k * special.ive(np.abs(k), a * b))
                                  * math.exp(-0.5 * (a - b) ** 2))
                worst = max(worst, abs(lhs - rhs))
                worst = max(worst, abs(marcum_q(N, a, b) + marcum_p(N, a, b) - 1.0))
    _require(worst <= 1e-9, f"max residual {worst:.2e}")
    return f"max residual {worst:.1e}"


@_check("specfun")
def check_gauss_chebyshev_bessel():
    rule = chebyshev_rule(64)
    worst = 0.0
    for z in (0.0, 0.5, 3.0, 10.0, 25.0, 40.0):
        got = gauss_chebyshev(rule, lambda y, z=z: np.exp(z * (y - 1.0)))
        ref = math.pi * special.ive(0, z)
        worst = max(worst, abs(got - ref) / ref)
    _require(worst <= 1e-8, f"max rel error {worst:.2e}")
    return f"max rel error {worst:.1e}"


@_check("specfun")
def check_kummer():
    worst = 0.0
    for a in (0.5, 1.0, 3.0, 7.0):
        for b in (1.0, 2.0, 4.0):
            for z in (0.0, 0.7, 6.0, 20.0, 45.0):
                ref = special.hyp1f1(a, b, z)
                worst = max(worst, abs(kummer_1f1(a, b, z) - ref) / max(abs(ref), 1e-300))
    _require(worst <= 1e-10, f"max rel error {worst:.2e}")
    return f"max rel error {worst:.1e}"


@_check("specfun")
def check_lower_series_identity():
    for N in range(1, 5):
        for n in range(11):
            lhs, rhs = A.lower_series_identity(N, n)
            _require(lhs == rhs, f"N={N} n={n}: {lhs} != {rhs}")
    return "exact for N<=4, n<=10"


# channel --------------------------------------------------------------------

@_check("channel")
def check_constellation_energy():
    for M in range(2, 17):
        c = build_constellation(M)
        _require(abs(c.energies.mean() - 1.0) <= 1e-12, f"M={M}: mean energy {c.energies.mean()}")
    return "mean energy 1 for M=2..16"


@_check("channel")
def check_channel_moments():
    rng = np.random.default_rng(7)
    n = 200_000
    for K in (0.0, 4.0, 10.0):
        p = RicianParams(K, omega=2.0)
        h = sample_channel(p, 1, rng, size=n).h[:, 0]
        power = np.mean(np.abs(h) ** 2)
        se = np.std(np.abs(h) ** 2) / math.sqrt(n)
        _require(abs(power - p.omega) <= 4 * se, f"K={K}: E|h|^2 = {power:.4f}")
        _require(abs(abs(np.mean(h)) - p.mu_h) <= 4 * math.sqrt(p.sigma_h_sq * 2 / n) + 1e-12,
                 f"K={K}: |E h| = {abs(np.mean(h)):.4f}")
    return "E|h|^2 and |E h| within 4 SE"


# detectors ------------------------------------------------------------------

def _argmin_oracle(zeta: np.ndarray, energies: np.ndarray) -> np.ndarray:
    """Nearest energy, ties to the lower index, exact where floats are ambiguous."""
    d2 = (zeta[:, None] - energies[None, :]) ** 2
    ref = np.argmin(d2, axis=1)
    part = np.sort(d2, axis=1)
    close = part[:, 1] - part[:, 0] <= 1e-12 * np.maximum(part[:, 1], 1e-300)
    for i in np.flatnonzero(close):
        zf = Fraction(float(zeta[i]))
        dist = [abs(zf - Fraction(float(e))) for e in energies]
        ref[i] = dist.index(min(dist))
    return ref


@_check("detectors")
def check_threshold_equivalence():
    n = 1_000_000
    for M in (2, 4, 8):
        c = build_constellation(M)
        used = c
        if os.environ.get("AC_MASK_FAULT", "") == "threshold":
            used = dataclasses.replace(c, thresholds=c.thresholds * (1.0 + 1e-3))
        r = np.sqrt(np.linspace(0.0, 1.5 * c.energies[-1], n))[:, None].astype(complex)
        alpha = np.ones((n, 1))
        zeta = heuristic_statistic(r, alpha).zeta
        got = detect_ac_heuristic(r, alpha, used)
        ref = _argmin_oracle(zeta, c.energies)
        bad = int(np.count_nonzero(got != ref))
        _require(bad == 0, f"M={M}: {bad} of {n} grid points disagree with argmin")
    return f"{n} grid points, M in (2, 4, 8)"


@_check("detectors")
def check_noise_free_detection():
    rng = np.random.default_rng(11)
    c = build_constellation(4)
    p = RicianParams(4.0)
    ch = sample_channel(p, 2, rng, size=2000)
    m = rng.integers(0, 4, size=2000)
    ok = np.sum(ch.alpha**2, axis=-1) > 1e-3
    ch = type(ch)(ch.alpha[ok], ch.theta[ok])
    m = m[ok]
    s2 = 1e-9
    r = transmit(c, m, ch, s2, rng)
    for kind in DetectorKind:
        if kind is DetectorKind.NONCOHERENT:
            continue
        d = detect(kind, r, ch, p, s2, c, chebyshev_rule(64))
        _require(np.array_equal(d, m), f"{kind.value}: {int(np.count_nonzero(d != m))} errors")
    return "coherent and AC detectors error-free at 87 dB"


@_check("detectors")
def check_heuristic_phase_invariance():
    rng = np.random.default_rng(5)
    r = rng.standard_normal((1000, 3)) + 1j * rng.standard_normal((1000, 3))
    alpha = np.abs(rng.standard_normal((1000, 3))) + 0.1
    rot = np.exp(1j * rng.uniform(-np.pi, np.pi, r.shape))
    z0 = heuristic_statistic(r, alpha).zeta
    z1 = heuristic_statistic(r * rot, alpha).zeta
    err = float(np.max(np.abs(z0 - z1) / z0))
    _require(err <= 1e-13, f"rel change {err:.2e}")
    return "statistic unchanged by per-antenna phase rotation"


# analytic_ser ---------------------------------------------------------------

@_check("analytic_ser")
def check_engine_concordance():
    cfg = SeriesConfig(max_terms=1000)
    sc = A.SerScenario.from_snr(4, 2, 4.0, 30.0, series=cfg)
    ref = A.ser_heuristic(sc, "numeric")
    e2 = abs(A.ser_heuristic(sc, "approach2", fallback=False) - ref)
    e1 = abs(A.ser_heuristic(sc, "approach1", fallback=False) - ref)
    _require(e2 <= 1e-6, f"approach2 off by {e2:.2e}")
    _require(e1 <= 1e-4, f"approach1 off by {e1:.2e}")
    return f"M=4 N=2 K=4 30 dB: |d2| = {e2:.1e}, |d1| = {e1:.1e}"


@_check("analytic_ser")
def check_pdf_normalisation():
    sc = A.SerScenario.from_snr(4, 1, 10.0, 27.0, series=SeriesConfig(max_terms=200))
    worst = 0.0
    for m in range(4):
        lo = 0.0 if m == 0 else 0.5 * sc.energy(m)
        hi = 2.0 * sc.energy(3) + 1.0
        pts = [sc.energy(m)] if m else None
        mass, _ = integrate.quad(lambda z: A.pdf_zeta(z, m, sc), lo, hi, points=pts, limit=400)
        tail = A.tail_probability(lo, m, sc, "numeric") + A.tail_probability(hi, m, sc, "numeric",
                                                                            upper=True)
        worst = max(worst, abs(mass + tail - 1.0))
    _require(worst <= 1e-4, f"max |mass - 1| = {worst:.2e}")
    return f"M=4 K=10 27 dB: max |mass - 1| = {worst:.1e}"


@_check("analytic_ser")
def check_asymptotic_high_snr():
    sc = A.SerScenario.from_snr(2, 1, 4.0, 50.0, series=SeriesConfig(max_terms=1000))
    ref = A.ser_heuristic(sc, "approach2", fallback=False)
    rel = abs(A.ser_heuristic(sc, "asymptotic") / ref - 1.0)
    _require(rel <= 0.03, f"relative error {rel:.3f}")
    return f"M=2 N=1 K=4 50 dB: rel error {rel:.1e}"


# mc_engine ------------------------------------------------------------------

@_check("mc_engine")
def check_worker_invariance():
    sc = A.SerScenario.from_snr(4, 2, 4.0, 15.0)
    mc = McConfig(trials=3 * 2**16 + 17, seed=99)
    a = run_point(DetectorKind.AC_HEURISTIC, sc, mc)
    b = run_point(DetectorKind.AC_HEURISTIC, sc, dataclasses.replace(mc, workers=2))
    _require(a == b, f"{a} != {b}")
    return f"identical SerPoint ({a.errors} errors) for 1 and 2 workers"


@_check("mc_engine")
def check_mc_vs_analytic():
    sc = A.SerScenario.from_snr(2, 1, 4.0, 15.0)
    pt = run_point(DetectorKind.AC_HEURISTIC, sc, McConfig(trials=2**18, seed=1))
    ref = A.ser_heuristic(sc, "numeric")
    z = abs(pt.ser - ref) / math.sqrt(ref * (1 - ref) / pt.trials)
    _require(z <= 3.0, f"MC {pt.ser:.4e} vs analytic {ref:.4e} ({z:.1f} SE)")
    return f"MC within {z:.1f} SE of analytic"


def run_checks(module: str | None = None) -> list[CheckResult]:
    """Run every check, or only those of ``module``."""
    if module is not None and module not in MODULES:
        raise ValueError(f"unknown module {module!r}; choose from {', '.join(MODULES)}")
    out = []
    for chk in CHECKS:
        if module is not None and chk.module != module:
            continue
        t0 = time.perf_counter()
        try:
            detail, ok = chk.func(), True
        except AssertionError as exc:
            detail, ok = str(exc), False
        except Exception as exc:  # a crash is a failed check, not a crashed battery
            detail, ok = f"{type(exc).__name__}: {exc}", False
        out.append(CheckResult(chk.module, chk.name, ok, detail, time.perf_counter() - t0))
    return out
