"""Amplitude-coherent detection of MASK over Rician fading with receive diversity.

Submodules
----------
specfun
    Bessel, Marcum-Q, Kummer and Laguerre kernels plus Gauss-Chebyshev quadrature.
channel
    Constellation, Rician channel model, sampling and transmission.
detectors
    Coherent, noncoherent and amplitude-coherent symbol detectors.
analytic_ser
    Analytical SER of the heuristic amplitude-coherent detector.
mc_engine
    Deterministic, parallel Monte Carlo SER estimation.
cli
    ``sweep``, ``pdf`` and ``validate`` command-line front end.
"""

from importlib.metadata import PackageNotFoundError, version

from .analytic_ser import Engine, SerScenario, ser_heuristic
from .channel import (ChannelRealization, MaskConstellation, RicianParams,
                      build_constellation, sample_channel, transmit)
from .detectors import DetectorKind, detect
from .exceptions import (AcMaskError, ConvergenceError, DegenerateChannelError, DomainError,
                         RegimeError)
from .mc_engine import McConfig, SerCurve, SerPoint, run_curve, run_point
from .specfun import QuadratureRule, SeriesConfig, chebyshev_rule

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = [
    "AcMaskError", "ChannelRealization", "ConvergenceError", "DegenerateChannelError",
    "DetectorKind", "DomainError", "Engine", "MaskConstellation", "McConfig",
    "QuadratureRule", "RegimeError", "RicianParams", "SerCurve", "SerPoint", "SerScenario",
    "SeriesConfig", "__version__", "build_constellation", "chebyshev_rule", "detect",
    "run_curve", "run_point", "sample_channel", "ser_heuristic", "transmit",
]
