"""
Six detectors on the same received blocks
=========================================

Each detector sees only its declared side information; the heuristic
amplitude-coherent detector needs nothing beyond the channel envelopes.
"""

import numpy as np

from acmask.channel import RicianParams, build_constellation, noise_variance, sample_channel, transmit
from acmask.detectors import DetectorKind, apply_phase_noise, detect, phase_noise_variance

M, N, K, snr_db = 2, 1, 4.0, 20.0
n = 200_000
c = build_constellation(M)
p = RicianParams(K)
sigma_n_sq = noise_variance(snr_db)
rng = np.random.default_rng(1)

m = rng.integers(0, M, size=n)
ch = sample_channel(p, N, rng, size=n)
r = transmit(c, m, ch, sigma_n_sq, rng)

for kind in DetectorKind:
    ser = np.mean(detect(kind, r, ch, p, sigma_n_sq, c) != m)
    print(f"{kind.label:8s} needs {', '.join(kind.side_information):28s} SER {ser:.2e}")

# phase noise rotates r; the envelope-only detector does not notice
rr = apply_phase_noise(r, phase_noise_variance(10), rng)
for kind in (DetectorKind.COHERENT, DetectorKind.AC_HEURISTIC):
    ser = np.mean(detect(kind, rr, ch, p, sigma_n_sq, c) != m)
    print(f"with phase noise level 10: {kind.label:5s} SER {ser:.2e}")
