"""
MASK constellation and the Rician channel
=========================================

Unipolar amplitudes with unit mean energy, Rician channel draws and the
received block of an N-antenna receiver.
"""

import numpy as np

from acmask.channel import (RicianParams, build_constellation, noise_variance,
                            rician_phase_pdf, sample_channel, transmit, von_mises_phase_pdf)

c = build_constellation(4)
print("amplitudes", c.amplitudes)
print("energies  ", c.energies, "mean", c.energies.mean())
print("thresholds", c.thresholds)

# K is the ratio of line-of-sight to scattered power, omega the total power
p = RicianParams(K=4.0, omega=1.0)
rng = np.random.default_rng(0)
ch = sample_channel(p, N=2, rng=rng, size=100_000)
print("E[alpha^2] per antenna", (ch.alpha ** 2).mean(axis=0))

# the Von Mises law approximates the channel phase well for moderate K
t = np.linspace(-np.pi, np.pi, 5)
print("phase pdf  ", rician_phase_pdf(t, p))
print("Von Mises  ", von_mises_phase_pdf(t, p))

# one received block at 20 dB for symbol 3
sigma_n_sq = noise_variance(20.0)
r = transmit(c, 3, sample_channel(p, 2, rng), sigma_n_sq, rng)
print("received", r)
