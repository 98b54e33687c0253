"""
Special functions behind the detectors and the SER analysis
===========================================================

The log-domain Bessel function, the generalized Marcum Q-function and the
Gauss-Chebyshev rule that the amplitude-coherent detectors use in place of
an exact Bessel evaluation.
"""

import math

import numpy as np

from acmask.specfun import chebyshev_rule, gauss_chebyshev, ln_bessel_i, marcum_p, marcum_q

# ln I_v(z) stays finite where I_v(z) itself overflows a double
for z in (1.0, 50.0, 800.0):
    print(f"ln I0({z:g}) = {ln_bessel_i(0, z):.12g}")

# Q_N(a, b) is the upper tail of a noncentral chi-square with 2N degrees of
# freedom; P_N = 1 - Q_N is computed directly so small values keep their digits
a, b = 3.0, 0.4
for N in (1, 2, 4):
    print(f"N={N}: Q={marcum_q(N, a, b):.15g}  P={marcum_p(N, a, b):.6e}")

# pi I0(z) as a Chebyshev-weighted integral of exp(z y)
rule = chebyshev_rule(64)
z = 10.0
approx = gauss_chebyshev(rule, lambda y: np.exp(z * (y - 1.0))) * math.exp(z)
print(f"L=64 rule: pi I0(10) = {approx:.15g} vs {math.pi * math.exp(ln_bessel_i(0, z)):.15g}")
