"""
Deterministic Monte Carlo SER curves
====================================

Trials are chunked and each chunk draws from its own counter-keyed stream,
so a curve is bit-identical for any number of worker processes.
"""

from acmask.analytic_ser import SerScenario, ser_heuristic
from acmask.detectors import DetectorKind
from acmask.mc_engine import McConfig, run_curve

sc = SerScenario.from_snr(M=2, N=1, K=4.0, snr_db=0.0)
grid = [0.0, 10.0, 20.0, 30.0]
mc = McConfig(trials=200_000, seed=42)

curve = run_curve(DetectorKind.AC_HEURISTIC, sc, grid, mc)
for pt in curve.points:
    ref = ser_heuristic(SerScenario.from_snr(2, 1, 4.0, pt.snr_db))
    print(f"{pt.snr_db:4.0f} dB  MC {pt.ser:.3e} [{pt.ci_low:.3e}, {pt.ci_high:.3e}]  "
          f"analysis {ref:.3e}")

again = run_curve(DetectorKind.AC_HEURISTIC, sc, grid,
                  McConfig(trials=200_000, seed=42, workers=2))
print("identical with 2 workers:", again == curve)
