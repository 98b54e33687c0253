"""
Reproducing SER data from the command line
==========================================

Each standard comparison has a config recipe in ``demos/configs``.  This
script runs the density recipe through the CLI entry point and reads the
CSV back.  The full recipes run with, for example::

    acmask sweep --config demos/configs/coherent_vs_heuristic_m2.ini --out results/coh_m2
    acmask pdf --config demos/configs/zeta_pdf_m4.ini --out results/pdf_m4
    acmask validate

Plotting is one external line, e.g. with pandas::

    pandas.read_csv("results/coh_m2.csv").pivot_table(index="snr_db",
        columns=["detector", "N"], values="ser").plot(logy=True)
"""

import csv
import tempfile
from pathlib import Path

from acmask.cli import main

here = Path(__file__).parent / "configs"
with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "pdf"
    code = main(["pdf", "--config", str(here / "zeta_pdf_m4.ini"), "--out", str(out),
                 "--format", "csv", "--trials", "20000"])
    print("exit code", code)
    with open(f"{out}.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    peak = max((r for r in rows if r["m"] == "2"), key=lambda r: float(r["pdf_analytic"]))
    print(f"{len(rows)} rows; density of m=2 peaks at zeta={float(peak['zeta']):.3f}")
