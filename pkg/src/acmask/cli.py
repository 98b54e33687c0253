"""Command-line front end: ``sweep``, ``pdf`` and ``validate``.

Configs are flat ``key = value`` files with one optional section header
naming the command (``[sweep]`` or ``[pdf]``).  Lists are comma separated,
``#`` starts a comment and keys are case sensitive.  Unknown or malformed
keys are rejected with exit code 2.

sweep keys
----------
``M``, ``N``, ``K`` (required lists), ``snr_start`` (required), ``snr_stop``
and ``snr_step`` (inclusive grid, default a single point), ``omega`` (1),
``phi`` (0), ``detectors`` (``ac_heuristic``), ``engines`` (``mc``; any of
``mc, numeric, approach1, approach2, asymptotic``), ``phase_noise`` (0),
``trials``, ``seed``, ``workers``, ``confidence_level``, ``max_terms``,
``term_rel_tol``, ``asymp_order``, ``quad_order``, ``fallback`` (true),
``output`` and ``format``.

Analytic engines only exist for the heuristic detector, so any engine
other than ``mc`` requires ``ac_heuristic`` among the detectors.

pdf keys
--------
``M``, ``N``, ``K``, ``snr_db``, ``zeta_stop`` (required), ``m`` (all
symbols), ``zeta_start`` (0), ``zeta_points`` (351), ``zeta_spacing``
(``linear`` or ``quadratic``), ``engine``
(``approach1`` or ``numeric``), ``omega``, ``phi``, ``trials`` (samples per
symbol), ``seed``, ``workers``, ``max_terms``, ``term_rel_tol``,
``asymp_order``, ``quad_order``, ``fallback``, ``output`` and ``format``.

Exit codes: 0 success, 1 I/O failure, 2 config error, 3 engine failure
without fallback, 4 failed validation check.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from . import analytic_ser as A
from .detectors import DetectorKind
from .exceptions import AcMaskError, ConvergenceError, DomainError, RegimeError
from .mc_engine import McConfig, default_workers, run_curve, zeta_histogram
from .specfun import SeriesConfig

__all__ = ["main", "ConfigError", "load_config", "SWEEP_COLUMNS", "PDF_COLUMNS",
           "format_value", "sweep_rows", "pdf_rows", "zeta_grid", "snr_grid"]

log = logging.getLogger("acmask")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VALIDATE = 0, 1, 2, 3, 4

SWEEP_COLUMNS = ("source", "detector", "engine", "M", "N", "K", "omega", "phase_noise",
                 "snr_db", "ser", "ci_low", "ci_high", "errors", "trials", "seed")
PDF_COLUMNS = ("m", "zeta", "pdf_analytic", "pdf_mc_histogram")

MC = "mc"
FORMATS = ("csv", "json", "both")


class ConfigError(AcMaskError):
    """Schema violation in a config file; ``key`` names the offending entry."""

    def __init__(self, key: str, msg: str):
        super().__init__(f"config key {key!r}: {msg}")
        self.key = key


# ---------------------------------------------------------------------------
# Config schema
# ---------------------------------------------------------------------------

def _split(raw: str) -> list[str]:
    items = [s.strip() for s in raw.split(",")]
    if not items or any(not s for s in items):
        raise ValueError("expected a nonempty comma-separated list")
    return items


def _int(raw: str) -> int:
    v = float(raw) if re.fullmatch(r"\s*[0-9.eE+]+\s*", raw) else None
    if v is None or not v.is_integer():
        raise ValueError(f"expected an integer, got {raw!r}")
    return int(v)


def _float(raw: str) -> float:
    v = float(raw)
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {raw!r}")
    return v


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true or false, got {raw!r}")


def _list(item: Callable[[str], Any]) -> Callable[[str], list]:
    def parse(raw: str) -> list:
        out = [item(s) for s in _split(raw)]
        if len(set(map(str, out))) != len(out):
            raise ValueError("duplicate entries")
        return out
    return parse


def _detector(raw: str) -> str:
    return DetectorKind.parse(raw).value


def _engine(raw: str) -> str:
    return MC if raw.strip().lower() == MC else A.Engine.parse(raw).value


def _pdf_engine(raw: str) -> str:
    eng = A.Engine.parse(raw)
    if eng not in (A.Engine.APPROACH1, A.Engine.NUMERIC):
        raise ValueError("pdf engine must be approach1 or numeric")
    return eng.value


def _fmt(raw: str) -> str:
    if raw.strip() not in FORMATS:
        raise ValueError(f"expected one of {', '.join(FORMATS)}")
    return raw.strip()


def _spacing(raw: str) -> str:
    if raw.strip() not in ("linear", "quadratic"):
        raise ValueError("expected linear or quadratic")
    return raw.strip()


REQUIRED = object()

_COMMON = {
    "omega": (_float, 1.0),
    "phi": (_float, 0.0),
    "trials": (_int, 10**6),
    "seed": (_int, 0),
    "workers": (_int, None),
    "max_terms": (_int, 20),
    "term_rel_tol": (_float, 1e-12),
    "asymp_order": (_int, 2),
    "quad_order": (_int, 64),
    "fallback": (_bool, True),
    "format": (_fmt, "both"),
}

SWEEP_SCHEMA = {
    "M": (_list(_int), REQUIRED),
    "N": (_list(_int), REQUIRED),
    "K": (_list(_float), REQUIRED),
    "snr_start": (_float, REQUIRED),
    "snr_stop": (_float, None),
    "snr_step": (_float, 1.0),
    "detectors": (_list(_detector), ["ac_heuristic"]),
    "engines": (_list(_engine), [MC]),
    "phase_noise": (_list(_float), [0.0]),
    "confidence_level": (_float, 0.95),
    "output": (str, "sweep"),
    **_COMMON,
}

PDF_SCHEMA = {
    "M": (_int, REQUIRED),
    "m": (_list(_int), None),
    "N": (_int, REQUIRED),
    "K": (_float, REQUIRED),
    "snr_db": (_float, REQUIRED),
    "zeta_start": (_float, 0.0),
    "zeta_stop": (_float, REQUIRED),
    "zeta_points": (_int, 351),
    "zeta_spacing": (_spacing, "linear"),
    "engine": (_pdf_engine, "approach1"),
    "output": (str, "pdf"),
    **_COMMON,
}

SCHEMAS = {"sweep": SWEEP_SCHEMA, "pdf": PDF_SCHEMA}


def load_config(text: str, command: str, overrides: dict | None = None) -> dict:
    """Parse and validate config ``text`` for ``command``.

    ``overrides`` (already typed) replace file values after parsing, the way
    command-line flags do.  Raises :class:`ConfigError`.
    """
    schema = SCHEMAS[command]
    if not re.search(r"^\s*\[", text, flags=re.M):
        text = f"[{command}]\n" + text
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                   default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(exc.option, "given more than once") from None
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    extra = [s for s in cp.sections() if s != command]
    if extra:
        raise ConfigError(f"[{extra[0]}]", f"unknown section; expected [{command}]")
    raw = dict(cp[command]) if cp.has_section(command) else {}
    cfg: dict[str, Any] = {}
    for key, val in raw.items():
        if key not in schema:
            raise ConfigError(key, "unknown key")
        parse, _ = schema[key]
        try:
            cfg[key] = parse(val)
        except (ValueError, DomainError) as exc:
            raise ConfigError(key, str(exc)) from None
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val
    for key, (_, default) in schema.items():
        if key not in cfg:
            if default is REQUIRED:
                raise ConfigError(key, "required key is missing")
            cfg[key] = list(default) if isinstance(default, list) else default
    if cfg["workers"] is None:
        try:
            cfg["workers"] = default_workers()
        except DomainError as exc:
            raise ConfigError("AC_MASK_WORKERS", str(exc)) from None
    _check_ranges(cfg, command)
    return cfg


def _need(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise ConfigError(key, msg)


def _check_ranges(cfg: dict, command: str) -> None:
    Ms = cfg["M"] if command == "sweep" else [cfg["M"]]
    Ns = cfg["N"] if command == "sweep" else [cfg["N"]]
    Ks = cfg["K"] if command == "sweep" else [cfg["K"]]
    _need(all(M >= 2 for M in Ms), "M", "modulation orders must be >= 2")
    _need(all(N >= 1 for N in Ns), "N", "antenna counts must be >= 1")
    _need(all(K >= 0 for K in Ks), "K", "K-factors must be >= 0")
    _need(cfg["omega"] > 0, "omega", "must be > 0")
    _need(0 <= cfg["seed"] < 2**64, "seed", "must be an unsigned 64-bit integer")
    _need(cfg["workers"] >= 1, "workers", "must be >= 1")
    _need(cfg["trials"] >= 1000, "trials", "must be >= 1000")
    for key in ("max_terms", "asymp_order", "quad_order"):
        _need(cfg[key] >= 1, key, "must be >= 1")
    _need(cfg["term_rel_tol"] > 0, "term_rel_tol", "must be > 0")
    if command == "sweep":
        _need(0 < cfg["confidence_level"] < 1, "confidence_level", "must lie in (0, 1)")
        _need(cfg["snr_step"] > 0, "snr_step", "must be > 0")
        stop = cfg["snr_stop"]
        _need(stop is None or stop >= cfg["snr_start"], "snr_stop", "must be >= snr_start")
        _need(all(v >= 0 for v in cfg["phase_noise"]), "phase_noise", "levels must be >= 0")
        analytic = [e for e in cfg["engines"] if e != MC]
        _need(not analytic or DetectorKind.AC_HEURISTIC.value in cfg["detectors"], "engines",
              "analytic engines need ac_heuristic among the detectors")
    else:
        M = cfg["M"]
        if cfg["m"] is None:
            cfg["m"] = list(range(M))
        _need(all(0 <= m < M for m in cfg["m"]), "m", f"symbol indices must lie in [0, {M})")
        _need(cfg["zeta_start"] >= 0, "zeta_start", "must be >= 0")
        _need(cfg["zeta_stop"] > cfg["zeta_start"], "zeta_stop", "must exceed zeta_start")
        _need(cfg["zeta_points"] >= 2, "zeta_points", "must be >= 2")


def snr_grid(cfg: dict) -> list[float]:
    """Inclusive SNR grid ``snr_start, snr_start + step, ..., <= snr_stop``."""
    start, step = cfg["snr_start"], cfg["snr_step"]
    stop = start if cfg["snr_stop"] is None else cfg["snr_stop"]
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(n)]


def _series(cfg: dict) -> SeriesConfig:
    return SeriesConfig(cfg["max_terms"], cfg["term_rel_tol"], cfg["asymp_order"],
                        cfg["quad_order"])


# ---------------------------------------------------------------------------
# Row producers
# ---------------------------------------------------------------------------

def format_value(v) -> str:
    """CSV text of one cell: empty for ``None``, 17 significant digits for floats."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def sweep_rows(cfg: dict) -> list[tuple]:
    """Rows of the sweep in output order.  May raise engine errors."""
    grid = snr_grid(cfg)
    series = _series(cfg)
    analytic = [e for e in cfg["engines"] if e != MC]
    rows = []
    cache: dict[tuple, float] = {}
    for M in cfg["M"]:
        for N in cfg["N"]:
            for K in cfg["K"]:
                base = A.SerScenario.from_snr(M, N, K, grid[0], omega=cfg["omega"],
                                              phi=cfg["phi"], series=series)
                for pn in cfg["phase_noise"]:
                    if MC in cfg["engines"]:
                        mc = McConfig(cfg["trials"], cfg["seed"], cfg["workers"],
                                      cfg["confidence_level"], pn)
                        for det in cfg["detectors"]:
                            curve = run_curve(det, base, grid, mc)
                            for pt in curve.points:
                                if pt.rejected:
                                    log.warning("%s M=%d N=%d K=%g %g dB: %d degenerate trials "
                                                "rejected", det, M, N, K, pt.snr_db, pt.rejected)
                                rows.append(("mc", det, "", M, N, K, cfg["omega"], pn, pt.snr_db,
                                             pt.ser, pt.ci_low, pt.ci_high, pt.errors, pt.trials,
                                             cfg["seed"]))
                    for eng in analytic:
                        for snr in grid:
                            key = (M, N, K, eng, snr)
                            if key not in cache:
                                sc = A.SerScenario.from_snr(M, N, K, snr, omega=cfg["omega"],
                                                            phi=cfg["phi"], series=series)
                                cache[key] = A.ser_heuristic(sc, eng, fallback=cfg["fallback"])
                            rows.append(("analytic", DetectorKind.AC_HEURISTIC.value, eng, M, N,
                                         K, cfg["omega"], pn, snr, cache[key], None, None, None,
                                         None, None))
    # lexicographic over the sweep tuple, then SNR
    rows.sort(key=lambda r: r[:9])
    return rows


def zeta_grid(cfg: dict) -> np.ndarray:
    """Emitted ``zeta`` grid; ``quadratic`` spacing crowds points near ``zeta_start``."""
    u = np.linspace(0.0, 1.0, cfg["zeta_points"])
    if cfg["zeta_spacing"] == "quadratic":
        u = u * u
    return cfg["zeta_start"] + (cfg["zeta_stop"] - cfg["zeta_start"]) * u


def _hist_edges(zeta: np.ndarray) -> np.ndarray:
    mid = 0.5 * (zeta[1:] + zeta[:-1])
    first = max(zeta[0] - (mid[0] - zeta[0]), 0.0)
    last = zeta[-1] + (zeta[-1] - mid[-1])
    return np.concatenate(([first], mid, [last]))


def pdf_rows(cfg: dict) -> list[tuple]:
    """Rows ``(m, zeta, pdf_analytic, pdf_mc_histogram)`` ordered by ``(m, zeta)``.

    The histogram bin of grid point ``zeta_j`` spans halfway to its
    neighbours (clipped at zero), so analytic and simulated values refer to
    the same point.  On a coarse grid the histogram is a bin average and
    differs from the density where it curves sharply.
    """
    sc = A.SerScenario.from_snr(cfg["M"], cfg["N"], cfg["K"], cfg["snr_db"], omega=cfg["omega"],
                                phi=cfg["phi"], series=_series(cfg))
    zeta = zeta_grid(cfg)
    edges = _hist_edges(zeta)
    width = np.diff(edges)
    rows = []
    for m in sorted(cfg["m"]):
        if cfg["engine"] == A.Engine.NUMERIC.value:
            f = A.pdf_zeta_numeric(zeta, m, sc)
        else:
            try:
                f = A.pdf_zeta(zeta, m, sc)
            except (ConvergenceError, RegimeError) as exc:
                if not cfg["fallback"]:
                    raise
                log.warning("approach1 density failed for m=%d (%s); using numeric", m, exc)
                f = A.pdf_zeta_numeric(zeta, m, sc)
        counts = zeta_histogram(m, sc, edges, cfg["trials"], cfg["seed"], cfg["workers"])
        hist = counts / (cfg["trials"] * width)
        rows.extend((m, float(z), float(a), float(h)) for z, a, h in zip(zeta, f, hist))
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def render_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def _json_value(v):
    if v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return int(v)
    return float(v)


def render_json(columns, rows, cfg: dict, command: str, wall: float) -> str:
    doc = {
        "metadata": {
            "artifact_version": __version__,
            "command": command,
            "config_hash": config_hash(cfg),
            "wall_clock_seconds": wall,
            "config": cfg,
        },
        "columns": list(columns),
        "rows": [[_json_value(v) for v in r] for r in rows],
    }
    return json.dumps(doc, indent=1) + "\n"


def config_hash(cfg: dict) -> str:
    """SHA-256 of the resolved config, independent of key order."""
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _out_base(path: str) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".csv", ".json") else p


def _write(base: Path, fmt: str, csv_text: str, json_text: Callable[[], str]) -> list[Path]:
    written = []
    base.parent.mkdir(parents=True, exist_ok=True)
    if fmt in ("csv", "both"):
        p = base.with_name(base.name + ".csv")
        p.write_text(csv_text)
        written.append(p)
    if fmt in ("json", "both"):
        p = base.with_name(base.name + ".json")
        p.write_text(json_text())
        written.append(p)
    return written


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@dataclass
class _Fail(Exception):
    code: int
    msg: str


def _read_config(args, command: str) -> dict:
    if args.config is None:
        raise _Fail(EXIT_CONFIG, f"{command} needs --config")
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read config: {exc}") from None
    overrides = {"seed": args.seed, "trials": args.trials, "workers": args.workers,
                 "format": args.format}
    if args.out is not None:
        overrides["output"] = args.out
    try:
        return load_config(text, command, overrides)
    except ConfigError as exc:
        raise _Fail(EXIT_CONFIG, str(exc)) from None


def _run_command(args, command: str) -> int:
    cfg = _read_config(args, command)
    t0 = time.perf_counter()
    try:
        if command == "sweep":
            columns, rows = SWEEP_COLUMNS, sweep_rows(cfg)
        else:
            columns, rows = PDF_COLUMNS, pdf_rows(cfg)
    except (ConvergenceError, RegimeError) as exc:
        raise _Fail(EXIT_CONVERGENCE, f"engine failure: {exc}") from None
    except DomainError as exc:
        raise _Fail(EXIT_CONFIG, f"invalid parameters: {exc}") from None
    wall = time.perf_counter() - t0
    try:
        written = _write(_out_base(cfg["output"]), cfg["format"], render_csv(columns, rows),
                         lambda: render_json(columns, rows, cfg, command, wall))
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot write output: {exc}") from None
    for p in written:
        print(f"wrote {p} ({len(rows)} rows)")
    return EXIT_OK


def _run_validate(args) -> int:
    from .validation import MODULES, run_checks

    if args.filter is not None and args.filter not in MODULES:
        raise _Fail(EXIT_CONFIG, f"--filter: unknown module {args.filter!r}; "
                                 f"choose from {', '.join(MODULES)}")
    results = run_checks(args.filter)
    width = max((len(f"{r.module}.{r.name}") for r in results), default=10)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  {r.module + '.' + r.name:<{width}}  {r.seconds:7.2f}s  {r.detail}")
    failed = [r for r in results if not r.passed]
    if failed:
        first = failed[0]
        print(f"validation failed: {first.module}.{first.name}: {first.detail}", file=sys.stderr)
        return EXIT_VALIDATE
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="acmask", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file")
        p.add_argument("--out", help="output path without extension (overrides 'output')")
        p.add_argument("--format", choices=FORMATS, help="output format (overrides 'format')")
        p.add_argument("--seed", type=int, help="master seed (overrides 'seed')")
        p.add_argument("--trials", type=int, help="Monte Carlo trials (overrides 'trials')")
        p.add_argument("--workers", type=int,
                       help="worker processes (overrides 'workers'; default AC_MASK_WORKERS or 1)")
        p.add_argument("-v", "--verbose", action="store_true", help="log progress")

    common(sub.add_parser("sweep", help="SER sweep over detectors, engines and scenarios"))
    common(sub.add_parser("pdf", help="analytic and simulated density of zeta"))
    pv = sub.add_parser("validate", help="run the self-check battery")
    pv.add_argument("--filter", help="run only the checks of this module")
    pv.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return _run_validate(args)
        return _run_command(args, args.command)
    except _Fail as f:
        print(f"error: {f.msg}", file=sys.stderr)
        return f.code


if __name__ == "__main__":
    sys.exit(main())
