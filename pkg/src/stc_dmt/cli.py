"""Declarative experiment runner and the `stc-dmt` command line.

An experiment is a single JSON document (fail-closed: unknown fields are
rejected) naming a code, a channel, a mode and its numeric knobs.  Every
run writes `result.csv` (deterministic bytes, seed and config hash embedded
as comment lines), `meta.json` (config echo, version, wall time, fitted
numbers) and optionally `plot.svg` with the empirical points over the
relevant theoretical curve.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import re
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import __version__, algebra, dmt
from .channel import ChannelSpec, Model
from .decoder import ErrorEstimate, error_prob_mc
from .dmt import DmtCurve, InsufficientData, slope_fit
from .lattice import (Ambient, MatrixLattice, NoPoints, ShellTooLarge, delta_s,
                      enumerate_shell, load_lattice, min_abs_pdet,
                      min_abs_pdet_sq_exact)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_SHELL = 3
EXIT_DATA = 4

_EXACT_PROBE_LIMIT = 200_000


class ConfigError(ValueError):
    """Bad experiment configuration (unknown field, missing value, bad type)."""


_CODE_FACTORIES = {
    "alamouti": algebra.alamouti_lattice,
    "real_sqrt3": algebra.real_sqrt3_lattice,
    "unramified_gamma3": algebra.unramified_gamma3_lattice,
    "golden": algebra.golden_code,
    "diag_golden": lambda: algebra.diag_replicate(algebra.golden_code(), 2),
}


def resolve_code(code: str) -> MatrixLattice:
    """Build the lattice named by a code string.

    Plain names from the registry, `nf_multiblock(d)` for the number-field
    multi-block code, `import(path)` for the text interchange format.
    """
    if code in _CODE_FACTORIES:
        return _CODE_FACTORIES[code]()
    m = re.fullmatch(r"nf_multiblock\((\d+)\)", code)
    if m:
        return algebra.number_field_multiblock(int(m.group(1)))
    m = re.fullmatch(r"import\((.+)\)", code)
    if m:
        path = Path(m.group(1))
        if not path.exists():
            raise ConfigError(f"lattice file not found: {path}")
        return load_lattice(path)
    known = sorted(_CODE_FACTORIES) + ["nf_multiblock(d)", "import(path)"]
    raise ConfigError(f"unknown code {code!r}; expected one of {known}")


def theory_curve(code: str, lat: MatrixLattice, m_rx: int) -> DmtCurve:
    """The DMT curve a code is held against on an m-antenna receiver.

    diag_golden on one receive antenna gets its dedicated curve; otherwise
    the ambient space decides: real or quaternionic lattices follow the
    restricted curves (scaled by block count), full-rank complex lattices
    the optimal curve.  Rank-deficient complex lattices (the unramified
    gamma=3 example) are tagged with the real-conjugate curve, which for
    them is conjectural.
    """
    n, k = lat.n, lat.blocks
    if code == "diag_golden" and m_rx == 1:
        return dmt.diag_golden_dmt()
    if lat.ambient is Ambient.REAL:
        base = dmt.real_dmt(n, m_rx)
    elif lat.ambient is Ambient.QUATERNION:
        base = dmt.quaternion_dmt(n, m_rx)
    elif lat.dim == 2 * n * n * k:
        base = dmt.optimal_dmt(n, m_rx)
    else:
        base = dmt.real_dmt(n, m_rx)
        base = DmtCurve(base.breakpoints, label=base.label + " (conjectured)")
    return dmt.scale_multiblock(base, k) if k > 1 else base


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_MODEL_NAMES = {m.value: m for m in Model}
_MODES = ("curve", "outage", "simulate", "probe")
_PROBES = ("mindet", "delta_s", "count")


@dataclass(frozen=True)
class RhoGrid:
    start: float  # exponent of the first grid point
    stop: float
    count: int

    def values(self) -> list[float]:
        return [10.0 ** e for e in np.linspace(self.start, self.stop, self.count)]


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    code: str
    channel: ChannelSpec
    r: float = 0.0
    rho: RhoGrid | None = None
    trials: int = 100_000
    seed: int = 0
    shell_m: tuple[float, ...] = ()
    what: str = "mindet"
    s: int = 1
    plot: bool = True
    out_dir: str = "results"
    raw: dict = field(default_factory=dict, compare=False)

    def canonical(self) -> dict:
        return {
            "mode": self.mode, "code": self.code,
            "channel": {"n": self.channel.n_tx, "m": self.channel.m_rx,
                        "blocks": self.channel.blocks, "model": self.channel.model.value},
            "r": self.r,
            "rho_exponents": None if self.rho is None else
                {"start": self.rho.start, "stop": self.rho.stop, "count": self.rho.count},
            "trials": self.trials, "seed": self.seed,
            "shell_m": list(self.shell_m), "what": self.what, "s": self.s,
            "plot": self.plot, "out_dir": self.out_dir,
        }

    def digest(self) -> str:
        """Hash of the experiment-defining fields (not presentation/paths)."""
        doc = self.canonical()
        doc.pop("plot")
        doc.pop("out_dir")
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a config document, rejecting unknown fields."""
    _require(isinstance(doc, dict), "config must be a JSON object")
    allowed = {"mode", "code", "channel", "r", "rho_exponents", "trials", "seed",
               "shell_m", "what", "s", "plot", "out_dir"}
    unknown = set(doc) - allowed
    _require(not unknown, f"unknown config fields: {sorted(unknown)}")
    mode = doc.get("mode")
    _require(mode in _MODES, f"mode must be one of {_MODES}, got {mode!r}")
    code = doc.get("code")
    _require(isinstance(code, str) and code, "code must be a nonempty string")
    lat = resolve_code(code)

    ch = doc.get("channel", {})
    _require(isinstance(ch, dict), "channel must be an object")
    unknown = set(ch) - {"n", "m", "blocks", "model"}
    _require(not unknown, f"unknown channel fields: {sorted(unknown)}")
    n = ch.get("n", lat.n)
    m = ch.get("m", 1)
    blocks = ch.get("blocks", lat.blocks)
    model_name = ch.get("model", "complex")
    _require(model_name in _MODEL_NAMES,
             f"channel model must be one of {sorted(_MODEL_NAMES)}, got {model_name!r}")
    for name, v in (("n", n), ("m", m), ("blocks", blocks)):
        _require(isinstance(v, int) and v >= 1, f"channel {name} must be a positive integer")
    if mode in ("simulate", "probe") or (mode == "curve" and "n" not in ch):
        _require(n == lat.n and blocks == lat.blocks,
                 f"channel geometry ({n},{blocks}) does not match code {code} "
                 f"({lat.n},{lat.blocks})")
    try:
        spec = ChannelSpec(n_tx=n, m_rx=m, blocks=blocks, model=_MODEL_NAMES[model_name])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    r = doc.get("r", 0.0)
    _require(isinstance(r, (int, float)) and r >= 0, "r must be a nonnegative number")

    rho = None
    if "rho_exponents" in doc:
        ge = doc["rho_exponents"]
        _require(isinstance(ge, dict), "rho_exponents must be an object")
        unknown = set(ge) - {"start", "stop", "count"}
        _require(not unknown, f"unknown rho_exponents fields: {sorted(unknown)}")
        _require(all(k in ge for k in ("start", "stop", "count")),
                 "rho_exponents needs start, stop and count")
        _require(isinstance(ge["count"], int) and ge["count"] >= 1,
                 "rho_exponents.count must be a positive integer")
        rho = RhoGrid(float(ge["start"]), float(ge["stop"]), ge["count"])
    if mode in ("simulate", "outage"):
        _require(rho is not None, f"mode {mode} needs rho_exponents")
        _require(rho.count >= 2, "slope modes need a grid of at least 2 rho points")

    trials = doc.get("trials", 100_000)
    _require(isinstance(trials, int) and trials >= 1, "trials must be a positive integer")
    seed = doc.get("seed", 0)
    _require(isinstance(seed, int), "seed must be an integer")

    shell_m = doc.get("shell_m", [10.0])
    if isinstance(shell_m, (int, float)):
        shell_m = [shell_m]
    _require(isinstance(shell_m, list) and all(isinstance(x, (int, float)) and x > 0 for x in shell_m),
             "shell_m must be a positive number or list of them")

    what = doc.get("what", "mindet")
    _require(what in _PROBES, f"what must be one of {_PROBES}, got {what!r}")
    s = doc.get("s", 1)
    _require(isinstance(s, int) and s >= 1, "s must be a positive integer")
    plot = doc.get("plot", True)
    _require(isinstance(plot, bool), "plot must be a boolean")
    out_dir = doc.get("out_dir", "results")
    _require(isinstance(out_dir, str) and out_dir, "out_dir must be a nonempty string")

    return ExperimentConfig(mode=mode, code=code, channel=spec, r=float(r), rho=rho,
                            trials=trials, seed=seed, shell_m=tuple(float(x) for x in shell_m),
                            what=what, s=s, plot=plot, out_dir=out_dir, raw=doc)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentResult:
    csv_path: Path
    meta_path: Path
    plot_path: Path | None
    header: str
    rows: tuple[str, ...]
    meta: dict


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _exact_probe_value(lat: MatrixLattice, M: float) -> str:
    """Min |pdet| over the shell, exactly when the lattice supports it."""
    if lat.det_sq_hook is not None and len(enumerate_shell(lat, M)) <= _EXACT_PROBE_LIMIT:
        sq = min_abs_pdet_sq_exact(lat, M)
        num, den = sq.numerator, sq.denominator
        rn, rd = math.isqrt(num), math.isqrt(den)
        if rn * rn == num and rd * rd == den:
            return _fmt(Fraction(rn, rd))
        return repr(math.sqrt(num / den))
    return repr(min_abs_pdet(lat, M))


def _estimate_rows(points: list[ErrorEstimate]) -> list[str]:
    rows = []
    for p in points:
        lo, hi = p.ci
        rows.append(f"{repr(p.rho)},{repr(p.p_hat)},{repr(lo)},{repr(hi)}")
    return rows


def run(config: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    """Execute one experiment and write result.csv / meta.json / plot.svg."""
    t0 = time.monotonic()
    out = Path(out_dir) if out_dir is not None else Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lat = resolve_code(config.code)
    meta: dict = {
        "version": __version__,
        "seed": config.seed,
        "config": config.canonical(),
        "config_sha256": config.digest(),
        "code_dim": lat.dim,
        "code_ambient": lat.ambient.value,
    }

    plot_fn = None
    if config.mode == "curve":
        curve = theory_curve(config.code, lat, config.channel.m_rx)
        header = "r,d"
        rows = curve.csv_rows()
        meta["curve_label"] = curve.label
        plot_fn = lambda path: _plot_curves(path, config, [curve, _optimal_reference(config, lat)])
    elif config.mode == "probe":
        header = "M,value"
        rows = []
        for M in config.shell_m:
            if config.what == "mindet":
                value = _exact_probe_value(lat, M)
            elif config.what == "delta_s":
                value = repr(delta_s(lat, M, config.s))
            else:
                value = str(len(enumerate_shell(lat, M)))
            rows.append(f"{_fmt(M)},{value}")
        plot_fn = None
    elif config.mode == "simulate":
        header = "rho,p_hat,ci_lo,ci_hi"
        points = [error_prob_mc(lat, config.channel, rho, config.r, config.trials, config.seed)
                  for rho in config.rho.values()]
        rows = _estimate_rows(points)
        meta.update(_fit_meta(points))
        curve = theory_curve(config.code, lat, config.channel.m_rx)
        plot_fn = lambda path: _plot_sweep(path, config, points,
                                           [(curve.label, curve(config.r))],
                                           "codeword error rate")
    else:  # outage
        header = "rho,p_hat,ci_lo,ci_hi"
        result = dmt.outage_exponent_mc(config.channel, config.r, config.rho.values(),
                                        config.trials, config.seed)
        rows = _estimate_rows(list(result.points))
        meta["fitted_exponent"] = result.exponent
        meta["fitted_stderr"] = result.stderr
        meta["dropped_rho"] = list(result.dropped)
        curve = theory_curve(config.code, lat, config.channel.m_rx)
        plot_fn = lambda path: _plot_sweep(path, config, list(result.points),
                                           [(curve.label, curve(config.r))],
                                           "outage probability")

    csv_path = out / "result.csv"
    preamble = [
        f"# stc-dmt {__version__} mode={config.mode} code={config.code}",
        f"# seed={config.seed} config_sha256={config.digest()}",
    ]
    csv_path.write_text("\n".join(preamble + [header] + list(rows)) + "\n")

    plot_path = None
    if config.plot and plot_fn is not None:
        plot_path = out / "plot.svg"
        # deterministic SVG: fixed hash salt, no creation date, seed embedded
        with matplotlib.rc_context({"svg.hashsalt": config.digest()}):
            plot_fn(plot_path)

    meta["wall_time_s"] = round(time.monotonic() - t0, 3)
    meta["outputs"] = {"csv": csv_path.name,
                       "plot": plot_path.name if plot_path else None}
    meta_path = out / "meta.json"
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return ExperimentResult(csv_path=csv_path, meta_path=meta_path, plot_path=plot_path,
                            header=header, rows=tuple(rows), meta=meta)


def _fit_meta(points: list[ErrorEstimate]) -> dict:
    usable = [(p.rho, p.p_hat) for p in points if p.errors > 0]
    if len(usable) < 2:
        return {"fitted_diversity": None, "fitted_stderr": None}
    fit = slope_fit(usable)
    return {"fitted_diversity": fit.diversity,
            "fitted_stderr": None if math.isnan(fit.stderr) else fit.stderr}


def _optimal_reference(config: ExperimentConfig, lat: MatrixLattice) -> DmtCurve:
    base = dmt.optimal_dmt(lat.n, config.channel.m_rx)
    return dmt.scale_multiblock(base, lat.blocks) if lat.blocks > 1 else base


def _plot_curves(path: Path, config: ExperimentConfig, curves: list[DmtCurve]) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    seen = set()
    for curve in curves:
        if curve.label in seen:
            continue
        seen.add(curve.label)
        rs = [float(r) for r, _ in curve.breakpoints]
        ds = [float(d) for _, d in curve.breakpoints]
        ax.plot(rs, ds, marker="o", label=curve.label)
    ax.set_xlabel("multiplexing gain r")
    ax.set_ylabel("diversity gain d(r)")
    ax.set_title(f"{config.code}, m={config.channel.m_rx}")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=_svg_metadata(config))
    plt.close(fig)


def _plot_sweep(path: Path, config: ExperimentConfig, points: list[ErrorEstimate],
                references: list[tuple[str, float]], ylabel: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    rhos = np.array([p.rho for p in points])
    probs = np.array([p.p_hat for p in points])
    los = np.array([p.ci[0] for p in points])
    his = np.array([p.ci[1] for p in points])
    mask = probs > 0
    ax.errorbar(rhos[mask], probs[mask],
                yerr=[probs[mask] - los[mask], his[mask] - probs[mask]],
                fmt="o-", capsize=3, label="Monte Carlo")
    anchor = probs[mask][0] if mask.any() else None
    for name, d in references:
        if anchor is None or d <= 0:
            continue
        ref = anchor * (rhos / rhos[mask][0]) ** (-d)
        ax.plot(rhos, ref, "--", label=f"slope {d:g} ({name})")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("SNR rho")
    ax.set_ylabel(ylabel)
    ax.set_title(f"{config.code}, {config.mode}, r={config.r:g}, m={config.channel.m_rx}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata=_svg_metadata(config))
    plt.close(fig)


def _svg_metadata(config: ExperimentConfig) -> dict:
    return {"Date": None,
            "Description": f"stc-dmt {__version__} seed={config.seed} "
                           f"config_sha256={config.digest()}"}


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _parse_rho_exp(text: str) -> dict:
    m = re.fullmatch(r"([-\d.]+):([-\d.]+):(\d+)", text)
    if not m:
        raise ConfigError(f"bad rho exponent spec {text!r}, expected start:stop:count")
    return {"start": float(m.group(1)), "stop": float(m.group(2)), "count": int(m.group(3))}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stc-dmt",
                                     description="space-time lattice code DMT experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment described by a JSON config")
    p_run.add_argument("config", help="path to the experiment JSON document")
    p_run.add_argument("--out", help="output directory (overrides config out_dir)")

    p_curve = sub.add_parser("curve", help="emit the theoretical DMT curve of a code")
    p_curve.add_argument("--code", required=True)
    p_curve.add_argument("--m", type=int, required=True, help="receive antennas")
    p_curve.add_argument("--out", default="results")
    p_curve.add_argument("--no-plot", action="store_true")

    p_probe = sub.add_parser("probe", help="shell figure-of-merit probe")
    p_probe.add_argument("--code", required=True)
    p_probe.add_argument("--what", default="mindet", choices=list(_PROBES))
    p_probe.add_argument("--M", type=float, action="append", required=True,
                         help="shell radius (repeatable)")
    p_probe.add_argument("--s", type=int, default=1, help="s for delta_s probes")
    p_probe.add_argument("--out", default="results")

    p_sim = sub.add_parser("simulate", help="Monte Carlo error-rate sweep")
    p_sim.add_argument("--code", required=True)
    p_sim.add_argument("--m", type=int, required=True)
    p_sim.add_argument("--r", type=float, required=True)
    p_sim.add_argument("--rho-exp", required=True, help="start:stop:count in decades")
    p_sim.add_argument("--trials", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--model", default="complex", choices=sorted(_MODEL_NAMES))
    p_sim.add_argument("--out", default="results")
    p_sim.add_argument("--no-plot", action="store_true")
    return parser


def _config_from_args(args: argparse.Namespace) -> tuple[ExperimentConfig, str | None]:
    if args.command == "run":
        return load_config(args.config), args.out
    if args.command == "curve":
        doc = {"mode": "curve", "code": args.code, "channel": {"m": args.m},
               "plot": not args.no_plot, "out_dir": args.out}
        return config_from_dict(doc), None
    if args.command == "probe":
        doc = {"mode": "probe", "code": args.code, "what": args.what,
               "shell_m": args.M, "s": args.s, "plot": False, "out_dir": args.out}
        return config_from_dict(doc), None
    doc = {"mode": "simulate", "code": args.code,
           "channel": {"m": args.m, "model": args.model},
           "r": args.r, "rho_exponents": _parse_rho_exp(args.rho_exp),
           "trials": args.trials, "seed": args.seed,
           "plot": not args.no_plot, "out_dir": args.out}
    return config_from_dict(doc), None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config, out_override = _config_from_args(args)
        result = run(config, out_override)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ShellTooLarge as exc:
        print(f"error[shell-too-large]: {exc}", file=sys.stderr)
        return EXIT_SHELL
    except (NoPoints, InsufficientData) as exc:
        print(f"error[insufficient-data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # surfaced with module provenance
        print(f"error[{type(exc).__module__}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(result.csv_path)
    for row in result.rows[:12]:
        print(row)
    if len(result.rows) > 12:
        print(f"... ({len(result.rows)} rows)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
