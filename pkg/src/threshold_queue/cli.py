"""Command-line front end: ``threshold-queue {delay,equilibria,welfare,sweep,simulate}``.

Parameters come from (lowest to highest precedence) built-in defaults, a
``--preset``, a ``--config`` file of ``key=value`` lines, and explicit flags.
Tabular output is CSV with a header row; reals are written in scientific
notation with 12 significant digits and missing values as empty fields.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import Market, ServicePolicy, waiting_time
from .equilibrium import DEFAULT_TOL, find_equilibria
from .errors import ConvergenceError, DomainError, EmptyEstimateError, QueueModelError
from .sim import SimConfig, simulate
from .welfare import WELFARE_GRID, optimize_welfare

EXIT_USAGE, EXIT_DOMAIN, EXIT_CONVERGENCE = 2, 3, 4

DEFAULTS = {
    "T": 3, "mu_l": 0.1, "R": 9.0, "Lambda": 1.0, "lambda": 0.5, "tol": DEFAULT_TOL,
    "seed": 0, "grid": None, "horizon": 1_000_000, "warmup": None, "lambda_max": 0.99,
    "vary": None, "start": None, "stop": None, "outputs": None, "jobs": 1,
}

PRESETS = {
    "fig2": {"vary": "T", "start": 1, "stop": 40, "grid": 40, "R": 25.0, "mu_l": 0.25,
             "outputs": "equilibria,welfare"},
    "fig3": {"vary": "R", "start": 1.0, "stop": 40.0, "T": 10, "mu_l": 0.2,
             "outputs": "equilibria,welfare"},
    "fig4": {"vary": "mu_l", "start": 0.01, "stop": 0.99, "T": 10, "R": 20.0,
             "outputs": "equilibria,welfare"},
    "fig5": {"vary": "R", "start": 1.0, "stop": 25.0, "T": 3, "mu_l": 0.1,
             "outputs": "equilibria,welfare"},
    "fig6": {"vary": "mu_l", "start": 0.01, "stop": 0.99, "T": 3, "R": 5.0,
             "outputs": "equilibria,welfare"},
    "fig7": {"vary": "lambda", "start": 0.0, "stop": 0.99, "T": 1, "mu_l": 0.25,
             "outputs": "delay"},
}

SWEEP_POINTS = 200
VARIABLES = ("T", "R", "mu_l", "lambda")
OUTPUTS = ("delay", "equilibria", "welfare", "simulation")
COLUMNS = {
    "delay": ["W"],
    "equilibria": ["eq_count", "eq_interior", "eq_min", "eq_max", "eq_rates", "eq_stability"],
    "welfare": ["lambda_star", "welfare_star", "bimodal"],
    "simulation": ["sim_mean", "sim_half_width_95"],
}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class SweepSpec:
    vary: str
    values: tuple
    fixed: dict = field(default_factory=dict)
    outputs: tuple = ("equilibria", "welfare")

    def __post_init__(self):
        if self.vary not in VARIABLES:
            raise UsageError(f"cannot vary {self.vary!r}; choose from {', '.join(VARIABLES)}")
        if not self.values:
            raise UsageError("sweep range is empty")
        bad = [o for o in self.outputs if o not in OUTPUTS]
        if bad or not self.outputs:
            raise UsageError(f"unknown outputs {bad}; choose from {', '.join(OUTPUTS)}")

    def header(self) -> list:
        cols = [self.vary]
        for o in OUTPUTS:
            if o in self.outputs:
                cols += COLUMNS[o]
        return cols


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    if math.isnan(v):
        return ""
    return f"{v:.11e}"


def write_csv(rows, header, out=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def sweep_point(spec: SweepSpec, index: int, value) -> list:
    p = {**DEFAULTS, **spec.fixed, spec.vary: value}
    policy = ServicePolicy(int(p["T"]), float(p["mu_l"]))
    market = Market(float(p["R"]), float(p["Lambda"]))
    row = [value]
    if "delay" in spec.outputs:
        row.append(waiting_time(policy, float(p["lambda"])).w)
    if "equilibria" in spec.outputs:
        eq = find_equilibria(policy, market, tol=float(p["tol"]))
        row += [len(eq), eq.count_interior, eq.min_rate, eq.max_rate,
                ";".join(fmt(r) for r in eq.rates),
                ";".join(pt.stability.value for pt in eq)]
    if "welfare" in spec.outputs:
        opt = optimize_welfare(policy, market)
        row += [opt.lambda_star, opt.value, opt.bimodal]
    if "simulation" in spec.outputs:
        cfg = SimConfig(policy, float(p["lambda"]), int(p["horizon"]), p["warmup"],
                        seed=int(p["seed"]) + index)
        try:
            est = simulate(cfg)
            row += [est.mean_sojourn, est.half_width_95]
        except EmptyEstimateError:
            row += [math.nan, math.nan]
    return row


def _sweep_point_star(args):
    return sweep_point(*args)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list:
    """Rows in sweep order; with ``jobs > 1`` points run in worker processes."""
    tasks = [(spec, i, v) for i, v in enumerate(spec.values)]
    if jobs <= 1:
        return [sweep_point(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point_star, tasks))


def sweep_values(vary, start, stop, count):
    if start is None or stop is None:
        raise UsageError("sweep needs --start and --stop (or a --preset)")
    if count is None:
        count = SWEEP_POINTS
    if count < 1:
        raise UsageError("--grid must be >= 1")
    if vary == "T":
        lo, hi = int(start), int(stop)
        if hi < lo:
            raise UsageError("sweep range is empty")
        pts = np.unique(np.round(np.linspace(lo, hi, min(count, hi - lo + 1))).astype(int))
        return tuple(int(v) for v in pts)
    if count == 1:
        return (float(start),)
    return tuple(float(v) for v in np.linspace(float(start), float(stop), count))


# --- argument handling ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path) -> dict:
    out = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = val
    return out


_CASTS = {"T": int, "seed": int, "grid": int, "horizon": int, "warmup": int, "jobs": int,
          "start": float, "stop": float, "vary": str, "outputs": str}


def _resolve(args) -> dict:
    p = dict(DEFAULTS)
    if getattr(args, "preset", None):
        p.update(PRESETS[args.preset])
    if getattr(args, "config", None):
        p.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            p[key] = val
    for key, val in p.items():
        if val is None or key in ("vary", "outputs"):
            continue
        try:
            p[key] = _CASTS.get(key, float)(val)
        except ValueError:
            raise UsageError(f"bad value for {key}: {val!r}") from None
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--T", dest="T", type=int)
    common.add_argument("--mu-l", dest="mu_l", type=float)
    common.add_argument("--R", dest="R", type=float)
    common.add_argument("--Lambda", dest="Lambda", type=float)
    common.add_argument("--lambda", dest="lambda", type=float, help="effective arrival rate")
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--grid", type=int)
    common.add_argument("--out")
    common.add_argument("--config", help="file of key=value lines; flags override it")

    parser = _Parser(prog="threshold-queue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("delay", parents=[common], help="W(lambda) on a grid of rates")
    d.add_argument("--lambda-max", dest="lambda_max", type=float)
    sub.add_parser("equilibria", parents=[common], help="all symmetric equilibria")
    sub.add_parser("welfare", parents=[common], help="socially optimal arrival rate")
    s = sub.add_parser("sweep", parents=[common], help="vary one parameter, write CSV")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--vary", choices=VARIABLES)
    s.add_argument("--start", type=float)
    s.add_argument("--stop", type=float)
    s.add_argument("--outputs", help="comma list from " + ",".join(OUTPUTS))
    s.add_argument("--jobs", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--warmup", type=int)
    m = sub.add_parser("simulate", parents=[common], help="discrete-event estimate of W")
    m.add_argument("--horizon", type=int)
    m.add_argument("--warmup", type=int)
    return parser


def _policy(p):
    return ServicePolicy(p["T"], p["mu_l"])


def _market(p):
    return Market(p["R"], p["Lambda"])


def cmd_delay(p, out):
    n = p["grid"] if p["grid"] is not None else SWEEP_POINTS
    if n < 1:
        raise UsageError("--grid must be >= 1")
    if not 0.0 <= p["lambda_max"] < 1.0:
        raise DomainError("--lambda-max must lie in [0, 1)")
    grid = [0.0] if n == 1 else np.linspace(0.0, p["lambda_max"], n)
    policy = _policy(p)
    rows = [[float(x), waiting_time(policy, float(x)).w] for x in grid]
    write_csv(rows, ["lambda", "W"], out)


def cmd_equilibria(p, out):
    eq = find_equilibria(_policy(p), _market(p), tol=p["tol"])
    rows = [[pt.rate, pt.kind.value, pt.stability.value, pt.residual] for pt in eq]
    write_csv(rows, ["rate", "kind", "stability", "residual"], out)


def _emit_pairs(pairs, out):
    text = "".join(f"{k}={fmt(v)}\n" for k, v in pairs)
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def cmd_welfare(p, out):
    opt = optimize_welfare(_policy(p), _market(p), grid=p["grid"] or WELFARE_GRID)
    maxima = ";".join(f"{fmt(r)}:{fmt(v)}" for r, v in opt.local_maxima)
    _emit_pairs([("lambda_star", opt.lambda_star), ("value", opt.value),
                 ("foc_residual", opt.foc_residual), ("boundary", opt.boundary),
                 ("bimodal", opt.bimodal), ("local_maxima", maxima)], out)


def cmd_sweep(p, out):
    if not p["vary"]:
        raise UsageError("sweep needs --vary or --preset")
    outputs = tuple(s.strip() for s in (p["outputs"] or "equilibria,welfare").split(",") if s.strip())
    spec = SweepSpec(p["vary"], sweep_values(p["vary"], p["start"], p["stop"], p["grid"]),
                     fixed={k: p[k] for k in ("T", "mu_l", "R", "Lambda", "lambda", "tol",
                                              "seed", "horizon", "warmup")},
                     outputs=outputs)
    write_csv(run_sweep(spec, p["jobs"]), spec.header(), out)


def cmd_simulate(p, out):
    cfg = SimConfig(_policy(p), p["lambda"], p["horizon"], p["warmup"], seed=p["seed"])
    est = simulate(cfg)
    _emit_pairs([("mean_sojourn", est.mean_sojourn), ("half_width_95", est.half_width_95),
                 ("customers_served", est.customers_served),
                 ("fraction_time_low_rate", est.fraction_time_low_rate),
                 ("seed", cfg.seed)], out)


COMMANDS = {"delay": cmd_delay, "equilibria": cmd_equilibria, "welfare": cmd_welfare,
            "sweep": cmd_sweep, "simulate": cmd_simulate}


def _fail(code, label, message):
    sys.stderr.write(f"ERROR {label}: {' '.join(str(message).split())}\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        p = _resolve(args)
        COMMANDS[args.command](p, args.out)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "USAGE", exc)
    except ConvergenceError as exc:
        return _fail(EXIT_CONVERGENCE, exc.code, exc)
    except QueueModelError as exc:
        return _fail(EXIT_DOMAIN, exc.code, exc)
    except OSError as exc:
        return _fail(EXIT_USAGE, "USAGE", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
