"""Command-line front end: ``simulate``, ``classify``, ``sweep`` and ``forced``.

Every option may also come from a ``key=value`` file passed with
``--config``; explicit flags win.  Exit status is 0 on success, 2 for bad
input and 3 when the integrator fails.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as sio
from .analysis import classify_regime, critical_manifold_mu, equilibrium
from .core import DimensionalParams, ForcingSpec, ModelParams
from .cycles import forced_run, sweep_lambda
from .integrate import IntegrationError, IntegratorConfig, integrate
from .models import (MODEL_COLUMNS, forced_field, lin3_field, nondim_field, reduced_field,
                     stom2_field, stom4_field)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

MODELS = tuple(MODEL_COLUMNS)

# required flags per simulate model (dest names)
REQUIRED = {
    "reduced": ("A", "lambda_", "delta0"),
    "lin3": ("A", "epsilon", "delta0"),
    "nondim": ("A", "epsilon", "mu"),
    "stom2": ("A", "epsilon", "mu"),
    "stom4": ("A", "epsilon", "mu"),
    "forced": (),
}

# model time horizon when --t-end is absent; forced defaults to three periods
T_END = {"reduced": 500.0, "lin3": 20000.0, "nondim": 5000.0, "stom2": 200.0, "stom4": 200.0}

BUILTIN = {
    "a": 0.6, "b": 2.0, "rel_tol": 1e-9, "abs_tol": 1e-11, "event_tol": 1e-12,
    "format": "csv", "seed": 0, "delta0_forced": 0.07, "tau_per_kyr": sio.TAU_PER_KYR,
    "min_gap": 5.0, "dt": 0.25, "jobs": 1, "conv_tol": 1e-8, "obl_min": 20.0, "obl_max": 26.0,
}


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    """Resolved settings of one ``simulate`` invocation."""

    model: str
    params: ModelParams | DimensionalParams
    integrator: IntegratorConfig
    fmt: str = "csv"
    out: str | None = None
    seed: int = 0
    t_end: float | None = None
    init: tuple | None = None
    forcing: ForcingSpec | None = None
    meta: dict = field(default_factory=dict)


# -- parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="key=value file supplying defaults")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--rel-tol", type=float)
    p.add_argument("--abs-tol", type=float)
    p.add_argument("--event-tol", type=float)


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--A", type=float, dest="A")
    p.add_argument("--lambda", type=float, dest="lambda_")
    p.add_argument("--delta0", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--a", type=float, dest="a")
    p.add_argument("--b", type=float, dest="b")


def _forcing_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--A-bar", type=float, dest="A_bar")
    p.add_argument("--p", type=float, dest="p")
    p.add_argument("--lambda-bar", type=float, dest="lambda_bar")
    p.add_argument("--q", type=float, dest="q")
    p.add_argument("--omega", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--obliquity-csv", type=Path)
    p.add_argument("--tau-per-kyr", type=float)
    p.add_argument("--obl-min", type=float, help="lower sanity bound on obliquity (deg)")
    p.add_argument("--obl-max", type=float, help="upper sanity bound on obliquity (deg)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stommel-osc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate one model and write the trajectory")
    _common(sim)
    sim.add_argument("--model", choices=MODELS)
    _model_flags(sim)
    _forcing_flags(sim)
    sim.add_argument("--t-end", type=float)
    sim.add_argument("--init", type=str, help="comma-separated initial state (default: random from --seed)")

    cls = sub.add_parser("classify", help="print equilibrium and regime reports as JSON")
    _common(cls)
    _model_flags(cls)

    sw = sub.add_parser("sweep", help="equilibria and cycles over a lambda grid")
    _common(sw)
    _model_flags(sw)
    sw.add_argument("--lambda-min", type=float)
    sw.add_argument("--lambda-max", type=float)
    sw.add_argument("--step", type=float)
    sw.add_argument("--conv-tol", type=float)
    sw.add_argument("--jobs", type=int)

    fo = sub.add_parser("forced", help="run the orbitally forced model")
    _common(fo)
    fo.add_argument("--delta0", type=float)
    _forcing_flags(fo)
    fo.add_argument("--t-end", type=float)
    fo.add_argument("--dt", type=float, help="output sampling interval")
    fo.add_argument("--threshold", type=float)
    fo.add_argument("--min-gap", type=float)
    fo.add_argument("--window", type=float, help="envelope window length")
    fo.add_argument("--init", type=str)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def _read_config(path: Path, sub: argparse.ArgumentParser) -> dict:
    """Parse ``key=value`` lines, typed like the matching flag."""
    by_name = {}
    for action in sub._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_name[opt[2:]] = action
                by_name[opt[2:].replace("-", "_")] = action
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    out = {}
    for n, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep or key not in by_name or key == "config":
            raise UsageError(f"{path}:{n}: unknown or malformed entry {line!r}")
        action = by_name[key]
        try:
            out[action.dest] = action.type(val) if action.type else val
        except (TypeError, ValueError):
            raise UsageError(f"{path}:{n}: bad value for {key}: {val!r}") from None
        if action.choices and out[action.dest] not in action.choices:
            raise UsageError(f"{path}:{n}: {key} must be one of {sorted(action.choices)}")
    return out


def _resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    values = dict(BUILTIN)
    if getattr(args, "config", None) is not None:
        values.update(_read_config(args.config, _subparser(parser, args.command)))
    values.update({k: v for k, v in vars(args).items() if v is not None})
    return values


def _need(values: dict, *keys: str) -> None:
    flag = {"lambda_": "lambda", "A_bar": "A-bar"}
    missing = [f"--{flag.get(k, k).replace('_', '-')}" for k in keys if values.get(k) is None]
    if missing:
        raise UsageError(f"missing required option(s): {', '.join(missing)}")


def _integrator(v: dict) -> IntegratorConfig:
    return IntegratorConfig(rel_tol=v["rel_tol"], abs_tol=v["abs_tol"], event_tol=v["event_tol"])


def _parse_init(text: str, dim: int) -> tuple:
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise UsageError(f"--init must be {dim} comma-separated numbers") from None
    if len(vals) != dim or not all(map(math.isfinite, vals)):
        raise UsageError(f"--init must be {dim} finite comma-separated numbers")
    return vals


def _forcing(v: dict) -> ForcingSpec:
    base = ForcingSpec()
    spec = ForcingSpec(
        A_bar=v.get("A_bar", base.A_bar), p=v.get("p", base.p),
        lambda_bar=v.get("lambda_bar", base.lambda_bar), q=v.get("q", base.q),
        omega=v.get("omega", base.omega), theta=v.get("theta", base.theta),
    )
    if v.get("obliquity_csv") is not None:
        series = sio.ingest_obliquity(v["obliquity_csv"], bounds=(v["obl_min"], v["obl_max"]))
        spec = series.forcing(spec, tau_per_kyr=v["tau_per_kyr"])
    return spec


def _forcing_meta(f: ForcingSpec) -> dict:
    return {"A_bar": f.A_bar, "p": f.p, "lambda_bar": f.lambda_bar, "q": f.q,
            "omega": f.omega, "theta": f.theta, "tabulated": f.table is not None}


@contextmanager
def _sink(path: str | None):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


# -- simulate -------------------------------------------------------------------

def _random_init(model: str, params, rng: np.random.Generator) -> tuple:
    u = rng.uniform
    if model in ("reduced", "forced"):
        lam = params.lambda_
        return lam + u(-0.05, 0.05), critical_manifold_mu(lam, params.A) + u(0.0, 0.1)
    if model == "lin3":
        lam = params.lambda_
        return 1 + u(-0.05, 0.05), lam + u(-0.05, 0.05), critical_manifold_mu(lam, params.A) + u(0.0, 0.1)
    if model == "nondim":
        return 1 + u(-0.1, 0.1), u(0.0, 1.5)
    T_a, S_a = params.T_a, params.S_a
    if model == "stom2":
        return T_a * u(0.2, 1.0), S_a * u(0.2, 1.0)
    Tea, Tpa, Sea, Spa = params.box_forcing
    return Tea + u(-0.1, 0.1), Tpa + u(-0.1, 0.1), Sea + u(-0.1, 0.1), Spa + u(-0.1, 0.1)


def make_run_config(v: dict) -> RunConfig:
    model = v.get("model")
    if model is None:
        raise UsageError("missing required option: --model")
    _need(v, *REQUIRED[model])
    forcing = None
    if model == "reduced":
        params = ModelParams.reduced(v["A"], v["lambda_"], v["delta0"])
    elif model == "lin3":
        lam = (1 + v["a"]) / v["b"]
        if v.get("lambda_") is not None and not math.isclose(v["lambda_"], lam, rel_tol=1e-12):
            raise UsageError(f"--lambda {v['lambda_']} conflicts with (1 + a) / b = {lam}")
        params = ModelParams(A=v["A"], epsilon=v["epsilon"], delta0=v["delta0"],
                             lambda_=lam, a=v["a"], b=v["b"])
    elif model == "nondim":
        params = ModelParams(A=v["A"], epsilon=v["epsilon"], mu=v["mu"])
    elif model in ("stom2", "stom4"):
        params = DimensionalParams.from_nondim(v["A"], v["epsilon"], v["mu"]).validate()
    else:
        forcing = _forcing(v)
        params = ModelParams(A=max(forcing.A_bar, 1e-12), delta0=v.get("delta0", v["delta0_forced"]),
                             lambda_=forcing.lambda_bar)
    init = _parse_init(v["init"], len(MODEL_COLUMNS[model])) if v.get("init") else None
    cfg = RunConfig(model=model, params=params, integrator=_integrator(v), fmt=v["format"],
                    out=v.get("out"), seed=v["seed"], t_end=v.get("t_end"), init=init, forcing=forcing)
    cfg.meta = {"command": "simulate", "model": model, "seed": cfg.seed,
                "params": {k: val for k, val in vars(params).items() if not k.startswith("_")}}
    if forcing is not None:
        cfg.meta["forcing"] = _forcing_meta(forcing)
    return cfg


def _field(cfg: RunConfig):
    builders = {"reduced": reduced_field, "lin3": lin3_field, "nondim": nondim_field,
                "stom2": stom2_field, "stom4": stom4_field}
    if cfg.model == "forced":
        return forced_field(cfg.params, cfg.forcing)
    return builders[cfg.model](cfg.params)


def cmd_simulate(cfg: RunConfig) -> int:
    s0 = cfg.init or _random_init(cfg.model, cfg.params, np.random.default_rng(cfg.seed))
    if cfg.model == "forced":
        f = cfg.forcing
        t0, t1 = (f.table[0][0], f.table[-1][0]) if f.table else (0.0, 3 * f.period)
        if cfg.t_end is not None:
            t1 = cfg.t_end
    else:
        t0, t1 = 0.0, cfg.t_end if cfg.t_end is not None else T_END[cfg.model]
    if not t1 > t0:
        raise UsageError(f"--t-end must exceed the start time {t0}")
    traj = integrate(_field(cfg), s0, (t0, t1), cfg.integrator)
    meta = dict(cfg.meta, init=[float(x) for x in s0])
    cols = MODEL_COLUMNS[cfg.model]
    with _sink(cfg.out) as fh:
        if cfg.fmt == "json":
            fh.write(sio.trajectory_to_json(traj, cols, meta))
        else:
            sio.write_trajectory_csv(fh, traj, cols, meta)
    return EXIT_OK


# -- classify / sweep / forced ---------------------------------------------------

def cmd_classify(v: dict) -> int:
    _need(v, "A", "lambda_", "delta0")
    params = ModelParams.reduced(v["A"], v["lambda_"], v["delta0"])
    doc = {"equilibrium": equilibrium(params).to_dict(), "regime": classify_regime(params).to_dict()}
    with _sink(v.get("out")) as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def lambda_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid ``lo, lo + step, ...`` up to ``hi`` (rounded to 12 decimals)."""
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(step)):
        raise UsageError("lambda range must be finite")
    if step <= 0:
        raise UsageError("--step must be positive")
    if hi <= lo:
        raise UsageError(f"reversed or empty lambda range [{lo}, {hi}]")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(n + 1), 12)


def cmd_sweep(v: dict) -> int:
    _need(v, "A", "delta0", "lambda_min", "lambda_max", "step")
    grid = lambda_grid(v["lambda_min"], v["lambda_max"], v["step"])
    if grid[0] <= 0 or grid[-1] >= 2:
        raise UsageError("lambda grid must lie inside (0, 2)")
    if v["jobs"] < 1:
        raise UsageError("--jobs must be at least 1")
    diagram = sweep_lambda(v["A"], v["delta0"], grid, _integrator(v), conv_tol=v["conv_tol"],
                           jobs=v["jobs"])
    meta = {"command": "sweep", "A": v["A"], "delta0": v["delta0"], "seed": v["seed"]}
    with _sink(v.get("out")) as fh:
        if v["format"] == "json":
            fh.write(sio.sweep_to_json(diagram, meta))
        else:
            sio.write_sweep_csv(fh, diagram, meta)
    return EXIT_OK


def cmd_forced(v: dict) -> int:
    f = _forcing(v)
    delta0 = v.get("delta0", v["delta0_forced"])
    if not delta0 > 0:
        raise UsageError("--delta0 must be positive")
    t0, t1 = (f.table[0][0], f.table[-1][0]) if f.table else (0.0, 3 * f.period)
    if v.get("t_end") is not None:
        t1 = v["t_end"]
    if not t1 > t0:
        raise UsageError(f"--t-end must exceed the start time {t0}")
    if not v["dt"] > 0:
        raise UsageError("--dt must be positive")
    s0 = _parse_init(v["init"], 2) if v.get("init") else None
    run = forced_run(f, delta0, (t0, t1), _integrator(v), s0=s0, dt=v["dt"],
                     threshold=v.get("threshold"), min_gap=v["min_gap"], window=v.get("window"))
    meta = {"command": "forced", "delta0": delta0, "seed": v["seed"], "forcing": _forcing_meta(f)}
    stats = json.dumps(run.stats.to_dict(), sort_keys=True, indent=1) + "\n"
    out = v.get("out")
    with _sink(out) as fh:
        if v["format"] == "json":
            doc = dict(meta, columns=list(sio.FORCED_COLUMNS), stats=run.stats.to_dict(),
                       rows=np.column_stack([run.times, run.states, run.A_tau,
                                             run.lambda_tau, run.psi]).tolist())
            fh.write(json.dumps(doc, sort_keys=True, indent=1) + "\n")
            return EXIT_OK
        sio.write_forced_csv(fh, run, meta)
    if out is None:
        sys.stderr.write(stats)
    else:
        Path(f"{out}.stats.json").write_text(stats)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        v = _resolve(args, parser)
        if args.command == "simulate":
            return cmd_simulate(make_run_config(v))
        if args.command == "classify":
            return cmd_classify(v)
        if args.command == "sweep":
            return cmd_sweep(v)
        return cmd_forced(v)
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
