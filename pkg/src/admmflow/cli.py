"""Batch runner for the trend, rpca, flow and rates experiments.

Configs are ``key=value`` lines (``#`` starts a comment) or a JSON object.
Every field has a default, and experiment-specific defaults fill in
whatever is left unset, so ``experiment=trend`` alone is a complete config.
Output files are CSV. Each starts with a ``# config: {...}`` line that
holds the fully resolved config as JSON.

Usage::

    python -m admmflow trend --out results/ --seed 7
    python -m admmflow flow --config flow.cfg --set damping=nesterov

Exit codes: 0 success, 2 config error, 3 divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import flows, problems
from .solvers import SCHEDULES, ConfigError, DivergenceError, SolverConfig, run

EXPERIMENTS = ("trend", "rpca", "flow", "rates")
ALGORITHM_NAMES = {"none": "radmm", "nesterov": "raadmm", "heavyball": "rhbadmm"}

# config key -> (field name, kind); "lambda" is a Python keyword
_KEYS = {
    "experiment": ("experiment", "str"),
    "rho": ("rho", "float"),
    "alpha": ("alpha", "floats"),
    "schedule": ("schedule", "strs"),
    "r": ("r", "float"),
    "r_hb": ("r_hb", "float"),
    "iters": ("iters", "int"),
    "damping": ("damping", "str"),
    "h": ("h", "float"),
    "epsilon": ("epsilon", "float"),
    "t_end": ("t_end", "float"),
    "n": ("n", "int"),
    "p": ("p", "float"),
    "sigma": ("sigma", "float"),
    "b": ("b", "float"),
    "q": ("q", "int"),
    "s": ("s", "int"),
    "lambda": ("lam", "float"),
    "seed": ("seed", "int"),
    "z_init": ("z_init", "float"),
    "output_dir": ("output_dir", "str"),
}
_FIELD_TO_KEY = {name: key for key, (name, _) in _KEYS.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run. ``None`` means "use the experiment default".

    ``alpha`` and ``schedule`` are sweeps for trend and rpca; the flow
    experiment uses ``alpha[0]``. ``r`` is the Nesterov coefficient (or the
    flow damping), ``r_hb`` the heavy-ball one. ``lam`` is the
    regularization weight, written ``lambda`` in config files.
    """

    experiment: str = ""
    rho: float | None = None
    alpha: tuple[float, ...] | None = None
    schedule: tuple[str, ...] = SCHEDULES
    r: float | None = None
    r_hb: float | None = None
    iters: int = 200
    damping: str = "first_order"
    h: float = 1e-3
    epsilon: float = 1e-4
    t_end: float = 10.0
    n: int | None = None
    p: float = 0.99
    sigma: float = 20.0
    b: float = 0.5
    q: int | None = None
    s: int | None = None
    lam: float | None = None
    seed: int = 42
    z_init: float = 0.0
    output_dir: str = "out"


def _convert(key: str, raw, where: str):
    name, kind = _KEYS[key]
    if raw is None or (isinstance(raw, str) and raw.strip() == ""):
        return name, None
    try:
        if kind == "str":
            if not isinstance(raw, str):
                raise TypeError
            return name, raw.strip()
        if kind == "strs":
            items = raw.split(",") if isinstance(raw, str) else list(raw)
            return name, tuple(str(v).strip() for v in items)
        if kind == "floats":
            items = raw.split(",") if isinstance(raw, str) else (
                list(raw) if isinstance(raw, (list, tuple)) else [raw])
            return name, tuple(float(v) for v in items)
        if kind == "int":
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise TypeError
            return name, int(raw)
        if isinstance(raw, bool):
            raise TypeError
        return name, float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}key '{key}': expected {kind}, got {raw!r}") from None


def parse_values(text: str) -> dict[str, object]:
    """Convert a config document to ``{field name: value}`` without defaults."""
    values: dict[str, object] = {}
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError("JSON config must be an object")
        for key, raw in doc.items():
            if key not in _KEYS:
                raise ConfigError(f"unknown key '{key}'")
            name, val = _convert(key, raw, "")
            values[name] = val
        return values
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        name, val = _convert(key, raw, f"line {lineno}: ")
        values[name] = val
    return values


def parse_config(text: str, overrides: dict[str, object] | None = None) -> ExperimentConfig:
    """Parse, apply defaults and validate.

    ``overrides`` maps config keys to raw values and wins over ``text``.

    Raises
    ------
    ConfigError
        For unknown keys, unparsable values or out-of-range settings; the
        message names the key and, for ``key=value`` input, the line.
    """
    values = parse_values(text)
    for key, raw in (overrides or {}).items():
        if key not in _KEYS:
            raise ConfigError(f"unknown key '{key}'")
        name, val = _convert(key, raw, "override: ")
        values[name] = val
    defaults = ExperimentConfig()
    for name, val in list(values.items()):
        if val is None and getattr(defaults, name) is not None:
            values[name] = getattr(defaults, name)
    return resolve(ExperimentConfig(**values))


def _experiment_defaults(cfg: ExperimentConfig) -> dict[str, object]:
    if cfg.experiment == "trend":
        return dict(rho=500.0, alpha=(1.0, 1.35), r=3.0, r_hb=1.5, n=1000, lam=2500.0)
    if cfg.experiment == "rpca":
        n = cfg.n if cfg.n is not None else 200
        return dict(rho=1.0, alpha=(1.0, 1.3), r=3.0, r_hb=0.75, n=n, q=round(0.05 * n),
                    s=round(0.1 * n * n), lam=1.0 / n)
    if cfg.experiment == "flow":
        return dict(alpha=(1.35,), lam=0.0, r=3.0 if cfg.damping == "nesterov" else None)
    return dict(alpha=(1.35,), r=3.0, lam=0.0)


def resolve(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill experiment defaults and check every range."""
    if not cfg.experiment:
        raise ConfigError("experiment required")
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"key 'experiment': must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    fill = {k: v for k, v in _experiment_defaults(cfg).items() if getattr(cfg, k) is None}
    cfg = replace(cfg, **fill)
    if cfg.experiment == "flow" and cfg.damping == "constant" and cfg.r is None:
        inst, _ = problems.standard_quadratic(cfg.lam)
        spec = flows.FlowSpec(inst.A, cfg.alpha[0], inst.oracle(cfg.epsilon), "constant", r=1.0,
                              mu=inst.mu)
        cfg = replace(cfg, r=spec.r_bar() / 2)
    _validate(cfg)
    return cfg


def _check(ok: bool, key: str, msg: str) -> None:
    if not ok:
        raise ConfigError(f"key '{key}': {msg}")


def _validate(cfg: ExperimentConfig) -> None:
    _check(len(cfg.alpha) > 0, "alpha", "needs at least one value")
    for a in cfg.alpha:
        _check(0 < a < 2, "alpha", f"must lie in the open interval (0, 2), got {a}")
    _check(cfg.iters >= 0, "iters", f"must be >= 0, got {cfg.iters}")
    _check(cfg.seed >= 0, "seed", f"must be >= 0, got {cfg.seed}")
    _check(cfg.h > 0, "h", f"must be > 0, got {cfg.h}")
    _check(cfg.epsilon > 0, "epsilon", f"must be > 0, got {cfg.epsilon}")
    _check(cfg.t_end > cfg.h, "t_end", f"must exceed h, got {cfg.t_end}")
    _check(cfg.lam is not None and cfg.lam >= 0, "lambda", f"must be >= 0, got {cfg.lam}")
    if cfg.experiment in ("trend", "rpca"):
        _check(cfg.rho is not None and cfg.rho > 0, "rho", f"must be > 0, got {cfg.rho}")
        _check(len(cfg.schedule) > 0, "schedule", "needs at least one value")
        for sched in cfg.schedule:
            _check(sched in SCHEDULES, "schedule", f"must be among {SCHEDULES}, got {sched!r}")
        if "nesterov" in cfg.schedule:
            _check(cfg.r >= 3, "r", f"nesterov momentum needs r >= 3, got {cfg.r}")
        if "heavyball" in cfg.schedule:
            _check(cfg.r_hb is not None and cfg.r_hb > 0, "r_hb", f"must be > 0, got {cfg.r_hb}")
            _check(cfg.rho > cfg.r_hb ** 2, "r_hb",
                   f"heavy-ball momentum needs rho > r_hb^2, got rho={cfg.rho}, r_hb={cfg.r_hb}")
    if cfg.experiment == "trend":
        _check(cfg.n >= 3, "n", f"must be >= 3, got {cfg.n}")
        _check(0 <= cfg.p <= 1, "p", f"must lie in [0, 1], got {cfg.p}")
        _check(cfg.sigma >= 0, "sigma", f"must be >= 0, got {cfg.sigma}")
    if cfg.experiment == "rpca":
        _check(cfg.n >= 2, "n", f"must be >= 2, got {cfg.n}")
        _check(1 <= cfg.q <= cfg.n, "q", f"must lie in [1, n], got {cfg.q}")
        _check(0 <= cfg.s <= cfg.n * cfg.n, "s", f"must lie in [0, n^2], got {cfg.s}")
    if cfg.experiment == "flow":
        _check(cfg.damping in flows.DAMPINGS, "damping",
               f"must be one of {flows.DAMPINGS}, got {cfg.damping!r}")
        if cfg.damping == "nesterov":
            _check(cfg.r >= 3, "r", f"nesterov damping needs r >= 3, got {cfg.r}")
        if cfg.damping == "constant":
            _check(cfg.r >= 0, "r", f"constant damping needs r >= 0, got {cfg.r}")
    if cfg.experiment == "rates":
        _check(cfg.r >= 3, "r", f"nesterov damping needs r >= 3, got {cfg.r}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """``key=value`` lines that :func:`parse_config` maps back to ``cfg``."""
    lines = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if val is None:
            text = ""
        elif isinstance(val, tuple):
            text = ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)
        elif isinstance(val, float):
            text = repr(val)
        else:
            text = str(val)
        lines.append(f"{_FIELD_TO_KEY[f.name]}={text}")
    return "\n".join(lines) + "\n"


def config_comment(cfg: ExperimentConfig) -> str:
    doc = {_FIELD_TO_KEY[k]: (list(v) if isinstance(v, tuple) else v)
           for k, v in asdict(cfg).items()}
    return "config: " + json.dumps(doc, sort_keys=True)


# ---------------------------------------------------------------- experiments

@dataclass
class RunResult:
    files: list[Path]
    summary: list[dict[str, object]]


def _write_table(path: Path, rows: list[dict[str, object]], comment: str) -> Path:
    buf = io.StringIO()
    buf.write(f"# {comment}\n")
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    path.write_text(buf.getvalue())
    return path


def _sweep(cfg: ExperimentConfig, problem, z_dim: int | tuple[int, ...], prefix: str,
           extra=None) -> RunResult:
    out = Path(cfg.output_dir)
    comment = config_comment(cfg)
    files, summary = [], []
    z_init = np.full(z_dim, cfg.z_init)
    for alpha in cfg.alpha:
        for sched in cfg.schedule:
            r = cfg.r_hb if sched == "heavyball" else cfg.r
            solver = SolverConfig(rho=cfg.rho, alpha=alpha, schedule=sched, r=r,
                                  max_iters=cfg.iters)
            trace = run(problem, solver, z_init)
            name = f"{prefix}_{ALGORITHM_NAMES[sched]}_alpha{alpha!r}.csv"
            trace.to_csv(out / name, comment=comment)
            files.append(out / name)
            last = trace.records[-1]
            row = {"algorithm": ALGORITHM_NAMES[sched], "alpha": alpha,
                   "r": r if sched != "none" else "", "iters": last.k,
                   "final_rel_err": last.rel_err, "final_objective": last.objective,
                   "final_primal_res": last.primal_res, "final_dual_res": last.dual_res}
            if extra is not None:
                row.update(extra(trace))
            summary.append(row)
    files.append(_write_table(out / f"{prefix}_summary.csv", summary, comment))
    return RunResult(files, summary)


def _run_trend(cfg: ExperimentConfig) -> RunResult:
    inst = problems.make_trend_instance(n=cfg.n, p=cfg.p, sigma=cfg.sigma, b=cfg.b,
                                        lam=cfg.lam, seed=cfg.seed)
    return _sweep(cfg, problems.trend_filter_problem(inst), cfg.n - 2, "trend")


def _run_rpca(cfg: ExperimentConfig) -> RunResult:
    inst = problems.gen_rpca_instance(cfg.n, cfg.q, cfg.s, cfg.seed, lam=cfg.lam)

    def recovery(trace):
        return {"recovery_err": problems.recovery_error(trace.final.x, inst.X_star)}

    return _sweep(cfg, problems.rpca_problem(inst), (cfg.n, cfg.n), "rpca", recovery)


_FLOW_KINDS = {"first_order": ("radmm_convex", "radmm_strong"),
               "nesterov": ("nesterov_convex", "nesterov_strong"),
               "constant": ("hb_convex", "hb_strong")}


def _run_flow(cfg: ExperimentConfig) -> RunResult:
    inst, _ = problems.standard_quadratic(cfg.lam)
    oracle = inst.oracle(cfg.epsilon)
    spec = flows.FlowSpec(inst.A, cfg.alpha[0], oracle, cfg.damping,
                          r=0.0 if cfg.damping == "first_order" else cfg.r, mu=inst.mu)
    traj = flows.integrate(spec, np.array(problems.STANDARD_X0), cfg.t_end, cfg.h)
    smoothed = not oracle.smooth
    if smoothed:
        x_ref, phi_ref = flows.stationary_point(oracle, inst.x_star)
    else:
        x_ref, phi_ref = inst.x_star, inst.phi_star
    series: dict[str, np.ndarray] = {}
    row: dict[str, object] = {"damping": cfg.damping, "alpha": spec.alpha, "r": spec.r,
                              "final_gap": float(traj.phi[-1] - inst.phi_star)}
    for kind in _FLOW_KINDS[cfg.damping]:
        E = flows.lyapunov(traj, flows.LyapunovKind(kind, x_ref, phi_ref), spec, smoothed)
        series[f"E_{kind}"] = E
        row[f"max_increase_{kind}"] = flows.max_relative_increase(E)
    if cfg.damping != "first_order":
        series["energy"] = flows.hamiltonian_energy(traj, spec, "conformal", phi_ref, smoothed)
    row["max_phi_dot_residual"] = float(flows.phi_dot_residual(traj, spec).max())
    out = Path(cfg.output_dir)
    comment = config_comment(cfg)
    path = out / f"flow_{cfg.damping}.csv"
    traj.to_csv(path, extra=series, comment=comment)
    summary = [row]
    return RunResult([path, _write_table(out / "flow_summary.csv", summary, comment)], summary)


def _upper_envelope(values: np.ndarray) -> np.ndarray:
    """``max_{s >= t} v(s)``: the tightest nonincreasing majorant."""
    return np.maximum.accumulate(values[::-1])[::-1]


def rate_rows(alpha: float = 1.35, r: float = 3.0, t_end: float = 10.0, h: float = 1e-3,
              epsilon: float = 1e-4, floor: float = 1e-20) -> list[dict[str, object]]:
    """Fitted decay rates of the three flows on the standard quadratic.

    Convex rows fit ``c t^p`` to ``Phi - Phi*``; strongly convex rows fit
    ``||X - x*||^2`` with the model of the predicted rate. Fits use the
    nonincreasing upper envelope on ``[1, t_end]``, cut where it drops below
    ``floor``. A row passes when the fitted decay is at least as fast as
    predicted. Heavy-ball damping uses ``r = r_bar``.
    """
    inst, _ = problems.standard_quadratic(0.0)
    oracle = inst.oracle(epsilon)
    x0 = np.array(problems.STANDARD_X0)
    first = flows.FlowSpec(inst.A, alpha, oracle, "first_order", mu=inst.mu)
    r_bar = flows.FlowSpec(inst.A, alpha, oracle, "constant", r=1.0, mu=inst.mu).r_bar()
    sig1 = first.sigma[0]
    cases = [
        ("first_order", first, -1.0, ("exponential", inst.mu / ((2 - alpha) * sig1 ** 2))),
        ("nesterov", flows.FlowSpec(inst.A, alpha, oracle, "nesterov", r=r, mu=inst.mu), -2.0,
         ("power", -2 * r / 3)),
        ("heavy_ball", flows.FlowSpec(inst.A, alpha, oracle, "constant", r=r_bar, mu=inst.mu),
         -1.0, ("exponential", 2 * r_bar / 3)),
    ]
    rows = []
    for label, spec, convex_exp, (strong_model, strong_pred) in cases:
        traj = flows.integrate(spec, x0, t_end, h)
        gap = traj.phi - inst.phi_star
        dist = np.sum((traj.X - inst.x_star) ** 2, axis=1)
        for setting, values, model, pred in (("convex", gap, "power", convex_exp),
                                             ("strongly_convex", dist, strong_model, strong_pred)):
            env = _upper_envelope(values)
            above = np.nonzero(env > floor)[0]
            hi = float(traj.t[above[-1]]) if above.size else float(traj.t[0])
            fit = flows.rate_fit(traj.t, np.maximum(env, floor), model, (1.0, hi))
            ok = fit.exponent_or_rate <= pred if model == "power" else fit.exponent_or_rate >= pred
            rows.append({"flow": label, "setting": setting,
                         "quantity": "phi_gap" if setting == "convex" else "dist_sq",
                         "model": model, "predicted": float(pred),
                         "fitted": fit.exponent_or_rate, "goodness": fit.goodness,
                         "window_lo": fit.window[0], "window_hi": fit.window[1],
                         "pass": "pass" if ok else "fail"})
    return rows


def _run_rates(cfg: ExperimentConfig) -> RunResult:
    rows = rate_rows(cfg.alpha[0], cfg.r, cfg.t_end, cfg.h, cfg.epsilon)
    path = _write_table(Path(cfg.output_dir) / "rates.csv", rows, config_comment(cfg))
    return RunResult([path], rows)


_RUNNERS = {"trend": _run_trend, "rpca": _run_rpca, "flow": _run_flow, "rates": _run_rates}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run ``cfg`` and write its CSV files under ``cfg.output_dir``."""
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    return _RUNNERS[cfg.experiment](cfg)


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="python -m admmflow",
                                     description="Run ADMM and flow experiments.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="key=value or JSON config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = Path(args.out) if args.out else None
    try:
        text = args.config.read_text(encoding="utf-8") if args.config else ""
        stated = parse_values(text).get("experiment")
        if stated and stated != args.experiment:
            raise ConfigError(f"key 'experiment': config says {stated!r} "
                              f"but subcommand is {args.experiment!r}")
        overrides: dict[str, object] = {"experiment": args.experiment}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, value = item.split("=", 1)
            overrides[key.strip()] = value
        if args.out:
            overrides["output_dir"] = args.out
        if args.seed is not None:
            overrides["seed"] = args.seed
        cfg = parse_config(text, overrides)
        out_dir = Path(cfg.output_dir)
        result = run_experiment(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, flows.IntegrationError) as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        try:
            target = out_dir or Path(".")
            target.mkdir(parents=True, exist_ok=True)
            (target / "diagnostic.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        except OSError:
            pass
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    for path in result.files:
        print(path)
    return 0
