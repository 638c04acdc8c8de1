"""Command-line interface: ``adaptquad {estimate,risk,rates,check,simulate}``.

Experiments are described by an INI file whose sections and keys are listed
in :data:`SCHEMA`; unknown sections or keys are rejected.  Command-line
flags override the file.  Whenever ``--out`` is given the fully resolved
configuration is written next to the output as ``<out>.config.ini`` and
rerunning with that file reproduces the output byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 a
check suite reported a failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import block_stats, k_star, report_adaptive, report_kstar
from .param_spaces import BallSpec, MembershipViolation, dense_modulus, single_spike, sparse_hypercube
from .rates import ALPHA, P, lm_exponents, minimax_rate, regime_table, table_text
from .risk_lab import (
    Estimator,
    NumericError,
    fit_slope,
    lemma1_suite,
    lemma2_dominance,
    run_mc,
)
from .seq_model import (
    PENALTY_CONST,
    ModelConfig,
    Observation,
    ThetaVector,
    block_scheme,
    excess_mean,
    simulate,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

COMMANDS = ("estimate", "risk", "rates", "check", "simulate")
FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    """Invalid, missing or unknown configuration entry."""


def _int_list(s):
    return [int(v) for v in _str_list(s)]


def _float_list(s):
    return [float(v) for v in _str_list(s)]


def _str_list(s):
    return [v.strip() for v in str(s).split(",") if v.strip()]


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# section -> key -> (parser, default); a default of None means optional and unset
SCHEMA = {
    "run": {
        "n": (int, None),
        "n_grid": (_int_list, None),
        "reps": (int, 1000),
        "seed": (int, 0),
        "rep": (int, 0),
        "estimators": (_str_list, ["q_kstar", "q_adaptive"]),
        "penalty_const": (float, PENALTY_CONST),
        "clip": (_bool, False),
        "tail_blocks": (int, 2),
        "upto": (int, None),
        "theta": (str, "zero"),
        "observation": (str, None),
    },
    "ball": {
        "kind": (str, "Lp"),
        "p": (float, None),
        "alpha": (float, None),
        "M": (float, 1.0),
        "q": (float, 2.0),
    },
    "family": {
        "members": (_str_list, ["zero", "single_spike"]),
        "b": (float, 0.05),
        "d": (float, 1.0),
        "height": (float, None),
        "index": (int, 1),
    },
    "rates": {
        "points": (_str_list, []),
    },
    "check": {
        "tau_grid": (_float_list, [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]),
        "lemma1_reps": (int, 100_000),
        "lemma1_n": (float, 100.0),
        "lemma2_reps": (int, 1_000_000),
        "xi": (float, 1.0),
        "lam": (float, 0.5),
        "m": (int, 2),
    },
    "output": {
        "format": (str, "csv"),
    },
}


class ExperimentConfig:
    """Resolved configuration: every schema key with a value or None."""

    def __init__(self, values: dict, command: str):
        self.values = values
        self.command = command

    def __getitem__(self, key):
        section, name = key.split(".")
        return self.values[section][name]

    def require(self, key):
        v = self[key]
        if v is None:
            raise ConfigError(f"missing required field '{key}'")
        return v

    def to_ini(self) -> str:
        lines = [f"# adaptquad {__version__} resolved configuration for '{self.command}'"]
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            for k in keys:
                v = self.values[section][k]
                if v is not None:
                    lines.append(f"{k} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)

    @property
    def sha256(self) -> str:
        body = "\n".join(l for l in self.to_ini().splitlines() if not l.startswith("#"))
        return hashlib.sha256(body.encode()).hexdigest()

    def header(self) -> str:
        return f"adaptquad {__version__} config_sha256={self.sha256} seed={self['run.seed']}"


def load_config(path: str | None, command: str, overrides: dict) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if path is not None:
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            conv = SCHEMA[section][key][0]
            try:
                values[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for '{section}.{key}': {raw!r} ({exc})") from exc
    for key, v in overrides.items():
        if v is not None:
            s, k = key.split(".")
            values[s][k] = v
    fmt = values["output"]["format"]
    if fmt not in FORMATS:
        raise ConfigError(f"output.format must be one of {FORMATS}, got {fmt!r}")
    seed = values["run"]["seed"]
    if not 0 <= seed < 2**64:
        raise ConfigError("run.seed must fit in 64 bits")
    return ExperimentConfig(values, command)


# ---------------------------------------------------------------------------
# helpers


def _ball(cfg: ExperimentConfig) -> BallSpec:
    try:
        return BallSpec(cfg["ball.kind"], cfg.require("ball.p"), cfg.require("ball.alpha"),
                        cfg["ball.M"], cfg["ball.q"])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid ball: {exc}") from exc


def _has_ball(cfg) -> bool:
    return cfg["ball.p"] is not None or cfg["ball.alpha"] is not None


def _member(name: str, cfg: ExperimentConfig, n: int) -> ThetaVector:
    if name == "zero":
        return ThetaVector.zero()
    if name == "single_spike":
        if cfg["family.height"] is not None and not _has_ball(cfg):
            c = np.zeros(cfg["family.index"])
            c[-1] = cfg["family.height"]
            return ThetaVector(c, label=f"single_spike(i={cfg['family.index']},h={cfg['family.height']:g})")
        return single_spike(_ball(cfg), cfg["family.height"], cfg["family.index"])
    if name == "dense_modulus":
        return dense_modulus(_ball(cfg), n, cfg["family.d"])
    if name == "sparse_hypercube":
        return sparse_hypercube(_ball(cfg), n, cfg["family.b"])
    raise ConfigError(f"unknown family member {name!r}; expected zero, single_spike, dense_modulus or sparse_hypercube")


def _estimators(cfg) -> list[Estimator]:
    out = []
    for name in cfg["run.estimators"]:
        try:
            out.append(Estimator(name, _ball(cfg) if name in ("q_kstar", "xi_kstar") else None,
                                 cfg["run.penalty_const"], cfg["run.clip"],
                                 cfg["run.upto"] if name == "unbiased_baseline" else None))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if not out:
        raise ConfigError("run.estimators is empty")
    return out


def _n_values(cfg) -> list[int]:
    grid = cfg["run.n_grid"]
    if grid:
        return grid
    return [cfg.require("run.n")]


def _model(cfg, n) -> ModelConfig:
    try:
        return ModelConfig(n, cfg["run.seed"], cfg["run.tail_blocks"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


class _Output:
    def __init__(self, path: str | None, cfg: ExperimentConfig):
        self.path = Path(path) if path else None
        self.cfg = cfg

    def write(self, text: str, path: Path | None = None):
        target = path or self.path
        if target is None:
            sys.stdout.write(text)
            return
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", newline="") as fh:
            fh.write(text)

    def sibling(self, suffix: str) -> Path | None:
        return None if self.path is None else self.path.with_name(self.path.name + suffix)

    def finish(self):
        if self.path is not None:
            self.write(self.cfg.to_ini(), self.sibling(".config.ini"))


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _csv_text(header: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands


def _load_observation(path: str) -> Observation:
    """Read an observation written by ``adaptquad simulate --format json``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read observation {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"observation file {path} is not valid JSON: {exc}") from exc
    for key in ("n", "y"):
        if key not in doc:
            raise ConfigError(f"observation file lacks field '{key}'")
    return Observation(np.asarray(doc["y"], dtype=np.float64), int(doc["n"]), doc.get("seed"), doc.get("rep"))


def cmd_estimate(cfg: ExperimentConfig, out: _Output, threads: int):
    if cfg["run.observation"]:
        obs = _load_observation(cfg["run.observation"])
        source = {"observation": cfg["run.observation"]}
    else:
        n = cfg.require("run.n")
        model = _model(cfg, n)
        theta = _member(cfg["run.theta"], cfg, n)
        obs = simulate(theta, model, cfg["run.rep"])
        source = {"theta": theta.label, "seed": model.seed, "rep": cfg["run.rep"]}
    if obs.n < 20:
        raise ConfigError("observation sample size must be at least 20")
    scheme = block_scheme(obs.n)
    if len(obs) < scheme.mJ:
        raise ConfigError(f"observation has {len(obs)} coordinates; at least m_J = {scheme.mJ} are needed")
    st = block_stats(obs, scheme)
    reports = {"q_adaptive": report_adaptive(st, cfg["run.penalty_const"], cfg["run.clip"]).to_dict()}
    if _has_ball(cfg):
        ball = _ball(cfg)
        reports["q_kstar"] = report_kstar(st, k_star(ball, scheme), cfg["run.clip"]).to_dict()
    for r in reports.values():
        if not math.isfinite(r["q_hat"]):
            raise NumericError("estimate is not finite")
    doc = {"provenance": {"version": __version__, "config_sha256": cfg.sha256, **source},
           "n": obs.n, "length": len(obs), "reports": reports}
    out.write(_dumps(doc))
    out.finish()


_RISK_COLUMNS = ("estimator", "theta", "n", "reps", "seed", "mean_error", "variance", "mse", "se_mse",
                 "bias_sq", "is_sup")


def risk_rows(cfg: ExperimentConfig, threads: int):
    """Simulate every grid point; returns CSV rows and the JSON summary."""
    ests = _estimators(cfg)
    ns = _n_values(cfg)
    reps = cfg["run.reps"]
    if reps < 2:
        raise ConfigError("run.reps must be at least 2")
    rows, sups, fam_meta, kst = [], {e.id: [] for e in ests}, {}, {}
    for n in ns:
        family = [_member(m, cfg, n) for m in cfg["family.members"]]
        labels = [t.label for t in family]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"family members produce duplicate configurations: {labels}")
        res = run_mc(ests, family, _model(cfg, n), reps, threads)
        fam_meta[str(n)] = {t.label: t.meta for t in family}
        kst[str(n)] = res.meta["kstar"]
        for e in ests:
            sup, sup_id = res.sup(e.id)
            sups[e.id].append((n, sup, sup_id))
            for r in res.risks(e.id):
                rows.append({"estimator": e.id, "theta": r.theta_id, "n": n, "reps": r.reps, "seed": r.seed,
                             "mean_error": r.mean_error, "variance": r.variance, "mse": r.mse,
                             "se_mse": r.se_mse, "bias_sq": r.bias_sq, "is_sup": int(r.theta_id == sup_id)})
    summary = {"version": __version__, "config_sha256": cfg.sha256, "seed": cfg["run.seed"], "reps": reps,
               "n_grid": ns, "family": cfg["family.members"], "family_meta": fam_meta, "kstar": kst,
               "sup": {e: [{"n": n, "theta": t, "mse": r.mse, "se_mse": r.se_mse} for n, r, t in v]
                       for e, v in sups.items()}}
    if _has_ball(cfg):
        rate = minimax_rate(_ball(cfg))
        summary["minimax_rate"] = {"r": rate.r, "log_exp": rate.log_exp, "regime": rate.regime,
                                   "efficient_constant": rate.efficient_constant}
        target = -rate.r
    else:
        target = None
    if len(ns) >= 2:
        summary["slopes"] = {}
        for e, v in sups.items():
            try:
                f = fit_slope([n for n, _, _ in v], [r.mse for _, r, _ in v], e, target, [t for _, _, t in v])
                summary["slopes"][e] = f.to_dict()
            except ValueError as exc:
                summary["slopes"][e] = {"error": str(exc)}
    return rows, summary


def _svg_from_csv(csv_path: Path, svg_path: Path, summary: dict):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "adaptquad"
    with open(csv_path) as fh:
        lines = [l for l in fh if not l.startswith("#")]
    data = list(csv.DictReader(lines))
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for est in dict.fromkeys(r["estimator"] for r in data):
        pts = [(int(r["n"]), float(r["mse"])) for r in data if r["estimator"] == est and r["is_sup"] == "1"]
        x = np.log([p[0] for p in pts])
        y = np.log([max(p[1], 1e-300) for p in pts])
        ax.plot(x, y, "o-", label=f"{est} (sup mse)")
        rate = summary.get("minimax_rate")
        if rate is not None and len(x) >= 2:
            ax.plot(x, y[0] - rate["r"] * (x - x[0]), "--", color="grey", linewidth=1)
    if summary.get("minimax_rate"):
        ax.plot([], [], "--", color="grey", label=f"slope -r = {-summary['minimax_rate']['r']:.4g}")
    ax.set_xlabel("ln n")
    ax.set_ylabel("ln sup-MSE")
    ax.legend(fontsize=7)
    ax.set_title(f"config {summary['config_sha256'][:12]}  seed {summary['seed']}", fontsize=8)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None, "Creator": f"adaptquad {__version__}"})
    plt.close(fig)


def cmd_risk(cfg: ExperimentConfig, out: _Output, threads: int):
    rows, summary = risk_rows(cfg, threads)
    fmt = cfg["output.format"]
    text = _csv_text(cfg.header(), _RISK_COLUMNS, rows)
    if fmt == "json":
        summary["rows"] = rows
        out.write(_dumps(summary))
    elif fmt == "csv":
        out.write(text)
        if out.path is not None:
            out.write(_dumps(summary), out.sibling(".summary.json"))
    else:
        if out.path is None:
            raise ConfigError("--format svg needs --out")
        csv_path = out.path.with_suffix(".csv")
        out.write(text, csv_path)
        out.write(_dumps(summary), out.sibling(".summary.json"))
        _svg_from_csv(csv_path, out.path, summary)
    out.finish()


_RATE_COLUMNS = ("p_range", "alpha_range", "lm_n_exp", "lm_log_exp", "q_n_exp", "q_log_exp")


def rates_rows(cfg: ExperimentConfig):
    rows = [{k: str(v) for k, v in r.items()} for r in regime_table()]
    points = []
    for spec in cfg["rates.points"]:
        try:
            p_s, a_s = spec.split(":")
            p, a = float(p_s), float(a_s)
            ball = BallSpec("Lp", p, a, cfg["ball.M"])
        except ValueError as exc:
            raise ConfigError(f"bad rates point {spec!r}; expected 'p:alpha' ({exc})") from exc
        rate = minimax_rate(ball)
        if p < 2:
            lm = [repr(float(e.subs({P: p, ALPHA: a}))) for e in lm_exponents(p, a)]
        else:
            lm = ["NA", "NA"]
        rows.append({"p_range": f"p={p:g}", "alpha_range": f"alpha={a:g}",
                     "lm_n_exp": lm[0], "lm_log_exp": lm[1], "q_n_exp": repr(rate.r),
                     "q_log_exp": repr(rate.as_pair()[1])})
        points.append({"p": p, "alpha": a, "r": rate.r, "log_exp": rate.log_exp, "regime": rate.regime,
                       "efficient_constant": rate.efficient_constant})
    return rows, points


def cmd_rates(cfg: ExperimentConfig, out: _Output, threads: int):
    rows, points = rates_rows(cfg)
    fmt = cfg["output.format"]
    if fmt == "json":
        out.write(_dumps({"version": __version__, "config_sha256": cfg.sha256, "table": rows[:8],
                          "points": points}))
    elif fmt == "csv":
        out.write(_csv_text(cfg.header(), _RATE_COLUMNS, rows))
    else:
        raise ConfigError("rates supports --format csv or json")
    if out.path is not None and fmt == "csv":
        sys.stdout.write(table_text(rows) + "\n")
    out.finish()


def consistency_checks(n: int = 1024, seed: int = 0) -> list[dict]:
    """Internal invariants of the block geometry and the two kernels."""
    from .accumulate import BACKENDS

    rows = []
    s = block_scheme(n)
    rows.append({"check": "block_geometry", "value": [s.m0, s.J, s.mJ],
                 "passed": s.m0 >= 1 and 2**s.J <= n < 2 ** (s.J + 1) and s.mJ == s.m0 << s.J})
    obs = simulate(ThetaVector(np.array([0.3, 0.0, 0.1])), ModelConfig(n, seed), 0)
    results = {name: block_stats(obs, s, backend=name) for name in BACKENDS}
    ref = next(iter(results.values()))
    same = all(np.array_equal(r.prefix, ref.prefix) and np.array_equal(r.thr_acc, ref.thr_acc)
               and r.tail == ref.tail and r.xi0 == ref.xi0 for r in results.values())
    rows.append({"check": "backend_agreement", "value": sorted(results), "passed": same})
    rows.append({"check": "excess_mean_positive", "value": excess_mean(2.0), "passed": excess_mean(2.0) > 0})
    return rows


def cmd_check(cfg: ExperimentConfig, out: _Output, threads: int):
    seed = cfg["run.seed"]
    l1 = lemma1_suite(cfg["check.tau_grid"], cfg["check.lemma1_reps"], seed, cfg["check.lemma1_n"])
    l2 = lemma2_dominance(cfg["check.xi"], cfg["check.lam"], cfg["check.m"], cfg["check.lemma2_reps"], seed=seed)
    cons = consistency_checks(seed=seed)
    ok = l1.passed and l2.passed and all(r["passed"] for r in cons)
    doc = {"version": __version__, "config_sha256": cfg.sha256, "seed": seed, "passed": ok,
           "suites": [l1.to_dict(), l2.to_dict(), {"name": "consistency", "passed": all(r["passed"] for r in cons),
                                                    "rows": cons}]}
    out.write(_dumps(doc))
    out.finish()
    for suite in doc["suites"]:
        status = "PASS" if suite["passed"] else "FAIL"
        sys.stderr.write(f"{status} {suite['name']}\n")
        for r in suite["rows"]:
            if not r["passed"]:
                where = ", ".join(f"{k}={r[k]}" for k in ("tau", "theta", "allocation", "x") if k in r)
                sys.stderr.write(f"  failed {r['check']} at {where}\n")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_simulate(cfg: ExperimentConfig, out: _Output, threads: int):
    n = cfg.require("run.n")
    model = _model(cfg, n)
    theta = _member(cfg["run.theta"], cfg, n)
    obs = simulate(theta, model, cfg["run.rep"])
    fmt = cfg["output.format"]
    if fmt == "json":
        out.write(json.dumps({"version": __version__, "config_sha256": cfg.sha256, "n": n, "seed": model.seed,
                              "rep": cfg["run.rep"], "theta": theta.label, "y": obs.y.tolist()}) + "\n")
    elif fmt == "csv":
        rows = [{"i": i + 1, "y": float(v)} for i, v in enumerate(obs.y)]
        out.write(_csv_text(cfg.header(), ("i", "y"), rows))
    else:
        raise ConfigError("simulate supports --format csv or json")
    out.finish()


_HANDLERS = {"estimate": cmd_estimate, "risk": cmd_risk, "rates": cmd_rates, "check": cmd_check,
             "simulate": cmd_simulate}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adaptquad", description="Quadratic functional estimation experiments.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH")
    ap.add_argument("--seed", type=int, metavar="U64")
    ap.add_argument("--reps", type=int, metavar="N")
    ap.add_argument("--threads", type=int, metavar="N", default=None)
    ap.add_argument("--format", choices=FORMATS)
    ap.add_argument("--clip", action="store_true", default=None)
    ap.add_argument("--penalty-const", type=float, metavar="REAL")
    ap.add_argument("--out", metavar="PATH")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    if threads < 1:
        sys.stderr.write("error: --threads must be positive\n")
        return EXIT_CONFIG
    overrides = {"run.seed": args.seed, "run.reps": args.reps, "output.format": args.format,
                 "run.clip": args.clip, "run.penalty_const": args.penalty_const}
    try:
        cfg = load_config(args.config, args.command, overrides)
        code = _HANDLERS[args.command](cfg, _Output(args.out, cfg), threads)
        return EXIT_OK if code is None else code
    except (ConfigError, MembershipViolation) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (NumericError, FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        sys.stderr.write(f"numeric error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
