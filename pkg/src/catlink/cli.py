"""Batch runner: ``catlink <experiment> [--param value]... --out PATH``.

Every experiment writes one plot-ready table. Output files start with a
header that echoes the resolved configuration, so any output can be fed back
through ``--config`` to reproduce it.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__, channel, detection, device, fock, preparation, qubit

MAGIC = "# catlink-output"
FORMATS = ("csv", "json")


class ConfigError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key
        self.message = message


# --------------------------------------------------------------------------- parameter parsing


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included when hit) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("grid must be start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def _int(text: str) -> int:
    return int(text)


def _str(text: str) -> str:
    return text


@dataclass(frozen=True)
class Param:
    parse: Callable[[str], Any]
    default: str | None
    check: Callable[[Any], str | None] = lambda v: None


def _in_range(lo, hi, lo_open=False, hi_open=False, what="value"):
    def check(v):
        vals = v if isinstance(v, list) else [v]
        for x in vals:
            if (x < lo or (lo_open and x == lo)) or (x > hi or (hi_open and x == hi)):
                lb = "(" if lo_open else "["
                rb = ")" if hi_open else "]"
                return f"{what} must lie in {lb}{lo}, {hi}{rb}, got {x!r}"
        return None

    return check


def _positive_int(what):
    return lambda v: None if v >= 1 else f"{what} must be >= 1, got {v}"


def _nonneg(what):
    return lambda v: None if v >= 0 else f"{what} must be >= 0, got {v}"


def _choice(*options):
    return lambda v: None if v in options else f"must be one of {', '.join(map(str, options))}, got {v!r}"


R_CHECK = _in_range(-1, 1, what="r")
ALPHA = Param(float, "2.0", _nonneg("alpha"))
SEED = Param(_int, "0", _nonneg("seed"))
EPS = Param(float, "1e-5", _in_range(0, 1, True, True, "epsilon"))
MAX_STEPS = Param(_int, "1000000", _positive_int("max_steps"))
CUTOFF = Param(_int, "0", _nonneg("cutoff"))  # 0 selects the default rule

SCHEMAS: dict[str, dict[str, Param]] = {
    "prepare": {
        "alpha": ALPHA,
        "beta": Param(float, repr(preparation.BALANCED), _nonneg("beta")),
        "T": Param(float, repr(preparation.BALANCED), _in_range(0, 1, what="T")),
        "mode": Param(_str, "local", _choice("local", "third-party")),
        "cutoff": CUTOFF,
    },
    "transmit": {
        "alpha": ALPHA,
        "r": Param(float, "1.0", R_CHECK),
        "T0": Param(float, "0.95", _in_range(0, 1, lo_open=True, what="T0")),
        "T1": Param(float, "0.95", _in_range(0, 1, lo_open=True, what="T1")),
        "l_over_L": Param(parse_grid, "0:1:0.1", _in_range(0, math.inf, what="l_over_L")),
        "n_steps": Param(_int, "1", _positive_int("n_steps")),
        "cutoff": CUTOFF,
    },
    "purify-walk": {
        "r": Param(float, "0.5", R_CHECK),
        "start": Param(float, "nan"),
        "epsilon": EPS,
        "max_steps": MAX_STEPS,
        "seed": SEED,
    },
    "purify-fock": {
        "alpha": Param(float, "2.5", _nonneg("alpha")),
        "R": Param(float, "0.5", _in_range(-1, 1, what="R")),
        "r": Param(float, "0.5", R_CHECK),
        "epsilon": EPS,
        "max_steps": MAX_STEPS,
        "seed": SEED,
        "discriminator": Param(_str, "onoff", _choice("onoff", "projective")),
    },
    "mean-steps": {
        "r": Param(parse_grid, "0.9,0.8,0.7,0.6,0.5,0.4,0.3,0.2,0.1", _in_range(-1, 1, what="r")),
        "epsilon": EPS,
        "trials": Param(_int, "10000", _positive_int("trials")),
        "max_steps": MAX_STEPS,
        "seed": SEED,
    },
    "eof-curve": {
        "r": Param(parse_grid, "0:1:0.01", _in_range(-1, 1, what="r")),
    },
    "backaction-curve": {
        "gamma": Param(parse_grid, "0:2:0.01", _in_range(0, math.inf, what="gamma")),
        "r": Param(float, "1.0", R_CHECK),
    },
    "interference": {
        "alpha": Param(float, "1.2", _nonneg("alpha")),
        "r": Param(float, "0.5", R_CHECK),
        "gamma": Param(float, "0.6", _in_range(0, math.inf, lo_open=True, what="gamma")),
        "dphi": Param(parse_grid, f"0:{2 * math.pi!r}:{math.pi / 50!r}"),
        "fock": Param(_int, "0", _choice(0, 1)),
        "cutoff": CUTOFF,
    },
    "complementarity": {
        "alpha": Param(float, "3.0", _nonneg("alpha")),
        "cutoff": CUTOFF,
    },
}
ALIASES = {"dphi-grid": "dphi", "dphi_grid": "dphi", "l/L": "l_over_L"}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict[str, str] = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"

    def resolved(self) -> dict[str, Any]:
        """Parsed and validated parameters, defaults filled in."""
        if self.experiment not in SCHEMAS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        if self.format not in FORMATS:
            raise ConfigError("format", f"format must be csv or json, got {self.format!r}")
        schema = SCHEMAS[self.experiment]
        for key in self.params:
            if key not in schema:
                raise ConfigError(key, f"unknown parameter for {self.experiment}")
        out = {}
        for key, spec in schema.items():
            raw = self.params.get(key, spec.default)
            try:
                value = spec.parse(raw)
            except ValueError as exc:
                raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from None
            problem = spec.check(value)
            if problem:
                raise ConfigError(key, problem)
            out[key] = value
        return out

    def echo(self) -> dict[str, str]:
        """Every parameter as text, defaults included, for the output header."""
        schema = SCHEMAS[self.experiment]
        return {k: self.params.get(k, schema[k].default) for k in schema}


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key=value`` lines with ``#`` comments; also accepts files emitted
    by this tool (header block of CSV output, or the ``config`` object of JSON)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    if text.lstrip().startswith("{"):
        try:
            return {k: str(v) for k, v in json.loads(text)["config"].items()}
        except (ValueError, KeyError, TypeError):
            raise ConfigError("config", f"{path} is not a catlink JSON output") from None
    lines = text.splitlines()
    emitted = bool(lines) and lines[0].startswith(MAGIC)
    out = {}
    for line in lines:
        if emitted:
            if not line.startswith("#"):
                break
            line = line[1:]
        else:
            line = line.split("#", 1)[0]
        line = line.strip()
        if not line or "=" not in line:
            if line and not emitted:
                raise ConfigError("config", f"malformed line {line!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    if emitted:
        out.pop("version", None)
    return out


# --------------------------------------------------------------------------- experiments


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    summary: dict[str, Any] = field(default_factory=dict)


def _cutoff(value: int, alpha: float) -> int:
    return value if value > 0 else fock.default_cutoff(alpha)


def run_prepare(p: dict[str, Any]) -> Table:
    a, beta = p["alpha"], p["beta"]
    c = _cutoff(p["cutoff"], a)
    modes = fock.ModeSpec((c, c))
    if p["mode"] == "local":
        T = p["T"]
        R = -math.sqrt(max(0.0, 1 - T * T))
        res = preparation.prepare_entangled_cats(a, beta, T, R, modes)
        closed = preparation.success_probability(a, beta, T, R)
    else:
        res = preparation.third_party_prepare(a, beta, modes)
        closed = preparation.third_party_probability(a, beta)
    fid = res.state.fidelity(preparation.entangled_cat_state(a, c)) if res.succeeded else math.nan
    return Table(
        ["alpha", "probability", "probability_closed", "fidelity"],
        [[a, res.probability, closed, fid]],
    )


def run_transmit(p: dict[str, Any]) -> Table:
    a = p["alpha"]
    ps = channel.ParamState.symmetric(a, p["r"])
    c = _cutoff(p["cutoff"], a)
    rho = channel.to_density_matrix(ps, c)
    rows = []
    for x in p["l_over_L"]:
        spec = channel.ChannelSpec(p["T0"], p["T1"], 1.0, x, p["n_steps"])
        ana = channel.propagate_analytic(ps, spec)
        fit = channel.fit_param_state(channel.propagate_discrete(rho, spec), a)
        rows.append([x, ana.alpha0.real, ana.alpha1.real, ana.r, fit.state.r, fit.residual])
    return Table(["l_over_L", "alpha0", "alpha1", "r_analytic", "r_discrete", "fit_residual"], rows)


def _walk_table(walk: qubit.PurityWalk, with_outcomes: bool = False) -> Table:
    cols = ["n", "R", "sign", "p"]
    rows = [[0, walk.start, 0, 1.0]]
    for i, (R, s, pr) in enumerate(walk.trajectory, 1):
        rows.append([i, R, s, pr])
    if with_outcomes:
        cols += ["j0", "k0", "j1", "k1"]
        rows[0] += ["", "", "", ""]
        for row, o in zip(rows[1:], walk.outcomes or []):
            row += list(o)
    summary = {"steps": walk.steps, "converged": walk.converged, "limit_sign": walk.limit_sign}
    return Table(cols, rows, summary)


def _require_converged(walk: qubit.PurityWalk, max_steps: int) -> None:
    if not walk.converged:
        raise qubit.NonConvergenceError(f"walk did not converge within max_steps={max_steps}", 1)


def run_purify_walk(p: dict[str, Any]) -> Table:
    start = None if math.isnan(p["start"]) else p["start"]
    if start is not None and abs(start) > 1:
        raise ConfigError("start", f"start must satisfy |start| <= 1, got {start}")
    walk = qubit.run_walk(p["r"], p["epsilon"], p["max_steps"], p["seed"], start)
    _require_converged(walk, p["max_steps"])
    return _walk_table(walk)


def run_purify_fock(p: dict[str, Any]) -> Table:
    dm = device.DeviceMap(p["alpha"], p["r"], discriminator=p["discriminator"])
    walk = device.feedback_loop(
        p["R"], p["r"], p["epsilon"], p["alpha"], p["seed"], "fock", p["max_steps"], dm
    )
    _require_converged(walk, p["max_steps"])
    return _walk_table(walk, with_outcomes=True)


def run_mean_steps(p: dict[str, Any]) -> Table:
    rows = []
    root = np.random.SeedSequence(p["seed"])
    for r, ss in zip(p["r"], root.spawn(len(p["r"]))):
        nbar, se = qubit.mean_steps(r, p["epsilon"], p["trials"], ss, p["max_steps"])
        rows.append([r, nbar, se, qubit.expected_steps_exact(r, p["epsilon"])])
    return Table(["r", "nbar", "stderr", "nbar_exact"], rows)


def run_eof_curve(p: dict[str, Any]) -> Table:
    return Table(["r", "E"], [list(row) for row in detection.entanglement_curve(p["r"])])


def run_backaction_curve(p: dict[str, Any]) -> Table:
    rows = []
    for g in p["gamma"]:
        x = 2 * g * g
        rows.append([g, detection.cosh_weight(x), detection.sinh_weight(x), detection.entanglement_after_probe(p["r"], g)])
    return Table(["gamma", "C", "S", "E"], rows)


def run_interference(p: dict[str, Any]) -> Table:
    ps = channel.ParamState.symmetric(p["alpha"], p["r"])
    c = _cutoff(p["cutoff"], p["alpha"])
    cols = ["dphi", "intensity"]
    rows = []
    for d in p["dphi"]:
        row = [d, detection.interference_intensity_closed(ps, p["gamma"], d)]
        if p["fock"]:
            row.append(detection.interference_intensity(ps, p["gamma"], d, c))
        rows.append(row)
    if p["fock"]:
        cols.append("intensity_fock")
    vis, sign = detection.contrast(ps, p["gamma"], fock_level=bool(p["fock"]))
    M = detection.parity_coincidence_closed(ps)
    return Table(cols, rows, {"contrast": vis, "sign_of_r": sign, "parity_coincidence": M})


def run_complementarity(p: dict[str, Any]) -> Table:
    c = _cutoff(p["cutoff"], p["alpha"])
    rep = detection.complementarity_demo(p["alpha"], c)
    return Table(["case", "mi_fock", "mi_qubit"], [list(r) for r in rep.rows()])


RUNNERS: dict[str, Callable[[dict[str, Any]], Table]] = {
    "prepare": run_prepare,
    "transmit": run_transmit,
    "purify-walk": run_purify_walk,
    "purify-fock": run_purify_fock,
    "mean-steps": run_mean_steps,
    "eof-curve": run_eof_curve,
    "backaction-curve": run_backaction_curve,
    "interference": run_interference,
    "complementarity": run_complementarity,
}


# --------------------------------------------------------------------------- output


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v: Any) -> Any:
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    return v


def render(config: ExperimentConfig, table: Table) -> str:
    echo = {"experiment": config.experiment, **config.echo()}
    if config.format == "json":
        doc = {
            "version": __version__,
            "config": echo,
            "columns": table.columns,
            "rows": [[_jsonable(v) for v in row] for row in table.rows],
            "summary": {k: _jsonable(v) for k, v in table.summary.items()},
        }
        return json.dumps(doc, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(f"{MAGIC}\n")
    buf.write(f"# version={__version__}\n")
    for k, v in echo.items():
        buf.write(f"# {k}={v}\n")
    for k, v in table.summary.items():
        buf.write(f"#! {k}: {_fmt(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def run_experiment(config: ExperimentConfig) -> str:
    """Validate, run and render; raises ConfigError or NonConvergenceError."""
    params = config.resolved()
    threads = os.environ.get("CATLINK_THREADS")
    if threads is not None and not threads.strip().isdigit():
        raise ConfigError("CATLINK_THREADS", f"must be a positive integer, got {threads!r}")
    return render(config, RUNNERS[config.experiment](params))


# --------------------------------------------------------------------------- entry point


def _error_line(kind: str, key: str, message: str) -> str:
    return f'catlink: error: kind={kind} key={key} message={json.dumps(message)}'


def _split_params(extra: list[str]) -> dict[str, str]:
    params = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise ConfigError(tok, "expected --name value")
        name = tok[2:]
        if "=" in name:
            name, value = name.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise ConfigError(name, "missing value")
            value = extra[i + 1]
            i += 2
        params[ALIASES.get(name, name)] = value
    return params


def build_config(argv: list[str]) -> ExperimentConfig:
    parser = argparse.ArgumentParser(prog="catlink", add_help=True)
    parser.add_argument("experiment", choices=sorted(SCHEMAS))
    parser.add_argument("--out", required=True)
    parser.add_argument("--format", default=None)
    parser.add_argument("--seed", default=None)
    parser.add_argument("--config", default=None)
    known, extra = parser.parse_known_args(argv)
    params: dict[str, str] = {}
    if known.config:
        params.update(read_config_file(known.config))
        file_exp = params.pop("experiment", known.experiment)
        if file_exp != known.experiment:
            raise ConfigError("experiment", f"config file is for {file_exp!r}, not {known.experiment!r}")
    params.update(_split_params(extra))
    if known.seed is not None and "seed" in SCHEMAS[known.experiment]:
        params["seed"] = known.seed
    fmt = known.format or Path(known.out).suffix.lstrip(".").lower()
    fmt = fmt if fmt in FORMATS or known.format else "csv"
    return ExperimentConfig(known.experiment, params, known.out, fmt)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = build_config(argv)
    except ConfigError as exc:
        print(_error_line("config", exc.key, exc.message), file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return 2 if exc.code else 0

    def show(message, category, filename, lineno, file=None, line=None):
        kind = "truncation" if issubclass(category, fock.UnderTruncationWarning) else "warning"
        print(f"catlink: warning: kind={kind} message={json.dumps(str(message))}", file=sys.stderr)

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = show
            text = run_experiment(config)
    except ConfigError as exc:
        print(_error_line("config", exc.key, exc.message), file=sys.stderr)
        return 2
    except qubit.NonConvergenceError as exc:
        print(_error_line("nonconvergence", "max_steps", str(exc)), file=sys.stderr)
        return 3
    Path(config.out).write_text(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
