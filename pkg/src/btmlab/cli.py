"""Config-driven experiment runner.

Each subcommand reads a flat ``key = value`` file (``--config``), applies
``--key value`` overrides, validates every field and writes one CSV whose
first line records the effective parameters.  ``report`` turns a CSV into
a static SVG line plot.

Exit statuses
-------------
0 success, 2 usage (unknown subcommand or flag), 3 invalid field,
4 parameter outside the supported regime, 5 unwritable output path,
6 numerical budget exceeded, 7 unusable input data.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import homog, kernel, sums, walk
from .env import Environment, sample_environment, volume
from .errors import ParameterError, RangeError, RegimeError, WindowTooSmallError
from .table import ResultTable

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_REGIME = 4
EXIT_OUTPUT = 5
EXIT_NUMERIC = 6
EXIT_DATA = 7


class CLIError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


# --------------------------------------------------------------------------
# value parsers


def _float(s):
    v = float(s)
    if math.isnan(v):
        raise ValueError("nan")
    return v


def _int(s):
    f = float(s)
    if not f.is_integer():
        raise ValueError(f"{s} is not an integer")
    return int(f)


def _floats(s):
    out = [_float(x) for x in str(s).split(",") if x.strip()]
    if not out:
        raise ValueError("empty list")
    return out


def _ints(s):
    out = [_int(x) for x in str(s).split(",") if x.strip()]
    if not out:
        raise ValueError("empty list")
    return out


def _auto_float(s):
    """A float, or ``auto`` for the tool's default (returned as None)."""
    if str(s).strip().lower() == "auto":
        return None
    return _float(s)


def _choice(*options):
    def parse(s):
        s = str(s).strip()
        if s not in options:
            raise ValueError(f"{s!r} not one of {', '.join(options)}")
        return s
    return parse


_str = str

# key -> (parser, default); default None means required (seed falls back to BTMLAB_SEED)
COMMON = {
    "seed": (_int, None),
    "out": (_str, "."),
}

SCHEMAS = {
    "sample-env": {"alpha": (_float, 3.0), "lo": (_int, -100), "hi": (_int, 100)},
    "lil": {"alpha": (_float, 0.5), "N_max": (_int, 2 ** 20), "c_F": (_float, 1.0)},
    "tails": {"alpha": (_float, 0.8), "n": (_int, 1000), "lambdas": (_floats, "2,4,8,16"),
              "M": (_int, 100_000)},
    "kernel": {"alpha": (_float, 3.0), "times": (_floats, "10,100,1000"), "x": (_int, 0),
               "tol": (_float, 1e-10)},
    "green": {"alpha": (_float, 3.0), "x": (_int, 0), "n": (_int, 8)},
    "walk": {"alpha": (_float, 3.0), "times": (_floats, "100"), "M": (_int, 1000),
             "x0": (_int, 0), "method": (_choice(walk.DIRECT, walk.TIMECHANGE), walk.DIRECT),
             "ensemble": (_choice(homog.QUENCHED, homog.ANNEALED), homog.QUENCHED),
             "format": (_choice("csv", "bin"), "csv")},
    "berry-esseen": {"alpha": (_float, 3.0), "times": (_floats, "25,100,400,1600"),
                     "M": (_int, 200_000),
                     "mode": (_choice(homog.QUENCHED, homog.ANNEALED), homog.QUENCHED)},
    "qv-error": {"alpha": (_float, 3.0), "times": (_floats, "10,100,1000"), "M": (_int, 10_000)},
    "scenery-error": {"alpha": (_float, 3.0), "times": (_floats, "100,1000,10000"),
                      "M": (_int, 10_000),
                      "mode": (_choice(homog.QUENCHED, homog.ANNEALED), homog.ANNEALED)},
    "lclt": {"alpha": (_float, 3.0), "ns": (_ints, "20,40,80"), "K": (_float, 2.0),
             "T1": (_float, 1.0), "T2": (_float, 2.0), "x_step": (_float, 0.1),
             "t_step": (_float, 0.25), "theta": (_auto_float, "auto"), "tol": (_float, 1e-10)},
    "cells": {"alpha": (_float, 3.0), "levels": (_ints, "8,9,10,11,12,13,14"), "a": (_float, 2.0),
              "eta": (_float, 0.75), "h": (_float, 1.0), "kappa": (_float, 0.6)},
    "moments": {"alpha": (_float, 3.0), "kind": (_choice("moment", "tightness"), "moment"),
                "eps": (_float, 1.0), "lambdas": (_floats, "50"),
                "times": (_floats, "100,1000,10000"), "n_envs": (_int, 200),
                "tol": (_float, 1e-10)},
}

# environment window used when a subcommand samples its own landscape
_ENV_HALF = 64


@dataclass
class ExperimentConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def params(self) -> dict:
        return {k: v for k, v in self.values.items() if k != "out"}


def golden_config(command: str) -> Path:
    """Path of the bundled reference config for ``command``."""
    from importlib import resources

    if command not in SCHEMAS:
        raise KeyError(command)
    return Path(str(resources.files("btmlab") / "golden" / f"{command}.cfg"))


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CLIError(EXIT_CONFIG, f"config: cannot read {path}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CLIError(EXIT_CONFIG, f"config line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def build_config(command: str, file_values: dict, overrides: dict, environ=None) -> ExperimentConfig:
    """Merge defaults, config file and overrides; reject unknown keys; parse every field."""
    environ = os.environ if environ is None else environ
    schema = {**SCHEMAS[command], **COMMON}
    raw = {}
    for source in (file_values, overrides):
        for k, v in source.items():
            if k == "command":
                if v != command:
                    raise CLIError(EXIT_CONFIG, f"command: config is for {v!r}, not {command!r}")
                continue
            if k not in schema:
                raise CLIError(EXIT_CONFIG, f"{k}: unknown key for {command}")
            raw[k] = v
    values = {}
    for k, (parse, default) in schema.items():
        v = raw.get(k, default)
        if v is None and k == "seed":
            v = environ.get("BTMLAB_SEED")
            if v is None:
                raise CLIError(EXIT_CONFIG, "seed: not given and BTMLAB_SEED is unset")
        try:
            values[k] = parse(v)
        except (TypeError, ValueError) as exc:
            raise CLIError(EXIT_CONFIG, f"{k}: invalid value {v!r} ({exc})") from None
    return ExperimentConfig(command, values)


# --------------------------------------------------------------------------
# experiments


def _env(cfg, t_max=100.0):
    half = max(_ENV_HALF, int(6 * math.sqrt(t_max)) + 16)
    return sample_environment(cfg["alpha"], (-half, half), cfg["seed"])


def _run_sample_env(cfg):
    if cfg["lo"] > cfg["hi"]:
        raise ParameterError("hi: must be >= lo")
    tab = sample_environment(cfg["alpha"], (cfg["lo"], cfg["hi"]), cfg["seed"]).to_table()
    return tab


def _run_lil(cfg):
    tab = sums.fluctuation_probe(cfg["alpha"], cfg["N_max"], cfg["seed"])
    if cfg["alpha"] <= 2:
        lc = sums.lil_constants(cfg["alpha"], cfg["c_F"])
        tab.params.update({"liminf_const": lc.liminf_const, "K_alpha": lc.K_alpha,
                           "C_alpha": "none" if lc.C_alpha is None else lc.C_alpha})
    return tab


def _run_tails(cfg):
    return sums.tail_probe(cfg["alpha"], cfg["n"], cfg["lambdas"], cfg["M"], cfg["seed"]).to_table()


def _run_kernel(cfg):
    x, times = cfg["x"], cfg["times"]
    w = kernel.window_halfwidth(max(times), cfg["tol"]) + 1
    env = sample_environment(cfg["alpha"], (x - w, x + w), cfg["seed"])
    # relabel so that the starting site is the origin
    return kernel.ondiagonal_trace(env.shifted(x), times, tol=cfg["tol"])


def _run_green(cfg):
    x, n = cfg["x"], cfg["n"]
    env = sample_environment(cfg["alpha"], (x - n, x + n), cfg["seed"])
    lo, g = kernel.green_matrix(env, x, n)
    _, u = kernel.exit_time_vector(env, x, n)
    rows = []
    for i in range(g.shape[0]):
        y = lo + i
        rows.append((y, float(env.tau(y)), float(g[x - lo, i]),
                     kernel.green_closed_form(x, n, x, y), float(u[i])))
    tab = ResultTable(["y", "tau", "green", "green_closed", "exit_time"], rows)
    tab.params["resistance"] = kernel.effective_resistance(x, n)
    tab.params["volume"] = volume(env, x, n)
    return tab


def _run_walk(cfg):
    if cfg["M"] < 1:
        raise ParameterError("M: must be >= 1")
    if cfg["ensemble"] == homog.ANNEALED:
        ends = walk.annealed_endpoints(cfg["alpha"], cfg["times"], cfg["M"], cfg["seed"],
                                       cfg["x0"], cfg["method"])
    else:
        env = _env(cfg, max(cfg["times"]))
        ends = walk.walk_endpoints(env, cfg["times"], cfg["M"], cfg["seed"], cfg["x0"],
                                   cfg["method"])
    rows = []
    for r in range(ends.positions.shape[0]):
        for j, t in enumerate(ends.times):
            rows.append((r, float(t), int(ends.positions[r, j]), int(ends.jumps[r, j])))
    return ResultTable(["replicate", "t", "X", "jumps"], rows), ends


def _run_berry_esseen(cfg):
    return homog.berry_esseen(cfg["mode"], cfg["alpha"], cfg["times"], cfg["M"], cfg["seed"]).to_table()


def _run_qv_error(cfg):
    homog._require_finite_variance(cfg["alpha"], "qv-error")
    env = _env(cfg, max(cfg["times"]))
    return homog.qv_error(env, cfg["times"], cfg["M"], cfg["seed"]).to_table()


def _run_scenery_error(cfg):
    return homog.scenery_error(cfg["mode"], cfg["alpha"], cfg["times"], cfg["M"],
                               cfg["seed"]).to_table()


def _run_lclt(cfg):
    homog._require_finite_variance(cfg["alpha"], "lclt")
    theta = cfg["theta"]
    env = _env(cfg)
    return homog.lclt_error(env, cfg["ns"], cfg["K"], cfg["T1"], cfg["T2"], cfg["x_step"],
                            cfg["t_step"], theta, cfg["tol"]).to_table()


def _run_cells(cfg):
    env = _env(cfg)
    return homog.cell_volume_scan(env, cfg["levels"], cfg["a"], cfg["eta"], cfg["h"], cfg["kappa"])


def _run_moments(cfg):
    if cfg["kind"] == "moment":
        return homog.annealed_moment(cfg["alpha"], cfg["eps"], cfg["times"], cfg["n_envs"],
                                     cfg["seed"], cfg["tol"])
    return homog.tightness_probe(cfg["alpha"], cfg["times"], cfg["n_envs"], cfg["lambdas"],
                                 cfg["seed"], cfg["tol"])


RUNNERS = {
    "sample-env": _run_sample_env,
    "lil": _run_lil,
    "tails": _run_tails,
    "kernel": _run_kernel,
    "green": _run_green,
    "walk": _run_walk,
    "berry-esseen": _run_berry_esseen,
    "qv-error": _run_qv_error,
    "scenery-error": _run_scenery_error,
    "lclt": _run_lclt,
    "cells": _run_cells,
    "moments": _run_moments,
}


def _field_of(message: str) -> str:
    head = message.split(":", 1)[0]
    return head if head.replace("_", "").isalnum() else ""


def _output_dir(cfg) -> Path:
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(EXIT_OUTPUT, f"out: cannot create {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise CLIError(EXIT_OUTPUT, f"out: directory {out} is not writable")
    return out


def run(cfg: ExperimentConfig) -> list[Path]:
    """Run one experiment; returns the written files.  Raises CLIError on failure."""
    out = _output_dir(cfg)
    try:
        result = RUNNERS[cfg.command](cfg)
    except RegimeError as exc:
        raise CLIError(EXIT_REGIME, f"alpha: {exc}") from None
    except WindowTooSmallError as exc:
        raise CLIError(EXIT_NUMERIC, f"tol: {exc}") from None
    except (ParameterError, RangeError) as exc:
        msg = str(exc)
        raise CLIError(EXIT_CONFIG, msg if _field_of(msg) else f"parameters: {msg}") from None
    extra = None
    if isinstance(result, tuple):
        result, extra = result
    table = result
    params = {"command": cfg.command, **cfg.params()}
    for k, v in table.params.items():
        params.setdefault(k, v)
    table.params = params
    written = []
    try:
        if cfg.command == "walk" and cfg["format"] == "bin":
            # flat little-endian int64 endpoints, replicate-major, plus the CSV header alone
            p = out / "walk.bin"
            extra.positions.astype("<i8").tofile(p)
            written.append(p)
            table = ResultTable(table.columns, [], table.params)
        path = out / f"{cfg.command}.csv"
        table.write_csv(path)
        written.append(path)
    except OSError as exc:
        raise CLIError(EXIT_OUTPUT, f"out: cannot write into {out}: {exc.strerror}") from None
    return written


# --------------------------------------------------------------------------
# report


def report(csv_path, x: str, y: str, out_path, logx: bool = False, logy: bool = False,
           title: str | None = None) -> Path:
    """Static SVG line plot of column ``y`` against ``x``; a pure function of the CSV bytes."""
    try:
        tab = ResultTable.read_csv(csv_path)
    except OSError as exc:
        raise CLIError(EXIT_DATA, f"csv: cannot read {csv_path}: {exc.strerror}") from None
    except (ParameterError, ValueError) as exc:
        raise CLIError(EXIT_DATA, f"csv: {exc}") from None
    for name, field in (("x", x), ("y", y)):
        if field not in tab.columns:
            raise CLIError(EXIT_DATA, f"{name}: column {field!r} not in {csv_path}")
    if len(tab) == 0:
        raise CLIError(EXIT_DATA, f"csv: {csv_path} has no data rows")

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "btmlab", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(tab.column(x), tab.column(y), marker="o")
        ax.set_xlabel(x)
        ax.set_ylabel(y)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        out_path = Path(out_path)
        try:
            fig.savefig(out_path, format="svg", metadata={"Date": None, "Creator": None})
        except OSError as exc:
            raise CLIError(EXIT_OUTPUT, f"out: cannot write {out_path}: {exc.strerror}") from None
        finally:
            plt.close(fig)
    return out_path


# --------------------------------------------------------------------------
# argument handling


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="btmlab", description=__doc__.split("\n\n")[0])
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: all available); results do not depend on it")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="flat key = value file")
        for key in {**schema, **COMMON}:
            sp.add_argument(f"--{key}", dest=f"opt_{key}", default=None)
        sp.add_argument("--threads", type=int, default=None, dest="sub_threads")
    rp = sub.add_parser("report", help="plot a CSV column as SVG")
    rp.add_argument("csv")
    rp.add_argument("--x", required=True)
    rp.add_argument("--y", required=True)
    rp.add_argument("--logx", action="store_true")
    rp.add_argument("--logy", action="store_true")
    rp.add_argument("--title")
    rp.add_argument("--out", required=True, help="SVG path")
    return p


def _set_threads(n):
    if n is None:
        return
    import numba

    if n < 1:
        raise CLIError(EXIT_CONFIG, "threads: must be >= 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _set_threads(getattr(args, "sub_threads", None) or args.threads)
        if args.command == "report":
            path = report(args.csv, args.x, args.y, args.out, args.logx, args.logy, args.title)
            print(path)
            return EXIT_OK
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {k[4:]: v for k, v in vars(args).items()
                     if k.startswith("opt_") and v is not None}
        cfg = build_config(args.command, file_values, overrides)
        for path in run(cfg):
            print(path)
    except CLIError as exc:
        print(f"btmlab {args.command}: error: {exc}", file=sys.stderr)
        return exc.status
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
