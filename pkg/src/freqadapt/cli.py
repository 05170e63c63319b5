"""Command-line front end: ``fit``, ``solve``, ``adapt`` and ``spectrum``.

Configuration resolves in three layers, later ones winning: the named preset,
an optional config file, then command-line flags. The config file is plain
``key = value`` lines; keys before any section apply to every problem and a
``[poisson]``-style section overrides them for that problem only::

    epochs = 5000
    hidden = 40, 40

    [poisson]
    high = 40pi
    lam = 0.02

Lists are comma separated, booleans are ``true``/``false`` and a number may
carry a ``pi`` factor (``40pi`` or ``40*pi``). The fully resolved
configuration is echoed to ``config.txt`` in the run directory in the same
format. Exit status is 0 on success, 2 on a configuration error and 3 when
training or frequency capture fails numerically.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import presets
from .adaptive import AdaptConfig, AdaptiveState, capture, restore, run_adaptive, truncate
from .errors import AdaptError, ConfigError, FormatError, NumericalError
from .network import feature_network
from .optim import LrSchedule, TrainConfig, train
from .spectral import write_frequency_csv, write_grid_csv

log = logging.getLogger("freqadapt")

COMMANDS = ("fit", "solve", "adapt", "spectrum")
OUT_ENV = "FREQADAPT_OUT"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

# flag name -> config key, for the flags that map one-to-one onto config keys
_FLAG_KEYS = {
    "lam": "lam", "I": "I", "M0": "M0", "hidden": "hidden", "epochs": "epochs",
    "lr": "lr", "lr_gamma": "lr_gamma", "lr_interval": "lr_interval",
    "activation": "activation", "h_mode": "h_mode", "dft_counts": "dft_counts",
    "embedding": "embedding", "k": "k", "report_every": "report_every",
    "resample_every": "resample_every",
}


@dataclass
class RunConfig:
    command: str
    problem: str
    scale: str
    values: dict
    out_dir: Path
    checkpoint: Path | None = None
    compare_h: bool = False
    sources: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.values["seed"]


# ---------------------------------------------------------------------------
# value parsing

def _parse_number(text: str) -> float:
    t = text.strip().lower().replace(" ", "")
    scale = 1.0
    if t.endswith("pi"):
        t = t[:-2].rstrip("*")
        scale = math.pi
        if t in ("", "+"):
            return scale
        if t == "-":
            return -scale
    return float(t) * scale


def coerce(key: str, raw, like):
    """Convert ``raw`` (string or value) to the type of the preset's ``like``."""
    try:
        if isinstance(raw, str):
            text = raw.strip()
            if isinstance(like, bool):
                if text.lower() in ("true", "yes", "1", "on"):
                    return True
                if text.lower() in ("false", "no", "0", "off"):
                    return False
                raise ValueError(text)
            if isinstance(like, int) or (like is None and key == "seed"):
                return int(text)
            if isinstance(like, float):
                return _parse_number(text)
            if isinstance(like, list):
                items = [p for p in text.replace(";", ",").split(",") if p.strip()]
                sample = like[0] if like else 0
                if isinstance(sample, int) and not isinstance(sample, bool):
                    return [int(p) for p in items]
                return [_parse_number(p) for p in items]
            return text
        if isinstance(like, float) and isinstance(raw, (int, float)):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key!r}") from None


def read_config_file(path, problem: str) -> dict:
    """Top-level keys plus the ``[problem]`` section, the latter winning."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        parser.read_string("[__top__]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    out = dict(parser["__top__"])
    if parser.has_section(problem):
        out.update(parser[problem])
    return out


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ", ".join(format_value(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_config(cfg: RunConfig, path):
    with open(path, "w") as fh:
        fh.write(f"# command = {cfg.command}\n")
        for key in sorted(cfg.values):
            fh.write(f"{key} = {format_value(cfg.values[key])}\n")


# ---------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="freqadapt", description="Frequency-adaptive multi-scale networks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--problem", default="fit" if name == "fit" else None,
                       required=name in ("solve", "adapt"))
        s.add_argument("--scale", default="desk")
        s.add_argument("--seed", type=int, required=True)
        s.add_argument("--config", dest="config_file")
        s.add_argument("--out")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any configuration key")
        s.add_argument("--lam", "--lambda", dest="lam")
        s.add_argument("--I", dest="I")
        s.add_argument("--M0", dest="M0")
        s.add_argument("--hidden")
        s.add_argument("--epochs")
        s.add_argument("--lr")
        s.add_argument("--lr-gamma", dest="lr_gamma")
        s.add_argument("--lr-interval", dest="lr_interval")
        s.add_argument("--activation")
        s.add_argument("--h-mode", dest="h_mode")
        s.add_argument("--dft-counts", dest="dft_counts")
        s.add_argument("--report-every", dest="report_every")
        s.add_argument("--resample-every", dest="resample_every",
                       help="redraw interior collocation points every N epochs (0: never)")
        s.add_argument("--embedding")
        s.add_argument("--k")
        if name == "adapt":
            s.add_argument("--compare-h", action="store_true",
                           help="also run with learnable h and tabulate both modes")
        if name == "spectrum":
            s.add_argument("--checkpoint", required=True)
            s.add_argument("--phase", type=int, default=-1)
    return p


def _warn_repeats(argv):
    seen = {}
    for tok in argv:
        if tok.startswith("--"):
            flag = tok.split("=", 1)[0]
            if flag == "--set":
                continue
            seen[flag] = seen.get(flag, 0) + 1
    for flag, n in seen.items():
        if n > 1:
            log.warning("%s given %d times; the last value wins", flag, n)


def parse_config(argv=None) -> RunConfig:
    """Resolve presets, config file and flags into a :class:`RunConfig`."""
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    _warn_repeats(argv)
    if args.command == "spectrum":
        return _spectrum_config(args)
    values = presets.preset(args.problem, args.scale)
    sources = {k: "preset" for k in values}
    layers = []
    if args.config_file:
        layers.append(("file", read_config_file(args.config_file, args.problem)))
    flags = {key: getattr(args, attr) for attr, key in _FLAG_KEYS.items()
             if getattr(args, attr, None) is not None}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        flags[k.strip()] = v
    layers.append(("flag", flags))
    for source, layer in layers:
        for key, raw in layer.items():
            if key in ("problem", "scale"):
                raise ConfigError(f"{key!r} is chosen on the command line only")
            if key not in values:
                raise ConfigError(f"unknown configuration key {key!r} for problem {args.problem!r}")
            values[key] = coerce(key, raw, values[key])
            sources[key] = source
    values["seed"] = args.seed
    sources["seed"] = "flag"
    _validate(values)
    out = Path(args.out) if args.out else (
        Path(os.environ.get(OUT_ENV, "runs")) / f"{args.command}_{args.problem}_{args.scale}_s{args.seed}")
    return RunConfig(args.command, args.problem, args.scale, values, out,
                     compare_h=getattr(args, "compare_h", False), sources=sources)


def _spectrum_config(args) -> RunConfig:
    ck = Path(args.checkpoint)
    out = Path(args.out) if args.out else Path(os.environ.get(OUT_ENV, "runs")) / f"spectrum_{ck.stem}"
    values = {"seed": args.seed, "phase": args.phase}
    if args.lam is not None:
        values["lam"] = coerce("lam", args.lam, 0.0)
    if args.dft_counts is not None:
        values["dft_counts"] = coerce("dft_counts", args.dft_counts, [0])
    return RunConfig("spectrum", args.problem or "", args.scale, values, out, checkpoint=ck)


def _validate(v: dict):
    if not 0.0 < v["lam"] < 1.0:
        raise ConfigError("lam must lie in (0, 1)")
    for key in ("I", "resample_every"):
        if v[key] < 0:
            raise ConfigError(f"{key} must be non-negative")
    for key in ("M0", "epochs", "lr_interval", "report_every"):
        if v[key] < 1:
            raise ConfigError(f"{key} must be at least 1")
    if not v["hidden"] or min(v["hidden"]) < 1:
        raise ConfigError("hidden widths must be positive")
    if v["h_mode"] not in ("fixed", "learnable"):
        raise ConfigError("h_mode must be fixed or learnable")
    if not 0.0 < v["lr_gamma"] <= 1.0:
        raise ConfigError("lr_gamma must lie in (0, 1]")
    from .autodiff import ACTIVATIONS
    if v["activation"] not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {v['activation']!r}")


def train_config(v: dict) -> TrainConfig:
    return TrainConfig(v["epochs"], LrSchedule(v["lr"], v["lr_gamma"], v["lr_interval"]),
                       v["report_every"], v["resample_every"], v["seed"])


def adapt_config(v: dict, **over) -> AdaptConfig:
    kw = dict(I=v["I"], lam=v["lam"], M0=v["M0"], hidden=tuple(v["hidden"]),
              activation=v["activation"], h_mode=v["h_mode"], train=train_config(v),
              dft_counts=tuple(v["dft_counts"]) if v["dft_counts"] else None,
              seed=v["seed"], warm_start=v["warm_start"])
    kw.update(over)
    return AdaptConfig(**kw)


# ---------------------------------------------------------------------------
# reports

def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def emit_report(state: AdaptiveState, out_dir) -> list:
    """Write summary, per-phase spectra, captured sets, error grids and histories.

    Everything comes from ``state``; nothing is re-evaluated here.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    summary = out / "summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "relative_l2", "n_features", "n_captured", "n_subnetworks",
                    "epochs"])
        for r in state.records:
            w.writerow([r.it, _fmt(r.error), len(r.features),
                        "" if r.captured is None else len(r.captured),
                        len(r.network.subnets), len(r.history)])
    written.append(summary)
    for r in state.records:
        for name, fs in (("features", r.features), ("spectrum", r.spectrum),
                         ("captured", r.captured)):
            if fs is not None:
                p = out / f"{name}_{r.it}.csv"
                write_frequency_csv(fs, p)
                written.append(p)
        if r.error_grid is not None:
            p = out / f"error_{r.it}.csv"
            write_grid_csv(r.error_grid, p)
            written.append(p)
        p = out / f"history_{r.it}.csv"
        r.history.to_csv(p)
        written.append(p)
    status = out / "status.txt"
    status.write_text(f"stop_reason = {state.stop_reason}\nphases = {state.phases}\n"
                      f"diagnostic = {state.diagnostic}\n")
    written.append(status)
    return written


def emit_h_comparison(fixed: AdaptiveState, learnable: AdaptiveState, out_dir) -> Path:
    """Relative errors per phase, fixed and learnable ``h`` side by side."""
    p = Path(out_dir) / "h_comparison.csv"
    n = max(len(fixed.records), len(learnable.records))
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "fixed_h", "learnable_h"])
        for i in range(n):
            a = fixed.records[i].error if i < len(fixed.records) else None
            b = learnable.records[i].error if i < len(learnable.records) else None
            w.writerow([i, _fmt(a), _fmt(b)])
    return p


# ---------------------------------------------------------------------------
# commands

def _failed(state: AdaptiveState) -> bool:
    return state.stop_reason in ("numerical_error", "adapt_error")


def cmd_adapt(cfg: RunConfig) -> int:
    problem = presets.build_problem(cfg.values)
    acfg = adapt_config(cfg.values)
    meta = {"command": cfg.command, "problem": cfg.problem, "scale": cfg.scale,
            "values": cfg.values}
    if cfg.command == "solve":
        acfg = adapt_config(cfg.values, I=0)
    state = run_adaptive(problem, acfg, checkpoint_dir=cfg.out_dir / "checkpoints", meta=meta)
    emit_report(state, cfg.out_dir)
    if state.diagnostic:
        log.error("run stopped: %s", state.diagnostic)
    if cfg.compare_h and state.records:
        other = "learnable" if acfg.h_mode == "fixed" else "fixed"
        # phase 0 never uses h, so the second mode starts from the shared first phase
        second = run_adaptive(problem, adapt_config(cfg.values, h_mode=other),
                              resume_from=truncate(state, 0), meta=meta)
        emit_report(second, cfg.out_dir / f"h_{other}")
        pair = (state, second) if other == "learnable" else (second, state)
        emit_h_comparison(*pair, cfg.out_dir)
        if _failed(second):
            return EXIT_NUMERICAL
    return EXIT_NUMERICAL if _failed(state) else EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    v = cfg.values
    problem = presets.build_problem(v)
    net = feature_network(v["embedding"], [v["k"]], v["hidden"], problem.dim, problem.out_dim,
                          v["activation"], v["seed"])
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = train(net, problem, train_config(v))
    except NumericalError as exc:
        exc.history.to_csv(cfg.out_dir / "history.csv")
        log.error("%s", exc)
        return EXIT_NUMERICAL
    result.history.to_csv(cfg.out_dir / "history.csv")
    with open(cfg.out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["embedding", "k", "epochs", "relative_l2"])
        w.writerow([v["embedding"], repr(float(v["k"])), v["epochs"], _fmt(result.error)])
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    try:
        state = restore(cfg.checkpoint)
    except (FormatError, OSError) as exc:
        raise ConfigError(f"cannot load checkpoint: {exc}") from None
    if not state.records:
        raise ConfigError("checkpoint holds no trained phase")
    run_values = state.config.get("meta", {}).get("values")
    if not run_values:
        raise ConfigError("checkpoint does not record its problem configuration")
    rec = state.records[cfg.values["phase"]]
    problem = presets.build_problem(run_values)
    lam = cfg.values.get("lam", state.config["lam"])
    counts = cfg.values.get("dft_counts") or state.config["dft_counts"] or run_values["dft_counts"]
    spectrum, selected = capture(problem.solution(rec.network), problem, tuple(counts), lam)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_frequency_csv(spectrum, cfg.out_dir / f"spectrum_{rec.it}.csv")
    write_frequency_csv(selected, cfg.out_dir / f"captured_{rec.it}.csv")
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    if cfg.command == "spectrum":
        return cmd_spectrum(cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, cfg.out_dir / "config.txt")
    if cfg.command == "fit":
        return cmd_fit(cfg)
    return cmd_adapt(cfg)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (NumericalError, AdaptError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
