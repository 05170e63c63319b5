"""Named benchmark configurations at two scales.

``paper`` keeps the published constants (frequencies, widths, epochs,
schedules); ``desk`` swaps the extreme frequencies for milder ones and shrinks
the networks so a full adaptive run finishes in minutes on one CPU core.
A resolved configuration is a flat dict; :func:`build_problem` turns it into a
:class:`~freqadapt.problems.PdeProblem`.
"""
from __future__ import annotations

import copy

from .errors import ConfigError
from .problems import (PI, fit_problem, heat_problem, poisson_problem,
                       schrodinger_problem, wave_problem)

SCALES = ("desk", "paper")

# keys every preset carries; the CLI type-checks overrides against these
COMMON = {
    "seed": None,
    "I": 4,
    "lam": 0.01,
    "M0": 6,
    "hidden": [100, 100, 100],
    "activation": "sfm",
    "h_mode": "fixed",
    "epochs": 100_000,
    "lr": 0.01,
    "lr_gamma": 0.9,
    "lr_interval": 500,
    "report_every": 100,
    "resample_every": 0,
    "dft_counts": [1000],
    "warm_start": False,
    "embedding": "hybrid",
    "k": 0.0,
}

_PRESETS = {
    "poisson": {
        "paper": dict(high=200 * PI, amp=0.1, n_interior=1000, w_r=1.0, w_b=1.0),
        "desk": dict(high=40 * PI, amp=0.1, n_interior=1000, w_r=1.0, w_b=1.0,
                     hidden=[40, 40], epochs=20_000),
    },
    "heat": {
        "paper": dict(freq=500 * PI, interior=[64, 32], n_boundary=200, epochs=50_000,
                      dft_counts=[3000, 50], eval_counts=[3000, 50], w_r=1.0, w_b=1.0),
        "desk": dict(freq=20 * PI, interior=[100, 20], n_boundary=200, epochs=10_000,
                     hidden=[40, 40], dft_counts=[200, 20], eval_counts=[200, 20],
                     w_r=1.0, w_b=1.0),
    },
    "wave": {
        "paper": dict(c2=25.0, interior=[32, 64], n_boundary=200, n_initial=200,
                      w_u=1000.0, w_ut=1000.0, w_r=1.0, lr_gamma=0.8, lr_interval=5000,
                      dft_counts=[100, 100], eval_counts=[100, 100]),
        "desk": dict(c2=25.0, interior=[32, 64], n_boundary=200, n_initial=200,
                     w_u=1000.0, w_ut=1000.0, w_r=1.0, lr_gamma=0.8, lr_interval=1000,
                     hidden=[40, 40], epochs=10_000, dft_counts=[64, 64],
                     eval_counts=[100, 100]),
    },
    "schrodinger": {
        "paper": dict(eps=0.05, T=0.5, interior=[64, 32], n_periodic=200, lam=0.1,
                      hidden=[200, 200, 200], lr_interval=1000, w_r=1.0, w_b=1.0,
                      dft_counts=[256, 32], eval_counts=[128, 10]),
        "desk": dict(eps=0.05, T=0.5, interior=[64, 32], n_periodic=200, lam=0.1,
                     hidden=[50, 50], epochs=5000, lr_interval=1000, w_r=1.0, w_b=1.0,
                     dft_counts=[256, 32], eval_counts=[128, 10]),
    },
    "fit": {
        "paper": dict(target="sin40", n=1000, activation="sigmoid", lr_interval=1000,
                      embedding="hybrid", k=40 * PI, I=0, M0=1),
        "desk": dict(target="sin40", n=1000, activation="sigmoid", lr_interval=1000,
                     embedding="hybrid", k=40 * PI, I=0, M0=1, hidden=[40, 40],
                     epochs=5000),
    },
}

PROBLEMS = tuple(_PRESETS)


def preset(problem: str, scale: str = "desk") -> dict:
    """Fresh copy of the fully populated configuration for ``problem`` at ``scale``."""
    if problem not in _PRESETS:
        raise ConfigError(f"unknown problem {problem!r}; choose from {list(PROBLEMS)}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; choose from {list(SCALES)}")
    cfg = copy.deepcopy(COMMON)
    cfg.update(copy.deepcopy(_PRESETS[problem][scale]))
    cfg["problem"] = problem
    cfg["scale"] = scale
    return cfg


def _pick(cfg, *names):
    return {n: cfg[n] for n in names if n in cfg}


def build_problem(cfg: dict):
    """Instantiate the problem described by a resolved configuration."""
    name = cfg["problem"]
    if name == "poisson":
        return poisson_problem(eval_count=cfg.get("eval_count", 1000),
                               **_pick(cfg, "high", "amp", "n_interior", "w_r", "w_b"))
    if name == "heat":
        return heat_problem(interior=tuple(cfg["interior"]), eval_counts=tuple(cfg["eval_counts"]),
                            **_pick(cfg, "freq", "n_boundary", "w_r", "w_b"))
    if name == "wave":
        return wave_problem(interior=tuple(cfg["interior"]), eval_counts=tuple(cfg["eval_counts"]),
                            **_pick(cfg, "c2", "n_boundary", "n_initial", "w_u", "w_ut", "w_r"))
    if name == "schrodinger":
        return schrodinger_problem(interior=tuple(cfg["interior"]),
                                   eval_counts=tuple(cfg["eval_counts"]),
                                   **_pick(cfg, "eps", "T", "n_periodic", "w_r", "w_b"))
    if name == "fit":
        return fit_problem(cfg["target"], n=cfg["n"])
    raise ConfigError(f"unknown problem {name!r}")
