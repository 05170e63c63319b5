"""Adam, step-decay learning rates and the full-batch training loop."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .errors import NumericalError
from .problems import CausalGate, PdeProblem, gate_update, loss

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    skipped: int = 0

    @classmethod
    def zeros(cls, n, **kw):
        return cls(np.zeros(n), np.zeros(n), **kw)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray, lr: float) -> np.ndarray:
    """Bias-corrected Adam update, applied to ``params`` in place and returned.

    Non-finite gradients leave everything untouched and bump ``state.skipped``.
    """
    grads = np.asarray(grads, dtype=np.float64)
    if not np.all(np.isfinite(grads)):
        state.skipped += 1
        log.warning("non-finite gradient at Adam step %d; step skipped", state.t + 1)
        return params
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1 ** state.t)
    v_hat = state.v / (1.0 - b2 ** state.t)
    params -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


@dataclass(frozen=True)
class LrSchedule:
    initial: float = 0.01
    gamma: float = 0.9
    interval: int = 500

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("decay factor must lie in (0, 1]")
        if self.interval < 1:
            raise ValueError("decay interval must be at least 1")


def lr_at(s: LrSchedule, epoch: int) -> float:
    return s.initial * s.gamma ** (epoch // s.interval)


@dataclass
class TrainConfig:
    epochs: int = 1000
    lr: LrSchedule = field(default_factory=LrSchedule)
    report_every: int = 100
    # redraw cell-grid collocation points every this many epochs; 0 keeps them fixed
    resample_every: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.report_every < 1 or self.resample_every < 0:
            raise ValueError("epochs and resample_every must be >= 0, report_every >= 1")


@dataclass
class History:
    """Per-epoch training record; ``rel_l2`` is ``nan`` where not evaluated.

    Gated problems also carry ``mu``, the gate shift used for that epoch.
    """

    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def column(self, name) -> np.ndarray:
        return np.array([r.get(name, math.nan) for r in self.rows], dtype=np.float64)

    @property
    def last_error(self):
        errs = [r["rel_l2"] for r in self.rows if not math.isnan(r["rel_l2"])]
        return errs[-1] if errs else None

    def to_csv(self, path):
        comps = []
        for r in self.rows:
            for k in r["components"]:
                if k not in comps:
                    comps.append(k)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            gated = any("mu" in r for r in self.rows)
            w.writerow(["epoch", "lr", "loss"] + comps + ["rel_l2"] + (["mu"] if gated else []))
            for r in self.rows:
                w.writerow([r["epoch"], repr(r["lr"]), repr(r["loss"])]
                           + [repr(r["components"].get(c, math.nan)) for c in comps]
                           + ["" if math.isnan(r["rel_l2"]) else repr(r["rel_l2"])]
                           + ([repr(r.get("mu", math.nan))] if gated else []))


@dataclass
class TrainResult:
    history: History
    gate: CausalGate | None
    error: float | None


def train(net, problem: PdeProblem, cfg: TrainConfig, gate: CausalGate | None = None,
          history: History | None = None) -> TrainResult:
    """Run ``cfg.epochs`` full-batch Adam steps on ``problem``'s loss.

    ``net`` is updated in place. A non-finite loss or gradient raises
    :class:`NumericalError` carrying the partial history as ``.history``.
    Row ``e`` holds the loss before step ``e``; the relative error is evaluated
    after every ``report_every``-th step and after the last one.
    """
    history = history if history is not None else History()
    if gate is None and problem.causal:
        gate = CausalGate()
    params = net.params()
    state = AdamState.zeros(net.n_params)
    err = None
    rng = np.random.default_rng(cfg.seed) if cfg.resample_every else None
    for epoch in range(cfg.epochs):
        if rng is not None and epoch and epoch % cfg.resample_every == 0:
            problem = problem.resample(rng)
        lr = lr_at(cfg.lr, epoch)
        try:
            with Tape() as tape:
                total, comps = loss(problem, net, gate)
            grads = np.concatenate([g.ravel() for g in tape.gradient(total, params)])
            if not (np.isfinite(total.data) and np.all(np.isfinite(grads))):
                raise NumericalError(f"non-finite loss or gradient at epoch {epoch}")
        except NumericalError as exc:
            exc.history = history
            exc.epoch = epoch
            raise
        adam_step(state, net.theta, grads, lr)
        row = {"epoch": epoch, "lr": lr, "loss": float(total.data), "components": comps,
               "rel_l2": math.nan}
        if gate is not None:
            row["mu"] = gate.mu
        if (epoch + 1) % cfg.report_every == 0 or epoch + 1 == cfg.epochs:
            err = problem.relative_l2(net)
            if err is not None:
                row["rel_l2"] = err
        history.rows.append(row)
        if gate is not None:
            gate = gate_update(gate, comps["residual"])
    return TrainResult(history, gate, err)
