"""The frequency-adaptive loop: train, capture, compare, rebuild.

Each training phase ``It`` trains a network built from the feature set
``B_It``, samples it on a uniform grid, takes the DFT and keeps the dominant
frequencies as ``B_{It+1}``. The loop ends when the captured set repeats,
when ``It`` passes ``I``, or when capture/training fails; in every case the
state returned carries the complete per-phase record.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import AdaptError, ConfigError, FormatError, NumericalError
from .network import ScaleNetwork, initial_network, rebuild
from .optim import History, LrSchedule, TrainConfig, train
from .spectral import (FrequencySet, GridField, canonical, dft, even_extend, fold_conjugates,
                       sample_grid, select_frequencies)

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass
class AdaptConfig:
    I: int = 4
    lam: float = 0.01
    M0: int = 6
    hidden: tuple = (100, 100, 100)
    activation: str = "sfm"
    h_mode: str = "fixed"
    train: TrainConfig = field(default_factory=TrainConfig)
    dft_counts: tuple | None = None
    seed: int = 0
    warm_start: bool = False

    def __post_init__(self):
        if self.I < 0:
            raise ConfigError("I must be non-negative")
        if not 0.0 < self.lam < 1.0:
            raise ConfigError("lambda must lie in (0, 1)")
        if self.M0 < 1:
            raise ConfigError("M0 must be at least 1")
        self.hidden = tuple(int(w) for w in self.hidden)

    def to_dict(self):
        return {"I": self.I, "lam": self.lam, "M0": self.M0, "hidden": list(self.hidden),
                "activation": self.activation, "h_mode": self.h_mode,
                "epochs": self.train.epochs, "lr": self.train.lr.initial,
                "lr_gamma": self.train.lr.gamma, "lr_interval": self.train.lr.interval,
                "report_every": self.train.report_every,
                "resample_every": self.train.resample_every,
                "dft_counts": None if self.dft_counts is None else list(self.dft_counts),
                "seed": self.seed, "warm_start": self.warm_start}

    @classmethod
    def from_dict(cls, d):
        tc = TrainConfig(d["epochs"], LrSchedule(d["lr"], d["lr_gamma"], d["lr_interval"]),
                         d["report_every"], d.get("resample_every", 0))
        return cls(d["I"], d["lam"], d["M0"], d["hidden"], d["activation"], d["h_mode"], tc,
                   None if d["dft_counts"] is None else tuple(d["dft_counts"]), d["seed"],
                   d.get("warm_start", False))


@dataclass
class PhaseRecord:
    """Everything one training phase produced; reports read only from here."""

    it: int
    features: FrequencySet          # B_It, the set the network was built from
    network: ScaleNetwork           # trained network of this phase
    error: float | None             # relative L2 after training (None: no reference)
    history: History
    spectrum: FrequencySet | None = None    # folded DFT of the trained output
    captured: FrequencySet | None = None    # B_{It+1}
    error_grid: GridField | None = None     # |u - u_net| on the evaluation grid
    seed: int = 0


@dataclass
class AdaptiveState:
    records: list = field(default_factory=list)
    next_features: FrequencySet | None = None
    phases: int = 0
    stop_reason: str | None = None
    diagnostic: str = ""
    config: dict = field(default_factory=dict)

    @property
    def it(self) -> int:
        """Index of the last trained phase (``-1`` before any training)."""
        return len(self.records) - 1

    @property
    def network(self) -> ScaleNetwork | None:
        return self.records[-1].network if self.records else None

    @property
    def features(self) -> FrequencySet | None:
        return self.records[-1].features if self.records else None

    @property
    def errors(self) -> list:
        return [r.error for r in self.records]

    @property
    def captured_sets(self) -> list:
        return [r.captured for r in self.records]

    @property
    def finished(self) -> bool:
        return self.stop_reason is not None


def compare_sets(a: FrequencySet, b: FrequencySet) -> bool:
    """Exact, order-insensitive equality of the (canonical) frequency vectors."""
    if a.dim != b.dim:
        return False
    ka = {tuple(canonical(k)) for k in a.k}
    kb = {tuple(canonical(k)) for k in b.k}
    return ka == kb


def initial_features(dim: int, M0: int) -> FrequencySet:
    """``B_0``: scale factors ``2**j`` along every axis."""
    ks = []
    for j in range(M0):
        for ax in range(dim):
            v = np.zeros(dim)
            v[ax] = 2.0 ** j
            ks.append(v)
    return FrequencySet(np.array(ks))


def auto_dft_counts(problem, sets, floor=64) -> tuple:
    """Four nodes per period of the largest frequency in any of ``sets``, per axis."""
    lengths = np.array(problem.hi) - np.array(problem.lo)
    top = np.zeros(problem.dim)
    for s in sets:
        if s is not None and len(s):
            top = np.maximum(top, np.abs(s.k).max(axis=0) * lengths / (2 * np.pi))
    return tuple(max(floor, int(4 * math.ceil(t))) for t in top)


def phase_seed(seed: int, it: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(it)]).generate_state(1)[0])


def capture(net_fn, problem, counts, lam):
    """Sample, extend, transform and threshold; returns ``(spectrum, selected)``."""
    grid = sample_grid(net_fn, problem.lo, problem.hi, counts, channel=problem.spectrum_channel)
    for ax in problem.extend_axes:
        grid = even_extend(grid, ax)
    spectrum = fold_conjugates(dft(grid))
    return spectrum, select_frequencies(spectrum, lam, fold=False)


def _error_grid(problem, net):
    pts, err = problem.pointwise_error(net)
    if err is None:
        return None
    err = np.sqrt(np.sum(err ** 2, axis=1)) if err.shape[1] > 1 else err[:, 0]
    return GridField(problem.lo, problem.hi, problem.eval_counts,
                     err.reshape(problem.eval_counts))


def _build(problem, cfg: AdaptConfig, features, it, seed, previous):
    if it == 0:
        # the initial network has no spectral information, so h stays fixed at 1
        return initial_network(problem.dim, cfg.M0, cfg.hidden, problem.out_dim,
                               cfg.activation, "fixed", seed)
    net = rebuild(features, cfg.M0, list(cfg.hidden), out_dim=problem.out_dim,
                  activation=cfg.activation, h_mode=cfg.h_mode, seed=seed)
    if cfg.warm_start and previous is not None:
        _warm_start(net, previous)
    return net


def _warm_start(net: ScaleNetwork, old: ScaleNetwork):
    """Copy sub-network parameters whose embedding and shape match exactly."""
    for emb, sub in zip(net.embeddings, net.subnets):
        for oemb, osub in zip(old.embeddings, old.subnets):
            if (emb.variant == oemb.variant and np.array_equal(emb.freqs, oemb.freqs)
                    and sub.sizes == osub.sizes):
                for a, b in zip(sub.params(), osub.params()):
                    a.data[...] = b.data
                break


def run_adaptive(problem, cfg: AdaptConfig, resume_from: AdaptiveState | None = None,
                 checkpoint_dir=None, meta: dict | None = None) -> AdaptiveState:
    """Run the adaptive loop on ``problem`` until a stopping rule fires.

    ``resume_from`` continues an unfinished state at its next phase. With
    ``checkpoint_dir`` set, the state is written there after every phase.
    ``meta`` is stored alongside the driver settings in ``state.config``.
    """
    config = {**cfg.to_dict(), "meta": dict(meta or {})}
    if resume_from is not None:
        state = resume_from
        if state.finished:
            return state
        state.config = config
    else:
        state = AdaptiveState(next_features=initial_features(problem.dim, cfg.M0), config=config)
    while state.it + 1 <= cfg.I:
        it = state.it + 1
        features = state.next_features
        seed = phase_seed(cfg.seed, it)
        try:
            net = _build(problem, cfg, features, it, seed, state.network)
        except AdaptError as exc:
            state.stop_reason, state.diagnostic = "adapt_error", str(exc)
            break
        log.info("phase %d: %d sub-networks, %d features", it, len(net.subnets), len(features))
        try:
            result = train(net, problem, replace(cfg.train, seed=seed))
        except NumericalError as exc:
            state.phases += 1
            state.records.append(PhaseRecord(it, features, net, None, exc.history, seed=seed))
            state.stop_reason, state.diagnostic = "numerical_error", str(exc)
            break
        state.phases += 1
        rec = PhaseRecord(it, features, net, problem.relative_l2(net), result.history,
                          error_grid=_error_grid(problem, net), seed=seed)
        state.records.append(rec)
        counts = cfg.dft_counts or auto_dft_counts(problem, [features])
        try:
            rec.spectrum, rec.captured = capture(problem.solution(net), problem, counts, cfg.lam)
        except (AdaptError, NumericalError) as exc:
            state.stop_reason, state.diagnostic = "adapt_error", str(exc)
            break
        log.info("phase %d: error %s, captured %d frequencies", it, rec.error, len(rec.captured))
        state.next_features = rec.captured
        if compare_sets(features, rec.captured):
            state.stop_reason = "stable"
        if checkpoint_dir is not None:
            checkpoint(state, Path(checkpoint_dir) / f"state_{it}.json")
        if state.finished:
            break
    if not state.finished:
        state.stop_reason = "max_iterations"
    if checkpoint_dir is not None:
        checkpoint(state, Path(checkpoint_dir) / "state_final.json")
    return state


def truncate(state: AdaptiveState, it: int) -> AdaptiveState:
    """Copy of ``state`` as it stood right after phase ``it`` (unfinished)."""
    if not 0 <= it <= state.it:
        raise ValueError(f"no phase {it} in this state")
    recs = list(state.records[:it + 1])
    return replace(state, records=recs, next_features=recs[-1].captured, phases=it + 1,
                   stop_reason=None, diagnostic="", config=dict(state.config))


# ---------------------------------------------------------------------------
# checkpoints

def _fs_to(fs):
    if fs is None:
        return None
    return {"k": fs.k.tolist(), "re": fs.coeff.real.tolist(), "im": fs.coeff.imag.tolist()}


def _fs_from(d):
    if d is None:
        return None
    k = np.array(d["k"], dtype=np.float64).reshape(len(d["re"]), -1)
    return FrequencySet(k, np.array(d["re"]) + 1j * np.array(d["im"]))


def _grid_to(g):
    if g is None:
        return None
    return {"lo": list(g.lo), "hi": list(g.hi), "counts": list(g.counts),
            "values": g.values.ravel().tolist()}


def _grid_from(d):
    if d is None:
        return None
    return GridField(d["lo"], d["hi"], d["counts"], np.array(d["values"]).reshape(d["counts"]))


def state_to_dict(state: AdaptiveState) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "config": state.config,
        "phases": state.phases,
        "stop_reason": state.stop_reason,
        "diagnostic": state.diagnostic,
        "next_features": _fs_to(state.next_features),
        "records": [{
            "it": r.it, "seed": r.seed, "error": r.error,
            "features": _fs_to(r.features), "network": r.network.to_dict(),
            "history": r.history.rows,
            "spectrum": _fs_to(r.spectrum), "captured": _fs_to(r.captured),
            "error_grid": _grid_to(r.error_grid),
        } for r in state.records],
    }


def state_from_dict(d: dict) -> AdaptiveState:
    if d.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint format {d.get('format_version')!r}")
    recs = []
    for r in d["records"]:
        recs.append(PhaseRecord(r["it"], _fs_from(r["features"]),
                                ScaleNetwork.from_dict(r["network"]), r["error"],
                                History(r["history"]), _fs_from(r["spectrum"]),
                                _fs_from(r["captured"]), _grid_from(r["error_grid"]), r["seed"]))
    return AdaptiveState(recs, _fs_from(d["next_features"]), d["phases"], d["stop_reason"],
                         d["diagnostic"], d["config"])


def checkpoint(state: AdaptiveState, path) -> Path:
    """Write ``state`` as JSON (floats are stored by shortest round-trip repr)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(state_to_dict(state)))
    tmp.replace(path)
    return path


def restore(path) -> AdaptiveState:
    try:
        d = json.loads(Path(path).read_text())
        return state_from_dict(d)
    except FormatError:
        raise
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise FormatError(f"{path}: unreadable checkpoint ({exc})") from None
