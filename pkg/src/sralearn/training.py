"""Mini-batch Adam training with dropout, decoupled weight decay, and
early stopping on a held-out validation metric.

Determinism contract: every random choice (shuffling, dropout masks)
flows from named substreams of the config seed, so a rerun with the same
config and data reproduces the log bit for bit, and folds trained in
parallel never share generator state.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape
from .data import train_val_split
from .exceptions import ConfigError, TrainingError
from .metrics import auc_pr, auc_roc
from .models import Model
from .rng import substream

Array = np.ndarray

# metric name -> (scorer on (y, predicted output), higher_is_better)
VAL_METRICS = {
    "aucroc": (lambda y, out: auc_roc(out, y), True),
    "aucpr": (lambda y, out: auc_pr(out, y), True),
    "mse": (lambda y, out: float(np.mean((np.asarray(y) - out) ** 2)), False),
}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    dropout: float = 0.1
    patience: int = 20
    val_fraction: float = 0.1
    metric: str = "aucroc"
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "weight_decay", "dropout", "eps"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.dropout >= 1.0:
            raise ConfigError(f"dropout must be < 1, got {self.dropout}")
        if not 0.0 < self.val_fraction <= 0.5:
            raise ConfigError(
                f"val_fraction must be in (0, 0.5], got {self.val_fraction}")
        if self.batch_size < 1 or self.max_epochs < 0 or self.patience < 0:
            raise ConfigError("batch_size >= 1, max_epochs >= 0, patience >= 0 required")
        if self.metric not in VAL_METRICS:
            raise ConfigError(
                f"metric must be one of {tuple(VAL_METRICS)}, got {self.metric!r}")


def default_metric(task: str) -> str:
    return "aucroc" if task == "binary" else "mse"


@dataclass
class AdamState:
    m: dict[str, Array]
    v: dict[str, Array]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, Array]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict[str, Array], grads: dict[str, Array], state: AdamState,
              config: TrainConfig, decay_keys: tuple[str, ...] = ()) -> None:
    """One in-place Adam update with decoupled weight decay.

    Decay multiplies the listed parameter groups by (1 - lr*wd) in
    addition to the gradient step; all other groups are never decayed.
    """
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bias1 = 1.0 - b1**state.t
    bias2 = 1.0 - b2**state.t
    for name, p in params.items():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / bias1
        v_hat = state.v[name] / bias2
        p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        if config.weight_decay > 0.0 and name in decay_keys:
            p -= config.learning_rate * config.weight_decay * p


def dropout_mask(shape: tuple[int, ...], rate: float, rng: np.random.Generator) -> Array:
    """Inverted-scaling mask: zeros with probability `rate`, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_metric: float
    is_best: bool


@dataclass
class TrainLog:
    metric: str
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("epoch,train_loss,val_metric,is_best\n")
        for r in self.records:
            out.write(f"{r.epoch},{r.train_loss!r},{r.val_metric!r},{int(r.is_best)}\n")
        return out.getvalue()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())


def _batch_loss_and_grads(model: Model, X: Array, y: Array,
                          masks: dict[str, Array] | None) -> tuple[float, dict]:
    tape = Tape()
    x = tape.input("x", X)
    refs = model.record(tape, x, training=masks is not None, masks=masks)
    loss = model.loss_ref(tape, refs, tape.input("y", y))
    value = tape.value(loss).item()
    grads = {k: g.data for k, g in tape.backward(loss).items()}
    return value, grads


def evaluate_metric(model: Model, X: Array, y: Array, metric: str) -> float:
    scorer, _ = VAL_METRICS[metric]
    return float(scorer(y, model.predict_output(X)))


def train(model: Model, X: Array, y: Array, config: TrainConfig,
          X_val: Array | None = None, y_val: Array | None = None) -> TrainLog:
    """Fit `model` in place; returns the per-epoch log.

    When no validation split is passed, one is carved from (X, y) using
    config.val_fraction (stratified for binary tasks).  The parameters
    left on the model are the best-validation snapshot, not the last
    epoch's.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ConfigError(f"bad training shapes {X.shape} / {y.shape}")
    if len(X) == 0:
        raise TrainingError("empty training split")
    if (X_val is None) != (y_val is None):
        raise ConfigError("pass both X_val and y_val or neither")
    if X_val is None:
        tr_idx, val_idx = train_val_split(
            y, config.val_fraction, config.seed, stratify=model.task == "binary")
        X, X_val = X[tr_idx], X[val_idx]
        y, y_val = y[tr_idx], y[val_idx]
    else:
        X_val = np.asarray(X_val, dtype=np.float64)
        y_val = np.asarray(y_val, dtype=np.float64)
        if len(X_val) == 0:
            raise TrainingError("empty validation split")

    scorer, higher_better = VAL_METRICS[config.metric]
    if model.task == "regression" and config.metric != "mse":
        raise ConfigError(f"metric {config.metric!r} needs a binary task")

    log = TrainLog(metric=config.metric)
    best_params = model.clone_params()
    best_score: float | None = None
    rng_shuffle = substream(config.seed, "train/shuffle")
    rng_dropout = substream(config.seed, "train/dropout")
    state = AdamState.for_params(model.params)
    n = len(X)
    use_dropout = config.dropout > 0.0 and bool(model.mask_shapes(1))
    since_best = 0

    for epoch in range(config.max_epochs):
        order = rng_shuffle.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            take = order[start : start + config.batch_size]
            masks = None
            if use_dropout:
                masks = {
                    key: dropout_mask(shape, config.dropout, rng_dropout)
                    for key, shape in model.mask_shapes(len(take)).items()
                }
            value, grads = _batch_loss_and_grads(model, X[take], y[take], masks)
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // config.batch_size}")
            epoch_loss += value * len(take)
            adam_step(model.params, grads, state, config, model.decay_keys)

        val_score = float(scorer(y_val, model.predict_output(X_val)))
        improved = best_score is None or (
            val_score > best_score if higher_better else val_score < best_score)
        if improved:
            best_score = val_score
            best_params = model.clone_params()
            log.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
        log.records.append(EpochRecord(epoch, epoch_loss / n, val_score, improved))
        if since_best > config.patience:
            break

    model.load_params(best_params)
    return log
