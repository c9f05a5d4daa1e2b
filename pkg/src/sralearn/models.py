"""Model definitions: the attention-reinforced linear model and its
logistic/linear-regression and MLP baselines.

Every model is a bag of named float64 parameter arrays plus a ``record``
method that writes its forward pass (and loss) onto a :class:`~sralearn.autodiff.Tape`.
The attention model computes, per instance and feature,

    a_i = (q_i . k_i) / d_k          in [0, 1]
    o_i = a_i * x_i
    logit = intercept + sum_i beta_i * a_i * x_i

where the keys and queries come from two separate feed-forward encoders
(p -> d1 -> d2 -> p*d_k, rectifier hidden activations, sigmoid output) so
every key/query entry lies in (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, sigmoid
from .exceptions import ConfigError, ShapeError, UnsupportedModelError
from .rng import substream

Array = np.ndarray

TASKS = ("binary", "regression")
KINDS = ("sralinear", "lr", "mlp")

DEFAULT_DK = 8


@dataclass(frozen=True)
class EncoderConfig:
    """Dimensions of one key/query encoder.

    d_k must be a multiple of 4 so the hidden widths d1 = p*d_k/4 and
    d2 = p*d_k/2 are exact integers.
    """

    p: int
    d_k: int = DEFAULT_DK
    dropout: float = 0.0

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError(f"feature count must be >= 1, got {self.p}")
        if self.d_k < 4 or self.d_k % 4 != 0:
            raise ConfigError(f"d_k must be >= 4 and divisible by 4, got {self.d_k}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def d1(self) -> int:
        return self.p * self.d_k // 4

    @property
    def d2(self) -> int:
        return self.p * self.d_k // 2

    @property
    def out_dim(self) -> int:
        return self.p * self.d_k


@dataclass
class ForwardRefs:
    """Tape node references produced by one recorded forward pass."""

    logit: int
    attention: int | None = None
    reinforced: int | None = None
    loss: int | None = None


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> Array:
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Model:
    """Common surface shared by all three model kinds."""

    kind: str = ""

    def __init__(self, p: int, task: str):
        if task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
        self.p = int(p)
        self.task = task
        self.params: dict[str, Array] = {}

    # parameter groups subject to decoupled weight decay
    decay_keys: tuple[str, ...] = ()

    @property
    def d_k(self) -> int:
        return 0

    def record(self, tape: Tape, x: int, training: bool = False,
               masks: dict[str, Array] | None = None) -> ForwardRefs:
        raise NotImplementedError

    def mask_shapes(self, batch: int) -> dict[str, tuple[int, ...]]:
        """Shapes of the dropout masks ``record`` accepts in training mode."""
        return {}

    # -- convenience (fresh tape per call, eval mode) ---------------------

    def _eval_refs(self, X: Array) -> tuple[Tape, ForwardRefs]:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise ShapeError("forward", X.shape, (-1, self.p))
        if not np.all(np.isfinite(X)):
            raise ValueError("forward input contains non-finite values")
        tape = Tape()
        x = tape.input("x", X)
        refs = self.record(tape, x, training=False)
        return tape, refs

    def decision_function(self, X: Array) -> Array:
        tape, refs = self._eval_refs(X)
        return tape.value(refs.logit).data.copy()

    def predict_output(self, X: Array) -> Array:
        """Probability for binary task, raw prediction for regression."""
        logit = self.decision_function(X)
        return sigmoid(logit) if self.task == "binary" else logit

    def attention(self, X: Array) -> Array:
        tape, refs = self._eval_refs(X)
        if refs.attention is None:
            raise UnsupportedModelError(f"{self.kind} has no attention weights")
        return tape.value(refs.attention).data.copy()

    def loss_ref(self, tape: Tape, refs: ForwardRefs, y: int) -> int:
        if self.task == "binary":
            return tape.bce_with_logits(refs.logit, y)
        return tape.mse(refs.logit, y)

    def clone_params(self) -> dict[str, Array]:
        return {k: v.copy() for k, v in self.params.items()}

    def load_params(self, params: dict[str, Array]) -> None:
        for name, value in params.items():
            if name not in self.params:
                raise KeyError(f"unknown parameter {name!r}")
            if value.shape != self.params[name].shape:
                raise ShapeError("load_params", self.params[name].shape, value.shape)
            self.params[name] = np.asarray(value, dtype=np.float64).copy()


class SraLinearModel(Model):
    """Attention block + linear aggregator."""

    kind = "sralinear"

    ENCODERS = ("key", "query")

    def __init__(self, p: int, d_k: int = DEFAULT_DK, task: str = "binary", seed: int = 0):
        super().__init__(p, task)
        self.config = EncoderConfig(p=p, d_k=d_k)
        for enc in self.ENCODERS:
            dims = (p, self.config.d1, self.config.d2, self.config.out_dim)
            for layer in range(3):
                fan_in, fan_out = dims[layer], dims[layer + 1]
                rng = substream(seed, f"init/{enc}.w{layer + 1}")
                self.params[f"{enc}.w{layer + 1}"] = _glorot(rng, fan_in, fan_out)
                self.params[f"{enc}.b{layer + 1}"] = np.zeros(fan_out)
        self.params["beta"] = np.zeros(p)
        self.params["intercept"] = np.zeros(())

    decay_keys = ("key.w1", "key.w2", "key.w3", "query.w1", "query.w2", "query.w3")

    @property
    def d_k(self) -> int:
        return self.config.d_k

    def mask_shapes(self, batch: int) -> dict[str, tuple[int, ...]]:
        return {
            f"{enc}.h{i}": (batch, dim)
            for enc in self.ENCODERS
            for i, dim in ((1, self.config.d1), (2, self.config.d2))
        }

    def _encoder(self, tape: Tape, x: int, enc: str,
                 masks: dict[str, Array] | None) -> int:
        """One three-layer encoder; returns (b, p, d_k) of sigmoid outputs."""
        h = x
        for layer in (1, 2):
            w = tape.param(f"{enc}.w{layer}", self.params[f"{enc}.w{layer}"])
            b = tape.param(f"{enc}.b{layer}", self.params[f"{enc}.b{layer}"])
            h = tape.relu(tape.add(tape.matmul(h, w), b))
            if masks is not None:
                h = tape.mul(h, tape.constant(masks[f"{enc}.h{layer}"]))
        w3 = tape.param(f"{enc}.w3", self.params[f"{enc}.w3"])
        b3 = tape.param(f"{enc}.b3", self.params[f"{enc}.b3"])
        flat = tape.sigmoid(tape.add(tape.matmul(h, w3), b3))
        batch = tape.value(x).shape[0]
        return tape.reshape(flat, (batch, self.p, self.config.d_k))

    def record(self, tape: Tape, x: int, training: bool = False,
               masks: dict[str, Array] | None = None) -> ForwardRefs:
        if not training:
            masks = None
        keys = self._encoder(tape, x, "key", masks)
        queries = self._encoder(tape, x, "query", masks)
        # a_i = (q_i . k_i) / d_k, one weight per feature, bounded by
        # construction: products of (0,1) entries averaged over d_k
        attention = tape.scalar_mul(
            tape.sum_last(tape.mul(keys, queries)), 1.0 / self.config.d_k
        )
        reinforced = tape.mul(attention, x)
        beta = tape.param("beta", self.params["beta"])
        intercept = tape.param("intercept", self.params["intercept"])
        batch = tape.value(x).shape[0]
        weighted = tape.matmul(reinforced, tape.reshape(beta, (self.p, 1)))
        logit = tape.reshape(tape.add(weighted, intercept), (batch,))
        return ForwardRefs(logit=logit, attention=attention, reinforced=reinforced)

    def forward_detail(self, X: Array) -> tuple[Array, Array, Array]:
        """Eval-mode (attention, reinforced, logit) as plain arrays."""
        tape, refs = self._eval_refs(X)
        return (
            tape.value(refs.attention).data.copy(),
            tape.value(refs.reinforced).data.copy(),
            tape.value(refs.logit).data.copy(),
        )


class LinearModel(Model):
    """Plain affine logit: logistic regression or linear regression."""

    kind = "lr"

    def __init__(self, p: int, task: str = "binary", seed: int = 0):
        super().__init__(p, task)
        self.params["beta"] = np.zeros(p)
        self.params["intercept"] = np.zeros(())

    def record(self, tape: Tape, x: int, training: bool = False,
               masks: dict[str, Array] | None = None) -> ForwardRefs:
        beta = tape.param("beta", self.params["beta"])
        intercept = tape.param("intercept", self.params["intercept"])
        batch = tape.value(x).shape[0]
        affine = tape.add(tape.matmul(x, tape.reshape(beta, (self.p, 1))), intercept)
        return ForwardRefs(logit=tape.reshape(affine, (batch,)))


class MlpModel(Model):
    """Two hidden rectifier layers of widths 4p and 2p, then one logit."""

    kind = "mlp"

    def __init__(self, p: int, task: str = "binary", seed: int = 0):
        super().__init__(p, task)
        dims = (p, 4 * p, 2 * p, 1)
        for layer in range(3):
            rng = substream(seed, f"init/mlp.w{layer + 1}")
            self.params[f"w{layer + 1}"] = _glorot(rng, dims[layer], dims[layer + 1])
            self.params[f"b{layer + 1}"] = np.zeros(dims[layer + 1])

    decay_keys = ("w1", "w2", "w3")

    def record(self, tape: Tape, x: int, training: bool = False,
               masks: dict[str, Array] | None = None) -> ForwardRefs:
        h = x
        for layer in (1, 2):
            w = tape.param(f"w{layer}", self.params[f"w{layer}"])
            b = tape.param(f"b{layer}", self.params[f"b{layer}"])
            h = tape.relu(tape.add(tape.matmul(h, w), b))
        w3 = tape.param("w3", self.params["w3"])
        b3 = tape.param("b3", self.params["b3"])
        batch = tape.value(x).shape[0]
        logit = tape.reshape(tape.add(tape.matmul(h, w3), b3), (batch,))
        return ForwardRefs(logit=logit)


def init_model(kind: str, p: int, d_k: int = DEFAULT_DK, seed: int = 0,
               task: str = "binary") -> Model:
    """Deterministic factory; same (kind, p, d_k, seed) gives identical bits."""
    if kind == "sralinear":
        return SraLinearModel(p, d_k=d_k, task=task, seed=seed)
    if kind == "lr":
        return LinearModel(p, task=task, seed=seed)
    if kind == "mlp":
        return MlpModel(p, task=task, seed=seed)
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {KINDS}")
