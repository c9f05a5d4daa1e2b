"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A :class:`Tape` records a computation as an ordered list of primitive
applications.  Recording is eager (every builder call evaluates its result
immediately, so shape errors surface at the call site), but the recorded
program can be re-executed after rebinding leaf values, which is what the
finite-difference checker relies on.  ``backward`` walks the node list once
in reverse and accumulates exact adjoints for every trainable leaf.

Tensors are rank 0 to 3.  All arithmetic is float64; replaying a tape with
identical leaf values is bit-identical because every primitive maps to a
fixed numpy kernel with a fixed reduction order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ShapeError

Array = np.ndarray

MAX_RANK = 3

# sigmoid outputs are clamped into the open interval (0, 1) so downstream
# logs and the boundedness guarantees survive extreme saturation
_SIG_LO = np.finfo(np.float64).tiny
_SIG_HI = float(np.nextafter(1.0, 0.0))


def as_f64(value) -> Array:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim > MAX_RANK:
        raise ShapeError("tensor", arr.shape)
    return arr


def sigmoid(values) -> Array:
    """Numerically stable logistic function, strictly inside (0, 1)."""
    x = np.asarray(values, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return np.clip(out, _SIG_LO, _SIG_HI)


def bce_with_logits(logits, targets) -> float:
    """Mean binary cross entropy on logits, in the stable rearrangement
    ``max(t, 0) - t * y + log(1 + exp(-|t|))``."""
    t = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    loss = np.maximum(t, 0.0) - t * y + np.log1p(np.exp(-np.abs(t)))
    return float(loss.mean())


class Tensor:
    """Immutable dense array of float64 values, rank at most 3."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C")
        if arr.ndim > MAX_RANK:
            raise ShapeError("tensor", arr.shape)
        arr.flags.writeable = False
        self._data = arr

    @property
    def data(self) -> Array:
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def size(self) -> int:
        return int(self._data.size)

    def item(self) -> float:
        return float(self._data)

    def tolist(self):
        return self._data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


@dataclass
class _Node:
    op: str
    args: tuple[int, ...]
    value: Array
    name: str | None = None
    trainable: bool = False
    target_shape: tuple[int, ...] | None = None  # reshape only
    factor: float = 0.0  # scalar_mul only


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a gradient back down to the shape it was broadcast from."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tape:
    """Recorded differentiable computation.

    Leaves are created with :meth:`param` (trainable, named),
    :meth:`input` (named, rebindable) or :meth:`constant`.  Builder
    methods append one primitive each and return an integer node
    reference.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._leaves: dict[str, int] = {}

    # -- leaves ---------------------------------------------------------

    def param(self, name: str, value) -> int:
        return self._leaf(name, value, trainable=True)

    def input(self, name: str, value) -> int:
        return self._leaf(name, value, trainable=False)

    def constant(self, value) -> int:
        return self._append(_Node("leaf", (), as_f64(value).copy()))

    def _leaf(self, name: str, value, trainable: bool) -> int:
        if name in self._leaves:
            raise ValueError(f"leaf {name!r} already bound on this tape")
        ref = self._append(_Node("leaf", (), as_f64(value).copy(), name=name, trainable=trainable))
        self._leaves[name] = ref
        return ref

    def bind(self, name: str, value) -> None:
        """Replace the value of a named leaf; shape must be unchanged."""
        try:
            ref = self._leaves[name]
        except KeyError:
            raise KeyError(f"no leaf named {name!r}") from None
        node = self._nodes[ref]
        arr = as_f64(value).copy()
        if arr.shape != node.value.shape:
            raise ShapeError("bind", node.value.shape, arr.shape)
        node.value = arr

    @property
    def param_names(self) -> list[str]:
        return [n for n, ref in self._leaves.items() if self._nodes[ref].trainable]

    def leaf_value(self, name: str) -> Array:
        return self._nodes[self._leaves[name]].value.copy()

    # -- primitives -----------------------------------------------------

    def matmul(self, a: int, b: int) -> int:
        va, vb = self._val(a), self._val(b)
        if va.ndim != 2 or vb.ndim != 2 or va.shape[1] != vb.shape[0]:
            raise ShapeError("matmul", va.shape, vb.shape)
        return self._append(_Node("matmul", (a, b), va @ vb))

    def add(self, a: int, b: int) -> int:
        return self._broadcasting("add", a, b)

    def sub(self, a: int, b: int) -> int:
        return self._broadcasting("sub", a, b)

    def mul(self, a: int, b: int) -> int:
        return self._broadcasting("mul", a, b)

    def scalar_mul(self, a: int, factor: float) -> int:
        node = _Node("scalar_mul", (a,), self._val(a) * float(factor), factor=float(factor))
        return self._append(node)

    def sigmoid(self, a: int) -> int:
        return self._append(_Node("sigmoid", (a,), sigmoid(self._val(a))))

    def relu(self, a: int) -> int:
        return self._append(_Node("relu", (a,), np.maximum(self._val(a), 0.0)))

    def sum_last(self, a: int) -> int:
        va = self._val(a)
        if va.ndim < 1:
            raise ShapeError("sum_last", va.shape)
        return self._append(_Node("sum_last", (a,), va.sum(axis=-1)))

    def reshape(self, a: int, shape: tuple[int, ...]) -> int:
        va = self._val(a)
        shape = tuple(int(s) for s in shape)
        if len(shape) > MAX_RANK or int(np.prod(shape, dtype=np.int64)) != va.size:
            raise ShapeError("reshape", va.shape, shape)
        return self._append(_Node("reshape", (a,), va.reshape(shape), target_shape=shape))

    def mean(self, a: int) -> int:
        return self._append(_Node("mean", (a,), np.asarray(self._val(a).mean())))

    def bce_with_logits(self, logits: int, targets: int) -> int:
        vl, vt = self._val(logits), self._val(targets)
        if vl.shape != vt.shape:
            raise ShapeError("bce_with_logits", vl.shape, vt.shape)
        loss = np.maximum(vl, 0.0) - vl * vt + np.log1p(np.exp(-np.abs(vl)))
        return self._append(_Node("bce_with_logits", (logits, targets), np.asarray(loss.mean())))

    def mse(self, pred: int, target: int) -> int:
        vp, vt = self._val(pred), self._val(target)
        if vp.shape != vt.shape:
            raise ShapeError("mse", vp.shape, vt.shape)
        diff = vp - vt
        return self._append(_Node("mse", (pred, target), np.asarray((diff * diff).mean())))

    def _broadcasting(self, op: str, a: int, b: int) -> int:
        va, vb = self._val(a), self._val(b)
        try:
            out_shape = np.broadcast_shapes(va.shape, vb.shape)
        except ValueError:
            raise ShapeError(op, va.shape, vb.shape) from None
        if len(out_shape) > MAX_RANK:
            raise ShapeError(op, va.shape, vb.shape)
        if op == "add":
            value = va + vb
        elif op == "sub":
            value = va - vb
        else:
            value = va * vb
        return self._append(_Node(op, (a, b), value))

    def _append(self, node: _Node) -> int:
        self._nodes.append(node)
        return len(self._nodes) - 1

    def _val(self, ref: int) -> Array:
        return self._nodes[ref].value

    # -- execution ------------------------------------------------------

    def forward(self, root: int) -> Tensor:
        """Re-evaluate every node up to ``root`` from current leaf values."""
        self._check_ref(root)
        for node in self._nodes[: root + 1]:
            if node.op != "leaf":
                node.value = self._evaluate(node)
        return Tensor(self._nodes[root].value)

    def value(self, ref: int) -> Tensor:
        self._check_ref(ref)
        return Tensor(self._nodes[ref].value)

    def backward(self, root: int, corrupt: str | None = None) -> dict[str, Tensor]:
        """Gradient of the scalar at ``root`` w.r.t. every trainable leaf.

        Leaves that do not feed into ``root`` get a zero gradient.
        ``corrupt`` names a trainable leaf whose adjoint is deliberately
        doubled; it exists solely as the negative control for gradient
        checking and must never be set in real training.
        """
        self._check_ref(root)
        if self._nodes[root].value.size != 1:
            raise ValueError(
                f"backward root must be scalar, got shape {self._nodes[root].value.shape}"
            )
        adjoint: list[Array | None] = [None] * (root + 1)
        adjoint[root] = np.ones_like(self._nodes[root].value)
        for i in range(root, -1, -1):
            g = adjoint[i]
            node = self._nodes[i]
            if g is None or node.op == "leaf":
                continue
            for arg, contrib in self._adjoints(node, g):
                if adjoint[arg] is None:
                    adjoint[arg] = contrib.copy() if contrib.base is not None else contrib
                else:
                    adjoint[arg] = adjoint[arg] + contrib
        grads: dict[str, Tensor] = {}
        for name, ref in self._leaves.items():
            node = self._nodes[ref]
            if not node.trainable:
                continue
            g = adjoint[ref] if ref <= root else None
            if g is None:
                g = np.zeros_like(node.value)
            if name == corrupt:
                g = g * 2.0
            grads[name] = Tensor(g)
        return grads

    def _evaluate(self, node: _Node) -> Array:
        vals = [self._nodes[a].value for a in node.args]
        op = node.op
        if op == "matmul":
            return vals[0] @ vals[1]
        if op == "add":
            return vals[0] + vals[1]
        if op == "sub":
            return vals[0] - vals[1]
        if op == "mul":
            return vals[0] * vals[1]
        if op == "scalar_mul":
            return vals[0] * node.factor
        if op == "sigmoid":
            return sigmoid(vals[0])
        if op == "relu":
            return np.maximum(vals[0], 0.0)
        if op == "sum_last":
            return vals[0].sum(axis=-1)
        if op == "reshape":
            return vals[0].reshape(node.target_shape)
        if op == "mean":
            return np.asarray(vals[0].mean())
        if op == "bce_with_logits":
            t, y = vals
            return np.asarray((np.maximum(t, 0.0) - t * y + np.log1p(np.exp(-np.abs(t)))).mean())
        if op == "mse":
            d = vals[0] - vals[1]
            return np.asarray((d * d).mean())
        raise AssertionError(f"unknown primitive {op!r}")

    def _adjoints(self, node: _Node, g: Array):
        """Yield (operand ref, adjoint contribution) pairs for one node."""
        vals = [self._nodes[a].value for a in node.args]
        op = node.op
        if op == "matmul":
            yield node.args[0], g @ vals[1].T
            yield node.args[1], vals[0].T @ g
        elif op == "add":
            yield node.args[0], _unbroadcast(g, vals[0].shape)
            yield node.args[1], _unbroadcast(g, vals[1].shape)
        elif op == "sub":
            yield node.args[0], _unbroadcast(g, vals[0].shape)
            yield node.args[1], _unbroadcast(-g, vals[1].shape)
        elif op == "mul":
            yield node.args[0], _unbroadcast(g * vals[1], vals[0].shape)
            yield node.args[1], _unbroadcast(g * vals[0], vals[1].shape)
        elif op == "scalar_mul":
            yield node.args[0], g * node.factor
        elif op == "sigmoid":
            s = node.value
            yield node.args[0], g * s * (1.0 - s)
        elif op == "relu":
            yield node.args[0], g * (vals[0] > 0.0)
        elif op == "sum_last":
            expanded = np.broadcast_to(g[..., None], vals[0].shape)
            yield node.args[0], expanded
        elif op == "reshape":
            yield node.args[0], g.reshape(vals[0].shape)
        elif op == "mean":
            n = vals[0].size
            yield node.args[0], np.broadcast_to(g / n, vals[0].shape)
        elif op == "bce_with_logits":
            t, y = vals
            n = t.size
            yield node.args[0], g * (sigmoid(t) - y) / n
            yield node.args[1], g * (-t) / n
        elif op == "mse":
            d = vals[0] - vals[1]
            n = d.size
            yield node.args[0], g * 2.0 * d / n
            yield node.args[1], g * (-2.0) * d / n
        else:
            raise AssertionError(f"unknown primitive {op!r}")

    def _check_ref(self, ref: int) -> None:
        if not 0 <= ref < len(self._nodes):
            raise IndexError(f"node reference {ref} out of range")

    def __len__(self) -> int:
        return len(self._nodes)


@dataclass
class GradCheckReport:
    """Outcome of comparing backward gradients with central differences."""

    step: float
    tolerance: float
    max_rel_error: float = 0.0
    mean_rel_error: float = 0.0
    param_errors: dict[str, float] = field(default_factory=dict)
    checked: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def _rel_error(a: float, b: float) -> float:
    # unit floor: entries with tiny gradients are compared absolutely,
    # which keeps finite-difference roundoff from dominating the ratio
    denom = max(1.0, abs(a), abs(b))
    return abs(a - b) / denom


def finite_diff_check(
    tape: Tape,
    root: int,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    corrupt: str | None = None,
) -> GradCheckReport:
    """Compare ``tape.backward`` against central finite differences.

    Every trainable scalar entry is perturbed by ``+-step``; the relative
    error uses a unit floor (see ``_rel_error``), and the both-zero case is
    0 by convention.  Raises if a perturbed evaluation goes non-finite.
    ``corrupt`` passes through to ``backward`` as the negative control.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    grads = tape.backward(root, corrupt=corrupt)
    report = GradCheckReport(step=step, tolerance=tolerance)
    total = 0.0
    for name in tape.param_names:
        base = tape.leaf_value(name)
        analytic = grads[name].data
        worst = 0.0
        flat = base.ravel()
        for idx in range(flat.size):
            original = flat[idx]
            fd = _numeric_partial(tape, root, name, base, idx, original, step)
            err = _rel_error(fd, float(analytic.ravel()[idx]))
            worst = max(worst, err)
            total += err
            report.checked += 1
        tape.bind(name, base)
        report.param_errors[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
    if report.checked:
        report.mean_rel_error = total / report.checked
    tape.forward(root)  # restore cached values at the unperturbed point
    return report


def _numeric_partial(tape, root, name, base, idx, original, step) -> float:
    probe = base.copy()
    flat = probe.ravel()
    flat[idx] = original + step
    tape.bind(name, probe)
    hi = tape.forward(root).item()
    flat[idx] = original - step
    tape.bind(name, probe)
    lo = tape.forward(root).item()
    if not (np.isfinite(hi) and np.isfinite(lo)):
        raise ValueError(f"non-finite loss while perturbing parameter {name!r}")
    return (hi - lo) / (2.0 * step)
