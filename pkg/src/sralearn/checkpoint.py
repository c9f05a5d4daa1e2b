"""Versioned textual checkpoint format.

Layout::

    sralearn-checkpoint v1 kind=sralinear p=5 d_k=8 task=binary
    tensor key.w1 2 5 10
    <p*d1 decimal values, space separated, row major>
    ...

Values are written with ``repr`` so every float64 round-trips exactly;
write -> read -> write is byte-identical.  d_k is 0 for kinds without an
attention block.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .exceptions import DataError
from .models import Model, init_model

MAGIC = "sralearn-checkpoint"
VERSION = "v1"


def dumps(model: Model) -> str:
    out = io.StringIO()
    out.write(f"{MAGIC} {VERSION} kind={model.kind} p={model.p} "
              f"d_k={model.d_k} task={model.task}\n")
    for name, value in model.params.items():
        dims = " ".join(str(d) for d in value.shape)
        header = f"tensor {name} {value.ndim}"
        out.write(header + (f" {dims}\n" if dims else "\n"))
        out.write(" ".join(repr(float(v)) for v in value.ravel()) + "\n")
    return out.getvalue()


def save(model: Model, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model))


def loads(text: str) -> Model:
    lines = text.splitlines()
    if not lines:
        raise DataError("empty checkpoint")
    head = lines[0].split()
    if len(head) != 6 or head[0] != MAGIC:
        raise DataError(f"not a checkpoint header: {lines[0]!r}")
    if head[1] != VERSION:
        raise DataError(f"unsupported checkpoint version {head[1]!r}")
    fields = {}
    for token in head[2:]:
        key, _, val = token.partition("=")
        fields[key] = val
    try:
        kind = fields["kind"]
        p = int(fields["p"])
        d_k = int(fields["d_k"])
        task = fields["task"]
    except (KeyError, ValueError) as exc:
        raise DataError(f"malformed checkpoint header: {lines[0]!r}") from exc

    params: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        parts = lines[i].split()
        if parts[0] != "tensor" or len(parts) < 3:
            raise DataError(f"malformed tensor header at line {i + 1}: {lines[i]!r}")
        name = parts[1]
        ndim = int(parts[2])
        shape = tuple(int(d) for d in parts[3:])
        if len(shape) != ndim:
            raise DataError(f"tensor {name!r}: rank {ndim} but {len(shape)} dims given")
        if i + 1 >= len(lines):
            raise DataError(f"tensor {name!r}: missing value line")
        values = np.array([float(tok) for tok in lines[i + 1].split()], dtype=np.float64)
        expected = int(np.prod(shape, dtype=np.int64)) if shape else 1
        if values.size != expected:
            raise DataError(f"tensor {name!r}: expected {expected} values, got {values.size}")
        params[name] = values.reshape(shape)
        i += 2

    model = init_model(kind, p, d_k=d_k if kind == "sralinear" else 8, seed=0, task=task)
    missing = set(model.params) - set(params)
    extra = set(params) - set(model.params)
    if missing or extra:
        raise DataError(f"checkpoint parameter mismatch: missing={sorted(missing)} "
                        f"unexpected={sorted(extra)}")
    model.load_params(params)
    return model


def load(path: str | os.PathLike) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())
