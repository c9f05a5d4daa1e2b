"""Intrinsic explanations: per-instance additive feature contributions.

For the attention model the logit decomposes exactly as
``intercept + sum_i beta_i * a_i * x_i``, so each feature's contribution
``beta_i * a_i * x_i`` is also the exact counterfactual logit change of
zeroing that feature's attention.  Linear models explain the same way
with attention fixed at 1.  Contributions measure prediction importance
on one instance, not global feature relevance: a suppressed feature
(a_i = 0) has zero contribution yet may still drive the attention of
others, so suppressed features are flagged rather than dropped.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .autodiff import sigmoid
from .exceptions import UnsupportedModelError
from .metrics import topk_features
from .models import LinearModel, Model, SraLinearModel

Array = np.ndarray


@dataclass
class Explanation:
    index: int
    x: Array
    attention: Array
    reinforced: Array
    contributions: Array
    intercept: float
    logit: float
    output: float
    ranked: list[int]
    suppressed: list[int]

    def check_decomposition(self, tol: float = 1e-9) -> bool:
        return abs(self.intercept + self.contributions.sum() - self.logit) <= tol


def from_components(beta: Array, intercept: float, attention: Array, x: Array,
                    task: str = "binary", index: int = 0) -> Explanation:
    """Assemble one explanation from already-known pieces."""
    beta = np.asarray(beta, dtype=np.float64)
    attention = np.asarray(attention, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    contrib = beta * attention * x
    logit = float(intercept + contrib.sum())
    ranked = topk_features(contrib[None, :], k=len(contrib))[0].tolist()
    return Explanation(
        index=index,
        x=x.copy(),
        attention=attention.copy(),
        reinforced=attention * x,
        contributions=contrib,
        intercept=float(intercept),
        logit=logit,
        output=float(sigmoid(logit)) if task == "binary" else logit,
        ranked=[int(i) for i in ranked],
        suppressed=[int(i) for i in np.flatnonzero(attention == 0.0)],
    )


def _attention_matrix(model: Model, X: Array) -> Array:
    """Attention weights per instance; all-ones for plain linear models."""
    if isinstance(model, SraLinearModel):
        return model.attention(X)
    if isinstance(model, LinearModel):
        return np.ones_like(np.asarray(X, dtype=np.float64))
    raise UnsupportedModelError(
        f"{model.kind} has no intrinsic attribution; only sralinear and lr do")


def contribution_matrix(model: Model, X: Array) -> Array:
    """(n, p) exact additive contributions beta_i * a_i * x_i."""
    X = np.asarray(X, dtype=np.float64)
    # same association order as from_components, so the two agree bit-exactly
    return model.params["beta"] * _attention_matrix(model, X) * X


def explain_batch(model: Model, X: Array) -> list[Explanation]:
    X = np.asarray(X, dtype=np.float64)
    attention = _attention_matrix(model, X)
    beta = model.params["beta"]
    intercept = float(model.params["intercept"])
    task = model.task
    return [
        from_components(beta, intercept, attention[i], X[i], task=task, index=i)
        for i in range(len(X))
    ]


def explain_linear(model: LinearModel, X: Array) -> list[Explanation]:
    """Baseline attribution: contributions beta_i * x_i, attention all ones."""
    if not isinstance(model, LinearModel):
        raise UnsupportedModelError("explain_linear expects a plain linear model")
    return explain_batch(model, X)


def write_attributions_csv(path, explanations: list[Explanation],
                           feature_names: list[str] | None = None) -> None:
    """instance_id, then (x_i, a_i, contrib_i) per feature, then
    intercept, logit, output."""
    if not explanations:
        raise ValueError("nothing to write")
    p = len(explanations[0].x)
    names = feature_names or [f"x{i + 1}" for i in range(p)]
    header = ["instance_id"]
    for name in names:
        header += [name, f"a_{name}", f"contrib_{name}"]
    header += ["intercept", "logit", "output"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for e in explanations:
            cells = [str(e.index)]
            for i in range(p):
                cells += [repr(float(e.x[i])), repr(float(e.attention[i])),
                          repr(float(e.contributions[i]))]
            cells += [repr(e.intercept), repr(e.logit), repr(e.output)]
            fh.write(",".join(cells) + "\n")


def relevance_curve(model: Model, X: Array, contribution_feature: int,
                    conditioning_feature: int) -> Array:
    """Pairs (x_j, contribution_i) for scatter plotting, one row per instance."""
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    for idx in (contribution_feature, conditioning_feature):
        if not 0 <= idx < p:
            raise IndexError(f"feature index {idx} out of range for p={p}")
    contrib = contribution_matrix(model, X)[:, contribution_feature]
    return np.column_stack([X[:, conditioning_feature], contrib])


# -- reinforced export -------------------------------------------------------


def svg_scatter(points: Array, labels: Array, title: str) -> str:
    """Minimal self-contained scatter, class 0 grey and class 1 orange."""
    pts = np.asarray(points, dtype=np.float64)
    size, margin = 480, 40
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi - lo == 0.0, 1.0, hi - lo)

    def place(val, axis):
        frac = (val - lo[axis]) / span[axis]
        pos = margin + frac * (size - 2 * margin)
        return pos if axis == 0 else size - pos  # flip y for screen coords

    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
    )
    out.write(f'<title>{title}</title>\n')
    out.write(f'<rect width="{size}" height="{size}" fill="white"/>\n')
    for (px, py), label in zip(pts, labels):
        color = "#e07b39" if label == 1.0 else "#8a8a8a"
        out.write(f'<circle cx="{place(px, 0):.2f}" cy="{place(py, 1):.2f}" '
                  f'r="2" fill="{color}" fill-opacity="0.7"/>\n')
    out.write("</svg>\n")
    return out.getvalue()


def export_reinforced(model: Model, X: Array, y: Array, csv_path,
                      svg_original=None, svg_reinforced=None) -> None:
    """Dump (x, a, o, y, prediction) rows; for p=2 optionally write the
    original and reinforced scatters as SVG files."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    attention = _attention_matrix(model, X)
    reinforced = attention * X
    outputs = model.predict_output(X)
    p = X.shape[1]
    header = (
        [f"x{i + 1}" for i in range(p)]
        + [f"a{i + 1}" for i in range(p)]
        + [f"o{i + 1}" for i in range(p)]
        + ["y", "prediction"]
    )
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(X)):
            cells = [repr(float(v)) for v in X[i]]
            cells += [repr(float(v)) for v in attention[i]]
            cells += [repr(float(v)) for v in reinforced[i]]
            cells += [repr(float(y[i])), repr(float(outputs[i]))]
            fh.write(",".join(cells) + "\n")
    if p == 2:
        if svg_original is not None:
            with open(svg_original, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(svg_scatter(X, y, "original inputs"))
        if svg_reinforced is not None:
            with open(svg_reinforced, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(svg_scatter(reinforced, y, "reinforced inputs"))
