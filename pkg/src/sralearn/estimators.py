"""Estimator layer: fit/predict wrappers with sklearn-compatible params,
plus seeded, optionally parallel cross validation.

These classes adapt the tape-trained models to the usual estimator
conventions (``get_params``/``set_params``, ``fit`` returning self,
fitted attributes with trailing underscores, input validation through
``check_X_y``/``check_array``).  Cross-validation derives one RNG
substream per fold from the master seed, so results are bit-identical
regardless of how many worker processes execute the folds.
"""

from __future__ import annotations

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, clone
from sklearn.utils.validation import check_array, check_X_y

from .data import Preprocessor, TabularDataset, folds_for
from .exceptions import ConfigError, NotFittedError
from .explain import contribution_matrix, explain_batch
from .metrics import CvReport, accuracy, auc_pr, auc_roc, r2
from .models import init_model
from .rng import substream_seed
from .training import TrainConfig, train

Array = np.ndarray

# metric -> (scorer over (y, model output), valid task)
_SCORERS = {
    "aucroc": (lambda y, out: auc_roc(out, y), "binary"),
    "aucpr": (lambda y, out: auc_pr(out, y), "binary"),
    "accuracy": (lambda y, out: accuracy(y, (out > 0.5).astype(float)), "binary"),
    "mse": (lambda y, out: float(np.mean((y - out) ** 2)), "regression"),
    "r2": (lambda y, out: r2(y, out), "regression"),
}


def score_metric(metric: str, y: Array, output: Array, task: str) -> float:
    if metric not in _SCORERS:
        raise ConfigError(f"unknown metric {metric!r}; expected one of {tuple(_SCORERS)}")
    scorer, metric_task = _SCORERS[metric]
    if metric_task != task:
        raise ConfigError(f"metric {metric!r} does not apply to a {task} task")
    return float(scorer(np.asarray(y, dtype=np.float64), output))


def _early_stop_metric(metric: str, task: str) -> str:
    """Map a reporting metric onto a supported early-stopping metric."""
    if task == "regression":
        return "mse"  # r2 ranks identically to mse on a fixed split
    return metric if metric in ("aucroc", "aucpr") else "aucroc"


class _TapeTrainedMixin:
    """Shared fit machinery; subclasses define _kind and _task."""

    _kind = ""
    _task = ""

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            weight_decay=self.weight_decay,
            dropout=self.dropout,
            patience=self.patience,
            val_fraction=self.val_fraction,
            metric=_early_stop_metric(self.metric, self._task),
            seed=self.seed,
        )

    def _fit_arrays(self, X: Array, y: Array):
        model = init_model(self._kind, p=X.shape[1],
                           d_k=getattr(self, "d_k", 8),
                           seed=self.seed, task=self._task)
        self.log_ = train(model, X, y, self._train_config())
        self.model_ = model
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")

    def _validated(self, X) -> Array:
        self._check_fitted()
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X


class _ClassifierBase(_TapeTrainedMixin, ClassifierMixin, BaseEstimator):
    _task = "binary"

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        if len(self.classes_) != 2:
            raise ValueError(f"binary classifier needs 2 classes, got {len(self.classes_)}")
        y01 = (y == self.classes_[1]).astype(np.float64)
        return self._fit_arrays(X, y01)

    def decision_function(self, X) -> Array:
        X = self._validated(X)
        return self.model_.decision_function(X)

    def predict_proba(self, X) -> Array:
        X = self._validated(X)
        p = self.model_.predict_output(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> Array:
        X = self._validated(X)
        p = self.model_.predict_output(X)
        return self.classes_[(p > 0.5).astype(int)]


class _RegressorBase(_TapeTrainedMixin, RegressorMixin, BaseEstimator):
    _task = "regression"

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        return self._fit_arrays(X, y)

    def predict(self, X) -> Array:
        X = self._validated(X)
        return self.model_.predict_output(X)


class _AttentionApi:
    """Explanation accessors for estimators whose model carries attention."""

    def attention(self, X) -> Array:
        X = self._validated(X)
        return self.model_.attention(X)

    def contributions(self, X) -> Array:
        X = self._validated(X)
        return contribution_matrix(self.model_, X)

    def explain(self, X):
        X = self._validated(X)
        return explain_batch(self.model_, X)


class SRALinearClassifier(_AttentionApi, _ClassifierBase):
    """Binary classifier with per-feature attention and exact attributions."""

    _kind = "sralinear"

    def __init__(self, d_k=8, learning_rate=1e-3, batch_size=256, max_epochs=200,
                 weight_decay=1e-4, dropout=0.1, patience=20, val_fraction=0.1,
                 metric="aucroc", seed=0):
        self.d_k = d_k
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.patience = patience
        self.val_fraction = val_fraction
        self.metric = metric
        self.seed = seed


class SRALinearRegressor(_AttentionApi, _RegressorBase):
    """Regressor with per-feature attention and exact attributions."""

    _kind = "sralinear"

    def __init__(self, d_k=8, learning_rate=1e-3, batch_size=256, max_epochs=200,
                 weight_decay=1e-4, dropout=0.1, patience=20, val_fraction=0.1,
                 metric="r2", seed=0):
        self.d_k = d_k
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.patience = patience
        self.val_fraction = val_fraction
        self.metric = metric
        self.seed = seed


class LinearClassifier(_AttentionApi, _ClassifierBase):
    """Logistic regression trained with the same optimizer and protocol."""

    _kind = "lr"

    def __init__(self, learning_rate=1e-3, batch_size=256, max_epochs=200,
                 weight_decay=0.0, dropout=0.0, patience=20, val_fraction=0.1,
                 metric="aucroc", seed=0):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.patience = patience
        self.val_fraction = val_fraction
        self.metric = metric
        self.seed = seed


class LinearRegressor(_AttentionApi, _RegressorBase):
    """Ordinary linear regression trained by the same pipeline."""

    _kind = "lr"

    def __init__(self, learning_rate=1e-3, batch_size=256, max_epochs=200,
                 weight_decay=0.0, dropout=0.0, patience=20, val_fraction=0.1,
                 metric="r2", seed=0):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.patience = patience
        self.val_fraction = val_fraction
        self.metric = metric
        self.seed = seed


class MLPClassifier(_ClassifierBase):
    """Two-hidden-layer baseline (widths 4p and 2p); no intrinsic attributions."""

    _kind = "mlp"

    def __init__(self, learning_rate=1e-3, batch_size=256, max_epochs=200,
                 weight_decay=1e-4, dropout=0.0, patience=20, val_fraction=0.1,
                 metric="aucroc", seed=0):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.patience = patience
        self.val_fraction = val_fraction
        self.metric = metric
        self.seed = seed


class MLPRegressor(_RegressorBase):
    """Two-hidden-layer regression baseline."""

    _kind = "mlp"

    def __init__(self, learning_rate=1e-3, batch_size=256, max_epochs=200,
                 weight_decay=1e-4, dropout=0.0, patience=20, val_fraction=0.1,
                 metric="r2", seed=0):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.weight_decay = weight_decay
        self.dropout = dropout
        self.patience = patience
        self.val_fraction = val_fraction
        self.metric = metric
        self.seed = seed


def estimator_for(kind: str, task: str, **params):
    table = {
        ("sralinear", "binary"): SRALinearClassifier,
        ("sralinear", "regression"): SRALinearRegressor,
        ("lr", "binary"): LinearClassifier,
        ("lr", "regression"): LinearRegressor,
        ("mlp", "binary"): MLPClassifier,
        ("mlp", "regression"): MLPRegressor,
    }
    key = (kind, task)
    if key not in table:
        raise ConfigError(f"no estimator for kind={kind!r}, task={task!r}")
    cls = table[key]
    valid = cls().get_params()
    return cls(**{k: v for k, v in params.items() if k in valid})


def _fit_score_fold(estimator, X, y, train_idx, test_idx, fold_seed, metric, task):
    est = clone(estimator)
    est.set_params(seed=fold_seed)
    est.fit(X[train_idx], y[train_idx])
    out = (est.model_.predict_output(X[test_idx]))
    return score_metric(metric, y[test_idx], out, task), est


def cross_validate_arrays(estimator, X: Array, y: Array, k: int = 5, seed: int = 0,
                          metric: str = "aucroc", jobs: int = 1,
                          model_name: str | None = None) -> tuple[CvReport, list]:
    """k-fold CV over encoded arrays; stratified for binary targets.

    Fold RNG seeds derive from (seed, fold index) alone, so any `jobs`
    value yields the same report.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    task = estimator._task
    folds = folds_for(y, k, seed, task)
    fold_seeds = [substream_seed(seed, f"cv/fold{i}") for i in range(k)]
    results = Parallel(n_jobs=jobs)(
        delayed(_fit_score_fold)(estimator, X, y, tr, te, fs, metric, task)
        for (tr, te), fs in zip(folds, fold_seeds)
    )
    values = [v for v, _ in results]
    fitted = [e for _, e in results]
    name = model_name or estimator._kind
    return CvReport(model=name, metric=metric, values=values), fitted


def _fit_score_fold_dataset(estimator, dataset, train_idx, test_idx,
                            fold_seed, metric, task):
    train_raw = dataset.subset(train_idx)
    test_raw = dataset.subset(test_idx)
    pre = Preprocessor(dataset.schema).fit(train_raw)
    est = clone(estimator)
    est.set_params(seed=fold_seed)
    est.fit(pre.transform(train_raw), train_raw.y)
    out = est.model_.predict_output(pre.transform(test_raw))
    return score_metric(metric, test_raw.y, out, task), est, pre


def cross_validate_dataset(estimator, dataset: TabularDataset, k: int = 5,
                           seed: int = 0, metric: str = "aucroc", jobs: int = 1,
                           model_name: str | None = None) -> tuple[CvReport, list]:
    """CV over a raw dataset; the preprocessor is refit inside every fold
    so no test-fold statistic ever leaks into training."""
    task = estimator._task
    folds = folds_for(dataset.y, k, seed, task)
    fold_seeds = [substream_seed(seed, f"cv/fold{i}") for i in range(k)]
    results = Parallel(n_jobs=jobs)(
        delayed(_fit_score_fold_dataset)(estimator, dataset, tr, te, fs, metric, task)
        for (tr, te), fs in zip(folds, fold_seeds)
    )
    values = [v for v, _, _ in results]
    fitted = [(e, p) for _, e, p in results]
    name = model_name or estimator._kind
    return CvReport(model=name, metric=metric, values=values), fitted
