"""Four classifiers over pollutant vectors, holdout splitting, evaluation.

All variants share one contract: ``predict_proba`` rows are finite,
non-negative and sum to 1, and ``predict`` equals the row-wise argmax of
``predict_proba`` with ties broken toward the earliest entry of
``class_list``.  Training is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import Dataset
from .errors import (
    CorruptDocumentError,
    DimensionMismatchError,
    EmptyDatasetError,
    EmptyInputError,
    SchemaVersionMismatchError,
    SingleClassError,
)
from .metrics import EvalReport, confusion_matrix, metrics_from_confusion, rmse_from_probabilities
from .seeding import derive_seed, rng_from

__all__ = [
    "ClassifierModel",
    "train_decision_tree",
    "train_random_forest",
    "train_gaussian_nb",
    "train_linear_svm",
    "predict",
    "predict_proba",
    "evaluate",
    "holdout_split",
    "split_indices",
    "save_model",
    "load_model",
]

MODEL_SCHEMA_VERSION = 1

VARIANT_DT = "DecisionTree"
VARIANT_RF = "RandomForest"
VARIANT_NB = "GaussianNB"
VARIANT_SVM = "LinearSVM"

_NB_VARIANCE_FLOOR = 1e-9


def _clean_label(value):
    return value.item() if hasattr(value, "item") else value


# --- decision tree internals -------------------------------------------------


@dataclass
class _TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: Optional["_TreeNode"] = None
    right: Optional["_TreeNode"] = None
    dist: Optional[np.ndarray] = None  # leaf class distribution

    @property
    def is_leaf(self) -> bool:
        return self.dist is not None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"dist": [float(v) for v in self.dist]}
        return {
            "feature": int(self.feature),
            "threshold": float(self.threshold),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "_TreeNode":
        if "dist" in doc:
            return cls(dist=np.asarray(doc["dist"], dtype=float))
        return cls(
            feature=int(doc["feature"]),
            threshold=float(doc["threshold"]),
            left=cls.from_dict(doc["left"]),
            right=cls.from_dict(doc["right"]),
        )


def _gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.dot(p, p))


def _best_split(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    n_classes: int,
    min_leaf: int,
    features: Sequence[int],
) -> Optional[tuple[int, float]]:
    """Best (feature, threshold) by Gini gain over midpoint candidates.

    Candidates sit between consecutive sorted unique values.  Ties keep the
    lowest feature index, then the lowest threshold.  Returns None when no
    candidate satisfies the min_leaf constraint.
    """
    n = idx.size
    best_quality = -np.inf
    best: Optional[tuple[int, float]] = None
    for f in features:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs_sorted = xs[order]
        ys_sorted = y[idx][order]

        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys_sorted] = 1.0
        cum = np.cumsum(onehot, axis=0)  # cum[i] = class counts of first i+1 rows
        total = cum[-1]

        cuts = np.nonzero(xs_sorted[:-1] < xs_sorted[1:])[0]  # split after position i
        if cuts.size == 0:
            continue
        left_n = cuts + 1
        right_n = n - left_n
        ok = (left_n >= min_leaf) & (right_n >= min_leaf)
        cuts, left_n, right_n = cuts[ok], left_n[ok], right_n[ok]
        if cuts.size == 0:
            continue

        left_counts = cum[cuts]
        right_counts = total - left_counts
        # Maximizing sum(l_c^2)/n_l + sum(r_c^2)/n_r minimizes weighted Gini.
        quality = (left_counts**2).sum(axis=1) / left_n + (right_counts**2).sum(
            axis=1
        ) / right_n
        j = int(np.argmax(quality))  # first max: lowest threshold wins ties
        if quality[j] > best_quality:
            best_quality = quality[j]
            threshold = (xs_sorted[cuts[j]] + xs_sorted[cuts[j] + 1]) / 2.0
            best = (f, float(threshold))
    return best


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_depth: Optional[int],
    min_leaf: int,
    feature_rng: Optional[np.random.Generator] = None,
    max_features: Optional[int] = None,
) -> _TreeNode:
    """CART growth with an explicit stack (robust to deep zero-gain chains).

    Splits continue while a node is impure and a legal candidate exists;
    stopping criteria are purity, max_depth, and min_leaf.
    """
    d = X.shape[1]
    root = _TreeNode()
    stack: list[tuple[_TreeNode, np.ndarray, int]] = [(root, np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        parent_gini = _gini(counts)
        grown = False
        if parent_gini > 0.0 and (max_depth is None or depth < max_depth) and idx.size >= 2 * min_leaf:
            if feature_rng is not None and max_features is not None and max_features < d:
                features = np.sort(feature_rng.choice(d, size=max_features, replace=False))
            else:
                features = np.arange(d)
            found = _best_split(X, y, idx, n_classes, min_leaf, features)
            if found is not None:
                f, threshold = found
                mask = X[idx, f] <= threshold
                left_idx, right_idx = idx[mask], idx[~mask]
                # Weighted child impurity never exceeds the parent's.
                child = (
                    left_idx.size * _gini(np.bincount(y[left_idx], minlength=n_classes))
                    + right_idx.size * _gini(np.bincount(y[right_idx], minlength=n_classes))
                ) / idx.size
                assert child <= parent_gini + 1e-12
                node.feature, node.threshold = f, threshold
                node.left, node.right = _TreeNode(), _TreeNode()
                stack.append((node.left, left_idx, depth + 1))
                stack.append((node.right, right_idx, depth + 1))
                grown = True
        if not grown:
            node.dist = counts / counts.sum()
    return root


def _tree_proba(root: _TreeNode, X: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.empty((X.shape[0], n_classes))
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = node.dist
            continue
        mask = X[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


# --- model facade -------------------------------------------------------------


@dataclass
class ClassifierModel:
    """A trained classifier of any supported variant.

    ``params`` holds the variant-specific state; the prediction methods
    dispatch on ``variant``.
    """

    variant: str
    class_list: list
    n_features: int
    params: dict = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if not self.class_list:
            raise ValueError("class_list must be non-empty")
        if len(set(map(str, self.class_list))) != len(self.class_list):
            raise ValueError("class_list must be duplicate-free")

    # -- prediction --------------------------------------------------------

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimensionMismatchError(
                f"expected {self.n_features} feature columns"
            )
        return X

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        k = len(self.class_list)
        if self.variant == VARIANT_DT:
            proba = _tree_proba(self.params["tree"], X, k)
        elif self.variant == VARIANT_RF:
            votes = np.zeros((X.shape[0], k))
            for tree in self.params["trees"]:
                leaf_dist = _tree_proba(tree, X, k)
                votes[np.arange(X.shape[0]), np.argmax(leaf_dist, axis=1)] += 1.0
            proba = votes / len(self.params["trees"])
        elif self.variant == VARIANT_NB:
            means = self.params["means"]
            variances = self.params["variances"]
            log_prior = np.log(self.params["priors"])
            logp = np.empty((X.shape[0], k))
            for c in range(k):
                logp[:, c] = log_prior[c] - 0.5 * np.sum(
                    np.log(2.0 * np.pi * variances[c])
                    + (X - means[c]) ** 2 / variances[c],
                    axis=1,
                )
            proba = _softmax(logp)
        elif self.variant == VARIANT_SVM:
            margins = X @ self.params["weights"].T + self.params["bias"]
            proba = _softmax(margins)
        else:  # pragma: no cover - defensive
            raise ValueError(f"unknown variant {self.variant!r}")
        return proba

    def predict(self, X: np.ndarray) -> np.ndarray:
        proba = self.predict_proba(X)
        idx = np.argmax(proba, axis=1)  # first max: earliest class wins ties
        return np.asarray([self.class_list[i] for i in idx])

    def class_index(self, label) -> int:
        try:
            return self.class_list.index(_clean_label(label))
        except ValueError:
            raise ValueError(f"label {label!r} not in class_list") from None


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _encode_targets(y) -> tuple[np.ndarray, list]:
    y = np.asarray(y)
    if y.size == 0:
        raise EmptyInputError("no training targets")
    classes, y_idx = np.unique(y, return_inverse=True)
    class_list = [_clean_label(c) for c in classes]
    return y_idx.astype(int), class_list


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyInputError("training matrix is empty")
    if X.shape[0] != y.shape[0]:
        raise ValueError("X and y must have equal length")
    return X, y


# --- training -----------------------------------------------------------------


def train_decision_tree(
    X, y, max_depth: Optional[int] = None, min_leaf: int = 1
) -> ClassifierModel:
    """CART with Gini impurity and midpoint thresholds."""
    X, y = _check_xy(X, y)
    y_idx, class_list = _encode_targets(y)
    tree = _grow_tree(X, y_idx, len(class_list), max_depth, min_leaf)
    return ClassifierModel(
        variant=VARIANT_DT,
        class_list=class_list,
        n_features=X.shape[1],
        params={"tree": tree, "max_depth": max_depth, "min_leaf": min_leaf},
    )


def train_random_forest(
    X,
    y,
    n_trees: int = 100,
    max_depth: Optional[int] = None,
    min_leaf: int = 1,
    seed: int = 0,
    bootstrap: bool = True,
    max_features: Optional[int] = "sqrt",  # type: ignore[assignment]
) -> ClassifierModel:
    """Bootstrap ensemble of CART trees with random per-split feature subsets.

    ``max_features="sqrt"`` (default) uses floor(sqrt(d)) candidate features
    per split — 2 for the five pollutants; None allows all features.
    Per-tree seeds derive from the master seed by tree index, so results do
    not depend on build order.
    """
    X, y = _check_xy(X, y)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    y_idx, class_list = _encode_targets(y)
    d = X.shape[1]
    if max_features == "sqrt":
        max_features = int(math.floor(math.sqrt(d)))
    trees = []
    tree_seeds = []
    for i in range(n_trees):
        tree_seed = derive_seed(seed, "tree", i)
        tree_seeds.append(tree_seed)
        rng = rng_from(tree_seed)
        if bootstrap:
            sample = rng.integers(0, X.shape[0], size=X.shape[0])
            Xb, yb = X[sample], y_idx[sample]
        else:
            Xb, yb = X, y_idx
        trees.append(
            _grow_tree(
                Xb,
                yb,
                len(class_list),
                max_depth,
                min_leaf,
                feature_rng=rng,
                max_features=max_features,
            )
        )
    return ClassifierModel(
        variant=VARIANT_RF,
        class_list=class_list,
        n_features=d,
        params={
            "trees": trees,
            "tree_seeds": tree_seeds,
            "n_trees": n_trees,
            "bootstrap": bootstrap,
            "max_features": max_features,
            "max_depth": max_depth,
            "min_leaf": min_leaf,
            "seed": seed,
        },
    )


def train_gaussian_nb(X, y) -> ClassifierModel:
    """Per-class Gaussian densities with population variances (+ floor)."""
    X, y = _check_xy(X, y)
    y_idx, class_list = _encode_targets(y)
    k = len(class_list)
    means = np.empty((k, X.shape[1]))
    variances = np.empty((k, X.shape[1]))
    priors = np.empty(k)
    for c in range(k):
        rows = X[y_idx == c]
        means[c] = rows.mean(axis=0)
        variances[c] = rows.var(axis=0) + _NB_VARIANCE_FLOOR  # population variance
        priors[c] = rows.shape[0] / X.shape[0]
    return ClassifierModel(
        variant=VARIANT_NB,
        class_list=class_list,
        n_features=X.shape[1],
        params={"means": means, "variances": variances, "priors": priors},
    )


def train_linear_svm(
    X,
    y,
    lam: float = 1e-2,
    epochs: int = 200,
    seed: int = 0,
    batch_size: int = 32,
) -> ClassifierModel:
    """One-vs-rest linear SVM via deterministic-shuffle subgradient descent.

    Pegasos-style steps on the L2-regularized hinge loss with learning rate
    1/(lam*t); the bias is left unregularized.  Probabilities come from a
    softmax over the margins.
    """
    X, y = _check_xy(X, y)
    if lam <= 0:
        raise ValueError("lam must be positive")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    y_idx, class_list = _encode_targets(y)
    k = len(class_list)
    if k < 2:
        raise SingleClassError("linear SVM needs at least two classes")
    n, d = X.shape
    weights = np.zeros((k, d))
    bias = np.zeros(k)
    for c in range(k):
        target = np.where(y_idx == c, 1.0, -1.0)
        rng = rng_from(derive_seed(seed, "ovr", c))
        w = np.zeros(d)
        b = 0.0
        t = 0
        for _ in range(epochs):
            perm = rng.permutation(n)
            for start in range(0, n, batch_size):
                batch = perm[start : start + batch_size]
                t += 1
                eta = 1.0 / (lam * t)
                margins = target[batch] * (X[batch] @ w + b)
                viol = margins < 1.0
                grad_w = lam * w
                grad_b = 0.0
                if viol.any():
                    yv = target[batch][viol]
                    grad_w = grad_w - (yv[:, None] * X[batch][viol]).sum(axis=0) / batch.size
                    grad_b = -yv.sum() / batch.size
                w = w - eta * grad_w
                b = b - eta * grad_b
        weights[c] = w
        bias[c] = b
    return ClassifierModel(
        variant=VARIANT_SVM,
        class_list=class_list,
        n_features=d,
        params={
            "weights": weights,
            "bias": bias,
            "lam": lam,
            "epochs": epochs,
            "batch_size": batch_size,
            "seed": seed,
        },
    )


# --- module-level prediction wrappers ------------------------------------------


def predict(model: ClassifierModel, X) -> np.ndarray:
    return model.predict(X)


def predict_proba(model: ClassifierModel, X) -> np.ndarray:
    return model.predict_proba(X)


def evaluate(model: ClassifierModel, X, y) -> EvalReport:
    """Confusion matrix plus the seven-metric suite on labelled data."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if y.size == 0:
        raise EmptyInputError("no evaluation instances")
    truth = np.asarray([model.class_index(v) for v in y])
    proba = model.predict_proba(X)
    pred = np.argmax(proba, axis=1)
    cm = confusion_matrix(truth, pred, len(model.class_list))
    m = metrics_from_confusion(cm)
    return EvalReport(
        confusion=tuple(tuple(int(v) for v in row) for row in cm),
        accuracy=m["accuracy"],
        kappa=m["kappa"],
        rmse=rmse_from_probabilities(proba, truth),
        mcc=m["mcc"],
        f1_macro=m["f1_macro"],
        precision_macro=m["precision_macro"],
        recall_macro=m["recall_macro"],
    )


# --- holdout splitting ----------------------------------------------------------


def split_indices(keys: Sequence, train_fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stratified index split: per stratum, round(fraction*n) rows to train.

    Strata are visited in a deterministic sorted order and shuffled with a
    seed-derived stream, so the split is reproducible.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n = len(keys)
    if n == 0:
        raise EmptyDatasetError("nothing to split")
    rng = rng_from(derive_seed(seed, "holdout"))
    train: list[int] = []
    test: list[int] = []
    strata = sorted(set(keys), key=lambda v: (str(type(v)), str(v)))
    for stratum in strata:
        idx = np.asarray([i for i, k in enumerate(keys) if k == stratum])
        perm = rng.permutation(idx.size)
        n_train = int(math.floor(train_fraction * idx.size + 0.5))  # round half up
        train.extend(idx[perm[:n_train]].tolist())
        test.extend(idx[perm[n_train:]].tolist())
    return np.asarray(sorted(train), dtype=int), np.asarray(sorted(test), dtype=int)


def holdout_split(
    dataset: Dataset, train_fraction: float = 0.7, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Stratified (by activity label, where present) 70/30-style split."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    keys = [r.activity.value if r.activity is not None else "" for r in dataset]
    train_idx, test_idx = split_indices(keys, train_fraction, seed)
    readings = dataset.readings
    return (
        Dataset(tuple(readings[i] for i in train_idx), source_tag=dataset.source_tag),
        Dataset(tuple(readings[i] for i in test_idx), source_tag=dataset.source_tag),
    )


# --- persistence ------------------------------------------------------------------


def _params_to_doc(model: ClassifierModel) -> dict:
    p = model.params
    if model.variant == VARIANT_DT:
        return {
            "tree": p["tree"].to_dict(),
            "max_depth": p["max_depth"],
            "min_leaf": p["min_leaf"],
        }
    if model.variant == VARIANT_RF:
        return {
            "trees": [t.to_dict() for t in p["trees"]],
            "tree_seeds": [int(s) for s in p["tree_seeds"]],
            "n_trees": p["n_trees"],
            "bootstrap": p["bootstrap"],
            "max_features": p["max_features"],
            "max_depth": p["max_depth"],
            "min_leaf": p["min_leaf"],
            "seed": int(p["seed"]),
        }
    if model.variant == VARIANT_NB:
        return {
            "means": [[float(v) for v in row] for row in p["means"]],
            "variances": [[float(v) for v in row] for row in p["variances"]],
            "priors": [float(v) for v in p["priors"]],
        }
    if model.variant == VARIANT_SVM:
        return {
            "weights": [[float(v) for v in row] for row in p["weights"]],
            "bias": [float(v) for v in p["bias"]],
            "lam": float(p["lam"]),
            "epochs": int(p["epochs"]),
            "batch_size": int(p["batch_size"]),
            "seed": int(p["seed"]),
        }
    raise ValueError(f"unknown variant {model.variant!r}")  # pragma: no cover


def _params_from_doc(variant: str, doc: dict) -> dict:
    if variant == VARIANT_DT:
        return {
            "tree": _TreeNode.from_dict(doc["tree"]),
            "max_depth": doc.get("max_depth"),
            "min_leaf": doc.get("min_leaf", 1),
        }
    if variant == VARIANT_RF:
        return {
            "trees": [_TreeNode.from_dict(t) for t in doc["trees"]],
            "tree_seeds": list(doc["tree_seeds"]),
            "n_trees": doc["n_trees"],
            "bootstrap": doc["bootstrap"],
            "max_features": doc["max_features"],
            "max_depth": doc.get("max_depth"),
            "min_leaf": doc.get("min_leaf", 1),
            "seed": doc.get("seed", 0),
        }
    if variant == VARIANT_NB:
        return {
            "means": np.asarray(doc["means"], dtype=float),
            "variances": np.asarray(doc["variances"], dtype=float),
            "priors": np.asarray(doc["priors"], dtype=float),
        }
    if variant == VARIANT_SVM:
        return {
            "weights": np.asarray(doc["weights"], dtype=float),
            "bias": np.asarray(doc["bias"], dtype=float),
            "lam": doc["lam"],
            "epochs": doc["epochs"],
            "batch_size": doc.get("batch_size", 32),
            "seed": doc.get("seed", 0),
        }
    raise CorruptDocumentError(f"unknown classifier variant {variant!r}")


def model_to_dict(model: ClassifierModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "classifier",
        "variant": model.variant,
        "class_list": list(model.class_list),
        "n_features": int(model.n_features),
        "params": _params_to_doc(model),
    }


def model_from_dict(doc: dict) -> ClassifierModel:
    try:
        version = doc["schema_version"]
        if version > MODEL_SCHEMA_VERSION:
            raise SchemaVersionMismatchError(
                f"classifier schema {version} is newer than supported {MODEL_SCHEMA_VERSION}"
            )
        variant = doc["variant"]
        return ClassifierModel(
            variant=variant,
            class_list=list(doc["class_list"]),
            n_features=int(doc["n_features"]),
            params=_params_from_doc(variant, doc["params"]),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise CorruptDocumentError(f"malformed classifier document: {exc}") from exc


def save_model(model: ClassifierModel, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> ClassifierModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptDocumentError(f"classifier JSON does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptDocumentError("classifier document must be a JSON object")
    return model_from_dict(doc)
