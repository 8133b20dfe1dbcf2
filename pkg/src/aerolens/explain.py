"""Model-agnostic attribution: exact Shapley values and LIME-style local
linear surrogates, plus derivation of the pollutant weight factors W.

Any object with a ``predict_proba(X) -> (n, n_classes)`` method can be
explained; attributions are computed against the probability of the
model's predicted class unless ``target_class`` names a class index.

With five features the Shapley computation enumerates all 2**5 = 32
coalitions exactly, using the marginal (interventional) value function

    v(S) = mean over background rows b of f(x_S combined with b_rest)

so the efficiency, symmetry, and dummy axioms hold to float precision
rather than approximately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import POLLUTANTS
from .errors import (
    AllZeroImportancesError,
    DegeneratePerturbationsError,
    EmptyBackgroundError,
    EmptyInputError,
)
from .seeding import rng_from

__all__ = [
    "Attribution",
    "WeightFactors",
    "shap_exact",
    "mean_abs_shap",
    "lime_explain",
    "derive_weight_factors",
]

METHOD_SHAPLEY = "ExactShapley"
METHOD_SURROGATE = "LocalSurrogate"

LIME_SIGMA = 0.3
LIME_RIDGE = 1e-6
WEIGHT_FLOOR = 0.01


@dataclass(frozen=True)
class Attribution:
    """Per-feature signed contributions for one instance.

    For ``ExactShapley``, ``base_value + sum(values)`` equals the model
    output at the instance (efficiency).  For ``LocalSurrogate`` the values
    are raw surrogate coefficients and ``base_value`` is the intercept.
    """

    values: tuple[float, ...]
    base_value: float
    target_class: int
    method: str
    feature_names: tuple[str, ...] = POLLUTANTS

    def to_dict(self) -> dict:
        return {
            "values": {name: v for name, v in zip(self.feature_names, self.values)},
            "base_value": self.base_value,
            "target_class": self.target_class,
            "method": self.method,
        }


@dataclass(frozen=True)
class WeightFactors:
    """Per-pollutant weights in (0, 1] with max = 1, plus provenance."""

    values: tuple[float, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        if len(self.values) != len(POLLUTANTS):
            raise ValueError("weight factors must cover all five pollutants")
        if any(not 0.0 < w <= 1.0 for w in self.values):
            raise ValueError("weights must lie in (0, 1]")
        if max(self.values) != 1.0:
            raise ValueError("maximum weight must equal 1")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __getitem__(self, pollutant: str) -> float:
        return self.values[POLLUTANTS.index(pollutant)]

    def to_dict(self) -> dict:
        return {
            "weights": {name: w for name, w in zip(POLLUTANTS, self.values)},
            "provenance": self.provenance,
        }

    @classmethod
    def unit(cls) -> "WeightFactors":
        return cls(values=(1.0,) * len(POLLUTANTS), provenance="unit weights (W = 1)")

    @classmethod
    def from_dict(cls, doc: dict) -> "WeightFactors":
        weights = doc["weights"]
        return cls(
            values=tuple(float(weights[p]) for p in POLLUTANTS),
            provenance=doc.get("provenance", ""),
        )


def _predicted_class(model, instance: np.ndarray) -> int:
    return int(np.argmax(model.predict_proba(instance[None, :])[0]))


def _coalition_values(model, instance: np.ndarray, background: np.ndarray) -> np.ndarray:
    """v(S) for every coalition bitmask, for every class: (2**d, n_classes).

    Bit j of the mask set means feature j is taken from the instance.
    """
    n_bg, d = background.shape
    n_masks = 1 << d
    stacked = np.tile(background, (n_masks, 1))
    for mask in range(n_masks):
        block = stacked[mask * n_bg : (mask + 1) * n_bg]
        for j in range(d):
            if mask >> j & 1:
                block[:, j] = instance[j]
    proba = model.predict_proba(stacked)
    return proba.reshape(n_masks, n_bg, -1).mean(axis=1)


def _shapley_from_values(values: np.ndarray, d: int) -> np.ndarray:
    """Exact Shapley weights applied to precomputed v(S): (d, n_classes)."""
    fact = [math.factorial(i) for i in range(d + 1)]
    weight_by_size = [fact[s] * fact[d - 1 - s] / fact[d] for s in range(d)]
    sizes = np.asarray([bin(m).count("1") for m in range(1 << d)])
    phi = np.zeros((d, values.shape[1]))
    for mask in range(1 << d):
        s = sizes[mask]
        for j in range(d):
            if mask >> j & 1:
                continue
            phi[j] += weight_by_size[s] * (values[mask | 1 << j] - values[mask])
    return phi


def shap_exact(
    model,
    instance: np.ndarray,
    background: np.ndarray,
    target_class: Optional[int] = None,
) -> Attribution:
    """Exact Shapley attribution for one instance.

    ``target_class`` is an index into the model's probability columns; by
    default the model's predicted class for the instance is explained.
    """
    instance = np.asarray(instance, dtype=float).ravel()
    background = np.asarray(background, dtype=float)
    if background.ndim != 2 or background.shape[0] == 0:
        raise EmptyBackgroundError("background matrix must have at least one row")
    d = background.shape[1]
    if instance.size != d:
        raise ValueError("instance width differs from background width")
    if target_class is None:
        target_class = _predicted_class(model, instance)

    values = _coalition_values(model, instance, background)
    phi = _shapley_from_values(values, d)[:, target_class]
    base = float(values[0, target_class])
    names = POLLUTANTS if d == len(POLLUTANTS) else tuple(f"f{j}" for j in range(d))
    return Attribution(
        values=tuple(float(v) for v in phi),
        base_value=base,
        target_class=int(target_class),
        method=METHOD_SHAPLEY,
        feature_names=names,
    )


def mean_abs_shap(
    model,
    sample: np.ndarray,
    background: np.ndarray,
    per_class: bool = False,
) -> np.ndarray:
    """Mean |phi| over sample rows and classes, in POLLUTANTS order.

    With ``per_class=True`` the per-class breakdown is returned instead,
    shaped (n_classes, d).
    """
    sample = np.asarray(sample, dtype=float)
    background = np.asarray(background, dtype=float)
    if sample.ndim != 2 or sample.shape[0] == 0:
        raise EmptyInputError("sample matrix must have at least one row")
    if background.ndim != 2 or background.shape[0] == 0:
        raise EmptyBackgroundError("background matrix must have at least one row")
    d = sample.shape[1]
    acc: Optional[np.ndarray] = None
    for row in sample:
        values = _coalition_values(model, row, background)
        phi = np.abs(_shapley_from_values(values, d))  # (d, n_classes)
        acc = phi if acc is None else acc + phi
    mean_phi = acc / sample.shape[0]
    return mean_phi.T if per_class else mean_phi.mean(axis=1)


def lime_explain(
    model,
    instance: np.ndarray,
    n_samples: int = 1000,
    kernel_width: Optional[float] = None,
    seed: int = 0,
    target_class: Optional[int] = None,
) -> Attribution:
    """Local linear surrogate around one (normalized-space) instance.

    Perturbations are Gaussian (sigma 0.3 per feature) around the instance;
    each is weighted by exp(-dist^2 / kernel_width^2); a ridge-damped
    (1e-6) weighted least squares with intercept is fit to the model's
    probabilities.  Raw coefficients are reported, per LIME convention.
    """
    instance = np.asarray(instance, dtype=float).ravel()
    d = instance.size
    if n_samples < 50:
        raise ValueError("n_samples must be >= 50")
    if kernel_width is None:
        kernel_width = 0.75 * math.sqrt(d)
    if target_class is None:
        target_class = _predicted_class(model, instance)

    rng = rng_from(seed)
    Z = instance + rng.normal(0.0, LIME_SIGMA, size=(n_samples, d))
    dist2 = np.sum((Z - instance) ** 2, axis=1)
    weights = np.exp(-dist2 / kernel_width**2)
    if weights.sum() <= 1e-12:
        raise DegeneratePerturbationsError("all perturbation weights are numerically zero")

    y = model.predict_proba(Z)[:, target_class]
    design = np.column_stack([np.ones(n_samples), Z])
    wd = design * weights[:, None]
    lhs = design.T @ wd + LIME_RIDGE * np.eye(d + 1)
    rhs = wd.T @ y
    beta = np.linalg.solve(lhs, rhs)

    names = POLLUTANTS if d == len(POLLUTANTS) else tuple(f"f{j}" for j in range(d))
    return Attribution(
        values=tuple(float(v) for v in beta[1:]),
        base_value=float(beta[0]),
        target_class=int(target_class),
        method=METHOD_SURROGATE,
        feature_names=names,
    )


def derive_weight_factors(
    importances: Sequence[float], provenance: str = "mean-|SHAP| max-normalized"
) -> WeightFactors:
    """W_j = importance_j / max importance; exact zeros floored to 0.01.

    The floor keeps every pollutant alive in the potency weighting; note a
    positive importance below 1% of the maximum still maps below the floor,
    so strict order preservation is guaranteed only away from that corner.
    """
    imp = np.asarray(importances, dtype=float)
    if np.any(imp < 0):
        raise ValueError("importances must be non-negative")
    top = imp.max() if imp.size else 0.0
    if top <= 0:
        raise AllZeroImportancesError("all importances are zero")
    w = imp / top
    w[imp == 0] = WEIGHT_FLOOR
    return WeightFactors(values=tuple(float(v) for v in w), provenance=provenance)
