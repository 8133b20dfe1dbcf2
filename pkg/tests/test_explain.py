"""Attribution oracles: Shapley axioms, surrogate recovery, weight factors."""

import itertools
import math

import numpy as np
import pytest

from aerolens import (
    POLLUTANTS,
    Attribution,
    WeightFactors,
    derive_weight_factors,
    lime_explain,
    mean_abs_shap,
    shap_exact,
    train_decision_tree,
    train_gaussian_nb,
)
from aerolens.errors import (
    AllZeroImportancesError,
    DegeneratePerturbationsError,
    EmptyBackgroundError,
    EmptyInputError,
)
from aerolens.explain import LIME_RIDGE, LIME_SIGMA
from aerolens.seeding import rng_from


class LinearStub:
    """predict_proba with a single linear output column (test double)."""

    def __init__(self, w, b=0.0):
        self.w = np.asarray(w, dtype=float)
        self.b = float(b)

    def predict_proba(self, X):
        return (np.asarray(X, dtype=float) @ self.w + self.b)[:, None]


class ConstantStub:
    def __init__(self, value=0.4, n_classes=1):
        self.value = value
        self.n_classes = n_classes

    def predict_proba(self, X):
        return np.full((np.asarray(X).shape[0], self.n_classes), self.value)


def shapley_permutation_oracle(model, instance, background, target):
    """Average marginal contribution over every feature ordering."""
    d = len(instance)

    def v(S):
        rows = np.array(background, dtype=float, copy=True)
        for j in S:
            rows[:, j] = instance[j]
        return float(model.predict_proba(rows)[:, target].mean())

    phi = np.zeros(d)
    for perm in itertools.permutations(range(d)):
        S = []
        prev = v(S)
        for j in perm:
            S.append(j)
            cur = v(S)
            phi[j] += cur - prev
            prev = cur
    return phi / math.factorial(d)


# --- exact Shapley -----------------------------------------------------------


def test_shap_on_a_linear_model_returns_the_coefficients():
    model = LinearStub([2.0, 3.0])
    result = shap_exact(model, np.array([1.0, 1.0]), np.array([[0.0, 0.0]]))
    assert result.values == pytest.approx((2.0, 3.0), abs=1e-12)
    assert result.base_value == pytest.approx(0.0, abs=1e-12)
    assert result.method == "ExactShapley"
    assert result.feature_names == ("f0", "f1")


def test_shap_is_zero_when_instance_equals_the_background():
    model = LinearStub([2.0, 3.0], b=1.0)
    row = np.array([4.0, -1.0])
    result = shap_exact(model, row, row[None, :])
    assert result.values == pytest.approx((0.0, 0.0), abs=1e-12)
    assert result.base_value == pytest.approx(model.predict_proba(row[None, :])[0, 0])


def test_shap_matches_the_permutation_oracle_on_a_tree():
    rng = np.random.default_rng(41)
    X = rng.uniform(0, 1, size=(60, 5))
    y = (X[:, 0] + X[:, 2] > 1.0).astype(int)
    model = train_decision_tree(X, y, max_depth=2)
    background = X[:4]
    for row in X[10:13]:
        for target in (0, 1):
            got = shap_exact(model, row, background, target_class=target)
            want = shapley_permutation_oracle(model, row, background, target)
            np.testing.assert_allclose(got.values, want, atol=1e-9)


def test_shap_efficiency_on_real_models():
    rng = np.random.default_rng(42)
    X = rng.uniform(0, 1, size=(50, 5))
    y = rng.integers(0, 3, size=50)
    background = X[:20]
    for model in (train_decision_tree(X, y, max_depth=4), train_gaussian_nb(X, y)):
        for row in X[25:28]:
            for target in range(3):
                att = shap_exact(model, row, background, target_class=target)
                out = model.predict_proba(row[None, :])[0, target]
                assert att.base_value + sum(att.values) == pytest.approx(out, abs=1e-9)


def test_shap_symmetry():
    model = LinearStub([1.0, 1.0])
    background = np.array([[0.0, 0.0], [1.0, 1.0]])
    att = shap_exact(model, np.array([2.0, 2.0]), background)
    assert att.values[0] == pytest.approx(att.values[1], abs=1e-12)


def test_shap_dummy_feature_gets_exactly_zero():
    model = LinearStub([2.0, 0.0])
    background = np.random.default_rng(43).normal(size=(6, 2))
    att = shap_exact(model, np.array([3.0, 9.0]), background)
    assert att.values[1] == 0.0


def test_shap_default_target_is_the_predicted_class():
    rng = np.random.default_rng(44)
    X = rng.uniform(0, 1, size=(40, 5))
    y = (X[:, 1] > 0.5).astype(int)
    model = train_decision_tree(X, y)
    row = X[7]
    att = shap_exact(model, row, X[:10])
    assert att.target_class == int(model.predict_proba(row[None, :])[0].argmax())
    assert att.feature_names == POLLUTANTS  # five features use pollutant names


def test_shap_validation():
    model = LinearStub([1.0, 1.0])
    with pytest.raises(EmptyBackgroundError):
        shap_exact(model, np.zeros(2), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        shap_exact(model, np.zeros(3), np.zeros((2, 2)))


# --- mean |SHAP| importances ---------------------------------------------------


def test_mean_abs_shap_constant_model_is_zero():
    sample = np.random.default_rng(45).normal(size=(4, 3))
    imp = mean_abs_shap(ConstantStub(n_classes=2), sample, sample)
    np.testing.assert_allclose(imp, np.zeros(3), atol=1e-12)


def test_mean_abs_shap_ignored_feature_scores_zero():
    rng = np.random.default_rng(46)
    X = rng.uniform(0, 1, size=(50, 5))
    y = (X[:, 0] > 0.5).astype(int)  # tree only ever needs feature 0
    model = train_decision_tree(X, y, max_depth=1)
    imp = mean_abs_shap(model, X[:10], X[:20])
    assert imp[0] > 0
    assert imp[1] == imp[2] == imp[3] == imp[4] == 0.0


def test_mean_abs_shap_equals_per_row_recomputation():
    rng = np.random.default_rng(47)
    X = rng.uniform(0, 1, size=(30, 5))
    y = rng.integers(0, 2, size=30)
    model = train_decision_tree(X, y, max_depth=3)
    sample, background = X[:10], X[10:20]
    got = mean_abs_shap(model, sample, background)
    acc = np.zeros(5)
    for row in sample:
        per_class = np.array(
            [
                shap_exact(model, row, background, target_class=c).values
                for c in range(2)
            ]
        )
        acc += np.abs(per_class).mean(axis=0)
    np.testing.assert_allclose(got, acc / len(sample), atol=1e-12)


def test_mean_abs_shap_per_class_breakdown():
    rng = np.random.default_rng(48)
    X = rng.uniform(0, 1, size=(20, 5))
    y = rng.integers(0, 3, size=20)
    model = train_gaussian_nb(X, y)
    overall = mean_abs_shap(model, X[:6], X[6:12])
    per_class = mean_abs_shap(model, X[:6], X[6:12], per_class=True)
    assert per_class.shape == (3, 5)
    np.testing.assert_allclose(per_class.mean(axis=0), overall, atol=1e-12)


def test_mean_abs_shap_validation():
    model = ConstantStub()
    with pytest.raises(EmptyInputError):
        mean_abs_shap(model, np.zeros((0, 5)), np.zeros((3, 5)))
    with pytest.raises(EmptyBackgroundError):
        mean_abs_shap(model, np.zeros((3, 5)), np.zeros((0, 5)))


# --- local surrogate (LIME) ----------------------------------------------------


def test_lime_recovers_a_linear_gradient():
    model = LinearStub([4.0, -2.0, 0.0, 0.0, 0.0], b=0.3)
    instance = np.full(5, 0.5)
    att = lime_explain(model, instance, seed=7)
    np.testing.assert_allclose(att.values, [4.0, -2.0, 0.0, 0.0, 0.0], atol=1e-6)
    assert att.method == "LocalSurrogate"
    # larger samples stay within the documented convergence bound
    att5k = lime_explain(model, instance, n_samples=5000, seed=8)
    np.testing.assert_allclose(att5k.values, [4.0, -2.0, 0.0, 0.0, 0.0], atol=1e-3)


def test_lime_constant_model_gives_zero_coefficients():
    att = lime_explain(ConstantStub(0.4), np.zeros(5), seed=3)
    np.testing.assert_allclose(att.values, np.zeros(5), atol=1e-9)
    assert att.base_value == pytest.approx(0.4, abs=1e-6)


def test_lime_matches_the_normal_equations_oracle():
    rng = np.random.default_rng(49)
    X = rng.uniform(0, 1, size=(40, 5))
    y = rng.integers(0, 2, size=40)
    model = train_gaussian_nb(X, y)
    instance = X[3]
    seed, n = 11, 200
    att = lime_explain(model, instance, n_samples=n, seed=seed, target_class=1)

    # regenerate the perturbation set from the same stream
    Z = instance + rng_from(seed).normal(0.0, LIME_SIGMA, size=(n, 5))
    kw = 0.75 * math.sqrt(5)
    w = np.exp(-np.sum((Z - instance) ** 2, axis=1) / kw**2)
    design = np.column_stack([np.ones(n), Z])
    W = np.diag(w)
    beta = np.linalg.inv(design.T @ W @ design + LIME_RIDGE * np.eye(6)) @ (
        design.T @ W @ model.predict_proba(Z)[:, 1]
    )
    assert att.base_value == pytest.approx(beta[0], abs=1e-9)
    np.testing.assert_allclose(att.values, beta[1:], atol=1e-9)


def test_lime_is_deterministic_per_seed():
    model = LinearStub([1.0, 2.0, 3.0, 4.0, 5.0])
    instance = np.full(5, 0.2)
    a = lime_explain(model, instance, seed=5)
    b = lime_explain(model, instance, seed=5)
    assert a == b
    c = lime_explain(model, instance, seed=6)
    assert a != c


def test_lime_validation():
    model = ConstantStub()
    with pytest.raises(ValueError):
        lime_explain(model, np.zeros(5), n_samples=10)
    with pytest.raises(DegeneratePerturbationsError):
        lime_explain(model, np.zeros(5), kernel_width=1e-12, seed=0)


# --- weight factors --------------------------------------------------------------


def test_weight_factors_from_published_scale_importances():
    # importances in (no2, voc, pm10, pm2_5, pm1) order
    w = derive_weight_factors([0.016, 0.028, 0.013, 0.010, 0.008])
    assert w["voc"] == 1.0
    assert w["no2"] == pytest.approx(0.016 / 0.028)  # ~0.5714
    assert w["pm10"] == pytest.approx(0.013 / 0.028)
    order = np.argsort(w.as_array())
    assert list(order) == [4, 3, 2, 0, 1]  # pm1 < pm2_5 < pm10 < no2 < voc


def test_weight_factors_equal_importances_all_one():
    w = derive_weight_factors([0.25] * 5)
    assert w.values == (1.0,) * 5


def test_weight_factors_zero_floored():
    w = derive_weight_factors([0.5, 1.0, 0.0, 0.25, 0.125])
    assert w.values[2] == 0.01
    assert w.values == (0.5, 1.0, 0.01, 0.25, 0.125)


def test_weight_factors_preserve_strict_ordering():
    rng = np.random.default_rng(50)
    for _ in range(20):
        imp = rng.uniform(0.05, 1.0, size=5)  # comfortably above the floor corner
        w = derive_weight_factors(imp).as_array()
        np.testing.assert_array_equal(np.argsort(imp), np.argsort(w))


def test_weight_factors_validation():
    with pytest.raises(ValueError):
        derive_weight_factors([-0.1, 1.0, 0.5, 0.5, 0.5])
    with pytest.raises(AllZeroImportancesError):
        derive_weight_factors([0.0] * 5)
    with pytest.raises(ValueError):
        WeightFactors(values=(0.5, 0.5, 0.5, 0.5, 0.5))  # max != 1
    with pytest.raises(ValueError):
        WeightFactors(values=(1.0, 0.0, 0.5, 0.5, 0.5))  # zero weight
    with pytest.raises(ValueError):
        WeightFactors(values=(1.0, 0.5))  # wrong arity


def test_weight_factors_round_trip_and_unit():
    w = WeightFactors(values=(0.5, 1.0, 0.25, 0.125, 0.0625), provenance="test")
    back = WeightFactors.from_dict(w.to_dict())
    assert back == w
    unit = WeightFactors.unit()
    assert unit.values == (1.0,) * 5
    np.testing.assert_array_equal(unit.as_array(), np.ones(5))


def test_attribution_to_dict_uses_feature_names():
    att = Attribution(
        values=(1.0, 2.0, 3.0, 4.0, 5.0),
        base_value=0.5,
        target_class=1,
        method="ExactShapley",
    )
    doc = att.to_dict()
    assert doc["values"] == {
        "no2": 1.0, "voc": 2.0, "pm10": 3.0, "pm2_5": 4.0, "pm1": 5.0
    }
    assert doc["base_value"] == 0.5
    assert doc["target_class"] == 1
    assert doc["method"] == "ExactShapley"
