import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aeromap.models import (
    BoostingHistory,
    RankDeficientError,
    correlation_matrix,
    cross_validate,
    evaluate,
    feature_importance,
    fit_forest,
    fit_gbt,
    fit_linear,
    kfold_labels,
    predict,
    run_ablation,
    split_indices,
)


def _data(n=300, seed=0, noise=0.3):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 4))
    y = 3 * X[:, 0] + 2 * np.sin(6 * X[:, 1]) + 4 * (X[:, 2] > 0.5) * X[:, 0] + noise * rng.standard_normal(n)
    return X, y, ("a", "b", "c", "d")


# linear family


def test_univariate_exact_line():
    x = np.linspace(0, 3, 20)
    X = np.column_stack([x * 7, x])
    m = fit_linear(X, 2 * x + 1, ("other", "nAODm"), "Univariate")
    b0, b = m.raw_coefficients()
    assert m.features == ("nAODm",)
    assert b0 == pytest.approx(1.0, abs=1e-8) and b[0] == pytest.approx(2.0, abs=1e-8)


def test_ridge_zero_equals_ols():
    X, y, f = _data()
    ols = fit_linear(X, y, f, "Multivariate")
    ridge = fit_linear(X, y, f, "Ridge", 0.0)
    np.testing.assert_allclose(ridge.coef, ols.coef, rtol=1e-6)
    assert ridge.intercept == pytest.approx(ols.intercept, rel=1e-12)


def test_lasso_full_shrinkage():
    X, y, f = _data()
    m = fit_linear(X, y, f, "Lasso", 1e3)
    assert (m.coef == 0).all() and m.intercept == pytest.approx(y.mean(), rel=1e-12)


def test_lasso_matches_subgradient_conditions():
    X, y, f = _data()
    lam = 0.05
    m = fit_linear(X, y, f, "Lasso", lam)
    Z = (X - m.mean) / m.scale
    g = Z.T @ (y - m.intercept - Z @ m.coef) / y.size
    for j in range(4):
        if m.coef[j] != 0:
            assert g[j] == pytest.approx(lam * np.sign(m.coef[j]), abs=1e-5)
        else:
            assert abs(g[j]) <= lam + 1e-5


def test_ridge_closed_form_oracle():
    X, y, f = _data(n=50)
    lam = 3.0
    m = fit_linear(X, y, f, "Ridge", lam)
    Z = (X - X.mean(0)) / X.std(0)
    beta = np.linalg.inv(Z.T @ Z + lam * np.eye(4)) @ Z.T @ (y - y.mean())
    np.testing.assert_allclose(m.coef, beta, rtol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 100), st.floats(0, 100))
def test_ridge_norm_nonincreasing(a, b):
    X, y, f = _data(n=80, seed=5)
    lo, hi = sorted((a, b))
    n_lo = np.linalg.norm(fit_linear(X, y, f, "Ridge", lo).coef)
    n_hi = np.linalg.norm(fit_linear(X, y, f, "Ridge", hi).coef)
    assert n_hi <= n_lo * (1 + 1e-12)


def test_rank_deficient_ols_suggests_ridge():
    X, y, f = _data(n=30)
    X[:, 3] = 2 * X[:, 0]
    with pytest.raises(RankDeficientError, match="Ridge"):
        fit_linear(X, y, f, "Multivariate")
    fit_linear(X, y, f, "Ridge", 0.1)


def test_negative_lambda_rejected():
    X, y, f = _data(n=10)
    with pytest.raises(ValueError):
        fit_linear(X, y, f, "Ridge", -1)


# trees


def test_step_function_is_learnt_exactly():
    x = np.linspace(0, 1, 41)
    y = (x > 0.5).astype(float)
    for kind in ("RandomForest", "ExtraTrees"):
        m = fit_forest(x[:, None], y, ("x",), kind, n_estimators=10, max_depth=None,
                       max_features=1.0, seed=1)
        p = m.predict_matrix(x[:, None])
        if kind == "ExtraTrees":
            np.testing.assert_allclose(p, y, atol=1e-12)
        else:
            # a bootstrap that misses a point next to the step can place the threshold past it
            assert np.sqrt(np.mean((p - y) ** 2)) < 0.1
    m = fit_gbt(x[:, None], y, ("x",), n_estimators=1, learning_rate=1.0, max_depth=1)
    np.testing.assert_allclose(m.predict_matrix(x[:, None]), y, atol=1e-12)


def test_constant_target_gives_constant_leaves():
    X, _, f = _data(n=50)
    y = np.full(50, 4.25)
    for kind in ("RandomForest", "ExtraTrees"):
        m = fit_forest(X, y, f, kind, n_estimators=5, seed=0)
        assert all((t.value == 4.25).all() for t in m.trees)
        rep = feature_importance(m)
        assert not rep.has_splits and rep.ranking() == []


def _cart(X, y, depth):
    """Brute-force CART: exhaustive midpoint thresholds, squared-error criterion."""
    if depth == 0 or len(y) < 2:
        return ("leaf", y.mean())
    best = None
    parent = ((y - y.mean()) ** 2).sum()
    for j in range(X.shape[1]):
        vals = np.unique(X[:, j])
        for a, b in itertools.pairwise(vals):
            t = (a + b) / 2
            L = X[:, j] <= t
            sse = ((y[L] - y[L].mean()) ** 2).sum() + ((y[~L] - y[~L].mean()) ** 2).sum()
            if best is None or sse < best[0] - 1e-12:
                best = (sse, j, t)
    if best is None or best[0] >= parent:
        return ("leaf", y.mean())
    _, j, t = best
    L = X[:, j] <= t
    return ("split", j, t, _cart(X[L], y[L], depth - 1), _cart(X[~L], y[~L], depth - 1))


def _cart_predict(node, x):
    while node[0] == "split":
        node = node[3] if x[node[1]] <= node[2] else node[4]
    return node[1]


@pytest.mark.parametrize("depth", [1, 2, 3, 4])
def test_one_tree_boosting_is_a_regression_tree(depth):
    X, y, f = _data(n=60, seed=3)
    m = fit_gbt(X, y, f, n_estimators=1, learning_rate=1.0, max_depth=depth)
    oracle = _cart(X, y, depth)
    Xt = np.random.default_rng(9).random((200, 4))
    for Q in (X, Xt):
        want = np.array([_cart_predict(oracle, q) for q in Q])
        np.testing.assert_allclose(m.predict_matrix(Q), want, rtol=1e-10, atol=1e-10)


def test_deep_single_tree_interpolates():
    X, y, f = _data(n=60, seed=3)
    m = fit_gbt(X, y, f, n_estimators=1, learning_rate=1.0, max_depth=50)
    np.testing.assert_allclose(m.predict_matrix(X), y, atol=1e-10)


@pytest.mark.parametrize("lr", [0.1, 0.3, 1.0])
@pytest.mark.parametrize("lam", [0.0, 1.0])
def test_boosting_training_loss_nonincreasing(lr, lam):
    X, y, f = _data()
    h = BoostingHistory()
    fit_gbt(X, y, f, n_estimators=40, learning_rate=lr, max_depth=3, reg_lambda=lam, history=h)
    mse = np.array(h.train_mse)
    assert (np.diff(mse) <= 1e-12 * mse[0]).all()
    assert mse[-1] < np.var(y)


def test_early_stopping_keeps_best_iteration():
    X, y, f = _data(n=400)
    h = BoostingHistory()
    m = fit_gbt(X[:300], y[:300], f, n_estimators=300, learning_rate=0.5, max_depth=6,
                X_valid=X[300:], y_valid=y[300:], early_stopping_rounds=10, history=h)
    assert len(m.trees) == h.best_iteration + 1 < 300
    assert h.valid_rmse[h.best_iteration] == min(h.valid_rmse)


def test_prediction_bounds():
    X, y, f = _data()
    Xt = np.random.default_rng(1).random((500, 4)) * 1.4 - 0.2
    rf = fit_forest(X, y, f, "RandomForest", n_estimators=20, max_depth=5, seed=2)
    lo = min(t.value[t.feature < 0].min() for t in rf.trees)
    hi = max(t.value[t.feature < 0].max() for t in rf.trees)
    p = rf.predict_matrix(Xt)
    assert (p >= lo - 1e-12).all() and (p <= hi + 1e-12).all()
    gb = fit_gbt(X, y, f, n_estimators=30, learning_rate=0.3, max_depth=3)
    bound = gb.learning_rate * sum(np.abs(t.value[t.feature < 0]).max() for t in gb.trees)
    assert (np.abs(gb.predict_matrix(Xt) - gb.base_score) <= bound + 1e-9).all()


def test_trees_respect_max_depth_and_leaf_size():
    X, y, f = _data()
    m = fit_forest(X, y, f, "ExtraTrees", n_estimators=5, max_depth=4, min_samples_leaf=7, seed=0)
    for t in m.trees:
        assert t.depth() <= 4
        assert (t.count[t.feature < 0] >= 7).all()
        assert np.isfinite(t.value).all()


@pytest.mark.parametrize("kind", ["RandomForest", "ExtraTrees", "GradientBoosting"])
def test_fits_are_deterministic(kind):
    X, y, f = _data()

    def fit():
        if kind == "GradientBoosting":
            return fit_gbt(X, y, f, n_estimators=20, max_depth=4, max_features=0.5, seed=4)
        return fit_forest(X, y, f, kind, n_estimators=8, max_depth=6, seed=4)
    a, b = fit(), fit()
    for ta, tb in zip(a.trees, b.trees):
        for name in ("feature", "threshold", "value", "gain"):
            np.testing.assert_array_equal(getattr(ta, name), getattr(tb, name))
    c = fit_forest(X, y, f, "RandomForest", n_estimators=8, max_depth=6, seed=5)
    assert kind != "RandomForest" or not np.array_equal(a.predict_matrix(X), c.predict_matrix(X))


@pytest.mark.parametrize("kind", ["RandomForest", "ExtraTrees"])
def test_forest_thread_count_invariance(kind):
    X, y, f = _data()
    one = fit_forest(X, y, f, kind, n_estimators=12, max_depth=6, seed=8, threads=1)
    four = fit_forest(X, y, f, kind, n_estimators=12, max_depth=6, seed=8, threads=4)
    np.testing.assert_array_equal(one.predict_matrix(X), four.predict_matrix(X))


def test_ensembles_beat_linear_on_interactions():
    X, y, f = _data(n=600)
    tr, te = split_indices(600, 0.7, 0)
    lin = fit_linear(X[tr], y[tr], f, "Multivariate")
    r_lin = evaluate(lin.predict_matrix(X[te]), y[te]).rmse
    for m in (fit_forest(X[tr], y[tr], f, "RandomForest", 50, 10, 0.5, seed=0),
              fit_forest(X[tr], y[tr], f, "ExtraTrees", 50, 10, 0.8, seed=0),
              fit_gbt(X[tr], y[tr], f, 100, 0.3, 4)):
        assert evaluate(m.predict_matrix(X[te]), y[te]).rmse < r_lin


def test_predict_by_name():
    X, y, f = _data(n=40)
    m = fit_linear(X, y, f, "Multivariate")
    cols = {name: X[:, i] for i, name in enumerate(f)}
    shuffled = {"zzz": np.zeros(40), **dict(reversed(list(cols.items())))}
    np.testing.assert_array_equal(predict(m, shuffled), m.predict_matrix(X))
    del shuffled["c"]
    with pytest.raises(KeyError, match="c"):
        predict(m, shuffled)


# evaluation


def test_evaluate_examples():
    r = evaluate([1, 2, 3], [1, 2, 3])
    assert (r.rmse, r.mae, r.r2) == (0, 0, 1)
    r = evaluate([3, 4], [0, 0])
    assert r.rmse == pytest.approx(math.sqrt(12.5)) and r.mae == 3.5
    r = evaluate([5, 5, 5], [1, 2, 3])
    assert r.r2 == 0 and not r.r2_defined


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-1e3, 1e3)), st.data())
def test_evaluate_matches_direct_formulas(p, data):
    o = data.draw(arrays(np.float64, p.size, elements=st.floats(-1e3, 1e3)))
    r = evaluate(p, o)
    n = p.size
    e = [p[i] - o[i] for i in range(n)]
    rmse = math.sqrt(sum(x * x for x in e) / n)
    mae = sum(abs(x) for x in e) / n
    assert r.rmse == pytest.approx(rmse, rel=1e-10, abs=1e-10)
    assert r.mae == pytest.approx(mae, rel=1e-10, abs=1e-10)
    mp, mo = sum(p) / n, sum(o) / n
    sp = sum((x - mp) ** 2 for x in p)
    so = sum((x - mo) ** 2 for x in o)
    if sp > 1e-9 * max(1.0, mp * mp) * n and so > 1e-9 * max(1.0, mo * mo) * n:
        cov = sum((p[i] - mp) * (o[i] - mo) for i in range(n))
        assert r.r2 == pytest.approx(cov * cov / (sp * so), rel=1e-8, abs=1e-10)
    assert 0 <= r.r2 <= 1 and r.rmse >= 0 and r.mae >= 0
    assert r.rmse ** 2 >= r.bias ** 2 * (1 - 1e-12) - 1e-12


@given(st.integers(2, 500), st.floats(0.05, 0.95), st.integers(0, 10))
def test_split_is_disjoint_and_exhaustive(n, frac, seed):
    tr, te = split_indices(n, frac, seed)
    assert len(set(tr) & set(te)) == 0 and sorted([*tr, *te]) == list(range(n))
    assert len(tr) >= 1 and len(te) >= 1


def test_temporal_split_keeps_earliest_for_training():
    key = np.array([5, 1, 4, 2, 3, 0, 9, 8, 7, 6])
    tr, te = split_indices(10, 0.7, mode="temporal", order_key=key)
    assert key[tr].max() < key[te].min()


@given(st.integers(10, 200), st.integers(2, 10), st.integers(0, 5))
def test_kfold_labels_partition(n, k, seed):
    lab = kfold_labels(n, k, seed)
    counts = np.bincount(lab, minlength=k)
    assert counts.max() - counts.min() <= 1 and counts.sum() == n


def test_cross_validate_reports_each_fold():
    X, y, f = _data(n=100)
    reps = cross_validate(X, y, lambda a, b: fit_linear(a, b, f, "Multivariate"), k=5, seed=0)
    assert [r.label for r in reps] == [f"cv-fold-{i}" for i in range(5)]
    assert sum(r.n for r in reps) == 100


# importance, correlation, ablation


def test_single_signal_importance():
    rng = np.random.default_rng(0)
    X = rng.random((400, 3))
    y = 5 * X[:, 1] + 0.01 * rng.standard_normal(400)
    m = fit_gbt(X, y, ("p", "q", "r"), n_estimators=30, max_depth=3)
    rep = feature_importance(m)
    assert rep.ranking()[0][0] == "q" and rep.ranking()[0][1] > 0.9
    assert rep.share.sum() == pytest.approx(1.0) and (rep.share >= 0).all()


def test_correlation_matrix_properties():
    X, y, f = _data()
    X[:, 3] = 1.0   # constant column
    names, C = correlation_matrix(X, y, f)
    assert names[-1] == "PM_c" and C.shape == (5, 5)
    np.testing.assert_array_equal(C, C.T)
    assert (np.diag(C) == 1).all() and (C >= 0).all() and (C <= 1).all()
    assert C[3, 0] == 0
    assert C[0, 4] == pytest.approx(abs(np.corrcoef(X[:, 0], y)[0, 1]), rel=1e-12)


def test_ablation_noise_and_signal_features():
    rng = np.random.default_rng(1)
    n = 1500
    X = rng.random((n, 4))
    X[:, 3] = rng.standard_normal(n)   # pure noise
    y = 10 * X[:, 0] + 3 * np.sin(5 * X[:, 1]) + 2 * X[:, 2] + 0.5 * rng.standard_normal(n)
    f = ("signal", "wave", "slope", "noise")

    def fit(a, b, names):
        return fit_gbt(a, b, names, n_estimators=150, learning_rate=0.1, max_depth=3)
    rows = run_ablation(X, y, f, [["noise"], ["signal"]], fit, seed=0)
    assert [r.setting for r in rows] == ["S0", "S1", "S2"] and rows[0].removed == ()
    base = rows[0].rmse
    assert abs(rows[1].rmse - base) / base < 0.02
    assert rows[2].rmse > 1.10 * base
    with pytest.raises(ValueError, match="bogus"):
        run_ablation(X, y, f, [["bogus"]], fit)
