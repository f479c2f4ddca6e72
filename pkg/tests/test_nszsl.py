# tests/test_nszsl.py
"""
Tests for the noise-suppressed zero-shot model

Tests:
1. Norms, reweighting and the objective (hand cases + naive evaluator)
2. solve_wz - limiting case, monotone surrogate, optimizer oracle
3. solve_wx - hand case, constructed solution, stationarity, finite differences
4. fit - monotone trace, determinism, constructed instance, rank override
5. predict / predict_topk - tie-breaking, scaling, explicit V
6. Importance weights, Gini coefficient, top words per class

Run with: python tests/test_nszsl.py
"""

import os
import sys

import numpy as np
import pytest
import scipy.optimize

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from models import nszsl
from models.nszsl import ModelWeights, SolverConfig
from models.training_set import TrainingSet, one_hot
from utils.errors import DimensionMismatch
from utils.textpipe import DocMatrix, Vocabulary


# ============================================================================
# TEST DATA
# ============================================================================

def make_problem(seed, d=3, d_hat=4, num_classes=2, n=10):
    """Random training set; every class has an example and Z has full column rank (d_hat >= C)"""
    rng = np.random.default_rng(seed)
    labels = np.concatenate([np.arange(num_classes), rng.integers(0, num_classes, n - num_classes)])
    z = rng.integers(0, 2, size=(d_hat, num_classes)).astype(float)
    z[:num_classes] = np.eye(num_classes)
    return TrainingSet(
        x=rng.normal(size=(d, n)),
        y=one_hot(labels, num_classes),
        z=DocMatrix(entries=z, class_ids=tuple(f"c{i}" for i in range(num_classes))),
    )


def naive_objective(train, wx, wz, lambda1, lambda2):
    x, y, z = train.x, train.y, train.z.entries
    v = wx.T @ wz
    loss = 0.0
    for n in range(x.shape[1]):
        for c in range(z.shape[1]):
            loss += (x[:, n] @ v @ z[:, c] - y[n, c]) ** 2
    reg_match = sum(float(np.sum((v @ z[:, c]) ** 2)) for c in range(z.shape[1]))
    reg_l21 = sum(float(np.sqrt(np.sum(wz[:, i] ** 2))) for i in range(wz.shape[1]))
    return loss + lambda1 * reg_match + lambda2 * reg_l21


def smoothed_wz_value_and_grad(train, wx, wz, config):
    p = wx @ train.x
    z = train.z.entries
    resid = p.T @ wz @ z - train.y
    norms2 = np.sum(wz ** 2, axis=0)
    value = (
        np.sum(resid ** 2)
        + config.lambda1 * np.sum((wx.T @ wz @ z) ** 2)
        + config.lambda2 * np.sum(np.sqrt(norms2 + config.sigma))
    )
    grad = (
        2.0 * p @ resid @ z.T
        + 2.0 * config.lambda1 * wx @ wx.T @ wz @ z @ z.T
        + config.lambda2 * wz / np.sqrt(norms2 + config.sigma)
    )
    return value, grad


def wx_value_and_grad(train, wx, wz, lambda1):
    m = wz @ train.z.entries
    resid = train.x.T @ wx.T @ m - train.y
    value = np.sum(resid ** 2) + lambda1 * np.sum((wx.T @ m) ** 2)
    grad_u = 2.0 * train.x @ resid @ m.T + 2.0 * lambda1 * wx.T @ m @ m.T
    return value, grad_u.T


def tiny_model(wx, wz):
    return ModelWeights(wx=np.asarray(wx, float), wz=np.asarray(wz, float), config=SolverConfig())


# ============================================================================
# TESTS - norms and objective
# ============================================================================

def test_l21_norm_examples():
    assert nszsl.l21_norm([[3.0, 0.0], [4.0, 0.0]]) == 5.0
    assert nszsl.l21_norm(np.zeros((2, 3))) == 0.0
    assert nszsl.l21_norm(np.eye(3)) == 3.0


def test_update_d_examples():
    assert np.isclose(nszsl.update_d(np.array([[3.0], [4.0]]), 1e-300)[0], 0.1)
    assert np.isclose(nszsl.update_d(np.zeros((2, 1)), 1e-6)[0], 500.0)
    assert np.isclose(nszsl.update_d(np.zeros((2, 1)), 0.04)[0], 2.5)
    with pytest.raises(ValueError):
        nszsl.update_d(np.zeros((2, 1)), 0.0)


def test_smoothed_l21_bound():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(3, 7))
    w[:, 2] = 0.0
    for sigma in (1e-2, 1e-6):
        gap = nszsl.smoothed_l21(w, sigma) - nszsl.l21_norm(w)
        assert 0.0 <= gap <= 7 * np.sqrt(sigma)


def test_objective_zero_weights():
    train = make_problem(1)
    w = ModelWeights(wx=np.ones((2, 3)), wz=np.zeros((2, 4)), config=SolverConfig())
    terms = nszsl.objective(train, w)
    assert terms.loss == train.num_examples
    assert terms.reg_match == 0.0 and terms.reg_l21 == 0.0
    assert terms.total == train.num_examples


def test_objective_hand_case():
    train = TrainingSet(
        x=np.array([[1.0]]),
        y=np.array([[1.0]]),
        z=DocMatrix(entries=np.array([[1.0], [0.0]]), class_ids=("a",)),
    )
    terms = nszsl.objective(train, tiny_model([[1.0]], [[1.0, 0.0]]))
    assert terms.loss == 0.0
    assert terms.reg_match == 1.0
    assert terms.reg_l21 == 1.0
    assert terms.total == 2.0


def test_objective_matches_naive_evaluator():
    train = make_problem(2, d=4, d_hat=5, num_classes=3, n=8)
    rng = np.random.default_rng(3)
    config = SolverConfig(lambda1=0.7, lambda2=1.3)
    wx, wz = rng.normal(size=(3, 4)), rng.normal(size=(3, 5))
    model = ModelWeights(wx=wx, wz=wz, config=config)
    expected = naive_objective(train, wx, wz, 0.7, 1.3)
    assert abs(nszsl.objective(train, model).total - expected) <= 1e-12 * max(1.0, expected)


def test_objective_dimension_mismatch():
    train = make_problem(4)
    with pytest.raises(DimensionMismatch):
        nszsl.objective(train, tiny_model(np.ones((2, 5)), np.ones((2, 4))))


def test_frobenius_total_uses_squared_norm():
    train = make_problem(5)
    rng = np.random.default_rng(5)
    wx, wz = rng.normal(size=(2, 3)), rng.normal(size=(2, 4))
    terms = nszsl.objective_terms(train, wx, wz, SolverConfig(regularizer="frobenius", lambda2=2.0))
    assert np.isclose(terms.total, terms.loss + terms.reg_match + 2.0 * np.sum(wz ** 2))


# ============================================================================
# TESTS - Wz step
# ============================================================================

def test_solve_wz_huge_lambda2_vanishes():
    train = make_problem(6)
    wx = nszsl.init_wx(2, 3, seed=0)
    wz = nszsl.solve_wz(train, wx, SolverConfig(lambda2=1e9))
    assert nszsl.l21_norm(wz) < 1e-3


def test_solve_wz_surrogate_monotone():
    for seed in range(10):
        train = make_problem(seed, d=4, d_hat=8, num_classes=3, n=15)
        wx = nszsl.init_wx(3, 4, seed=seed)
        _, surrogate, _ = nszsl.solve_wz_with_trace(train, wx, SolverConfig(lambda1=0.5, lambda2=0.5))
        for prev, cur in zip(surrogate, surrogate[1:]):
            assert cur <= prev + 1e-10 + 1e-12 * abs(prev)


def test_solve_wz_matches_optimizer():
    train = make_problem(7, d=3, d_hat=4, num_classes=2, n=10)
    wx = nszsl.init_wx(2, 3, seed=1)
    config = SolverConfig(lambda1=0.5, lambda2=0.8, sigma=1e-3, rel_tol=1e-15, max_inner=2000)
    wz = nszsl.solve_wz(train, wx, config)

    def fun(flat):
        value, grad = smoothed_wz_value_and_grad(train, wx, flat.reshape(2, 4), config)
        return value, grad.ravel()

    ref = scipy.optimize.minimize(fun, np.zeros(8), jac=True, method="L-BFGS-B",
                                  options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 10000})
    ours = nszsl.smoothed_objective(train, wx, wz, config)
    assert abs(ours - ref.fun) < 1e-6


def test_solve_wz_reaches_stationary_point():
    train = make_problem(8, d=4, d_hat=6, num_classes=3, n=12)
    wx = nszsl.init_wx(3, 4, seed=2)
    config = SolverConfig(lambda1=1.0, lambda2=0.3, sigma=1e-2, rel_tol=1e-15, max_inner=2000)
    wz = nszsl.solve_wz(train, wx, config)
    _, grad = smoothed_wz_value_and_grad(train, wx, wz, config)
    assert np.linalg.norm(grad) <= 1e-4 * max(1.0, np.linalg.norm(wz))


def test_solve_wz_frobenius_single_solve_is_exact():
    train = make_problem(9, d=4, d_hat=6, num_classes=3, n=12)
    wx = nszsl.init_wx(3, 4, seed=3)
    config = SolverConfig(lambda1=0.4, lambda2=0.9, regularizer="frobenius")
    wz, surrogate, converged = nszsl.solve_wz_with_trace(train, wx, config)
    assert converged and len(surrogate) == 1
    p, z = wx @ train.x, train.z.entries
    grad = (
        2.0 * p @ (p.T @ wz @ z - train.y) @ z.T
        + 2.0 * config.lambda1 * wx @ wx.T @ wz @ z @ z.T
        + 2.0 * config.lambda2 * wz
    )
    assert np.linalg.norm(grad) <= 1e-8 * max(1.0, np.linalg.norm(2.0 * p @ train.y @ z.T))


def test_solve_wz_paths_agree():
    train = make_problem(10, d=4, d_hat=9, num_classes=3, n=12)
    wx = nszsl.init_wx(3, 4, seed=4)
    for regularizer in ("frobenius", "l21"):
        base = SolverConfig(regularizer=regularizer, sigma=1e-3, max_inner=10, rel_tol=1e-300)
        eigen = nszsl.solve_wz(train, wx, base.model_copy(update={"sylvester_path": "eigen"}))
        lowrank = nszsl.solve_wz(train, wx, base.model_copy(update={"sylvester_path": "lowrank"}))
        assert np.linalg.norm(eigen - lowrank) <= 1e-6 * np.linalg.norm(eigen)


# ============================================================================
# TESTS - Wx step
# ============================================================================

def test_solve_wx_hand_case():
    train = TrainingSet(
        x=np.array([[1.0]]),
        y=np.array([[1.0]]),
        z=DocMatrix(entries=np.array([[1.0]]), class_ids=("a",)),
    )
    wx = nszsl.solve_wx(train, np.array([[1.0]]), SolverConfig(lambda1=1.0))
    assert np.allclose(wx, [[0.5]])


def test_solve_wx_constructed_solution():
    rng = np.random.default_rng(11)
    num_classes = 3
    labels = np.array([0, 1, 2, 0, 1, 2, 2])
    y = one_hot(labels, num_classes)
    z = np.eye(num_classes)
    wz = rng.normal(size=(num_classes, num_classes)) + 3.0 * np.eye(num_classes)
    m = wz @ z
    x = np.linalg.inv(m).T @ y.T            # X^T I M = Y exactly with Wx0 = I
    train = TrainingSet(x=x, y=y, z=DocMatrix(entries=z, class_ids=("a", "b", "c")))
    config = SolverConfig(lambda1=1e-12)
    wx = nszsl.solve_wx(train, wz, config)
    assert nszsl.objective_terms(train, wx, wz, config).loss < 1e-8


def test_solve_wx_stationary():
    for seed in range(5):
        train = make_problem(seed, d=5, d_hat=6, num_classes=3, n=14)
        wz = np.random.default_rng(seed).normal(size=(3, 6))
        wx = nszsl.solve_wx(train, wz, SolverConfig(lambda1=0.6))
        _, grad = wx_value_and_grad(train, wx, wz, 0.6)
        _, grad0 = wx_value_and_grad(train, np.zeros_like(wx), wz, 0.6)
        assert np.linalg.norm(grad) <= 1e-6 * (1.0 + np.linalg.norm(grad0))


def test_wx_gradient_finite_differences():
    train = make_problem(12, d=3, d_hat=4, num_classes=2, n=9)
    rng = np.random.default_rng(12)
    wx, wz = rng.normal(size=(2, 3)), rng.normal(size=(2, 4))
    _, grad = wx_value_and_grad(train, wx, wz, 0.5)
    numeric = np.zeros_like(wx)
    h = 1e-6
    for idx in np.ndindex(*wx.shape):
        step = np.zeros_like(wx)
        step[idx] = h
        plus, _ = wx_value_and_grad(train, wx + step, wz, 0.5)
        minus, _ = wx_value_and_grad(train, wx - step, wz, 0.5)
        numeric[idx] = (plus - minus) / (2 * h)
    assert np.linalg.norm(numeric - grad) / np.linalg.norm(grad) < 1e-5


# ============================================================================
# TESTS - alternation
# ============================================================================

def _assert_monotone_trace(model):
    totals = [entry.total for entry in model.trace]
    for prev, cur in zip(totals, totals[1:]):
        assert cur <= prev * (1.0 + 1e-8) + 1e-12


def test_fit_trace_monotone():
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        d, d_hat, c = (int(v) for v in rng.integers(2, 8, size=3))
        train = make_problem(seed, d=max(d, c), d_hat=max(d_hat, c), num_classes=c, n=int(rng.integers(c, 30)))
        model = nszsl.fit(train, SolverConfig(lambda1=0.3, lambda2=0.3, seed=seed, max_outer=30))
        _assert_monotone_trace(model)


@pytest.mark.slow
def test_fit_trace_monotone_acceptance():
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        c = int(rng.integers(2, 11))
        train = make_problem(
            seed,
            d=int(rng.integers(c, 21)),
            d_hat=int(rng.integers(c, 41)),
            num_classes=c,
            n=int(rng.integers(c, 51)),
        )
        model = nszsl.fit(train, SolverConfig(lambda1=0.3, lambda2=0.3, seed=seed))
        _assert_monotone_trace(model)


def test_fit_deterministic():
    train = make_problem(13, d=4, d_hat=6, num_classes=3, n=12)
    config = SolverConfig(seed=5, max_outer=20)
    a, b = nszsl.fit(train, config), nszsl.fit(train, config)
    assert np.array_equal(a.wx, b.wx) and np.array_equal(a.wz, b.wz)
    assert a.trace == b.trace


def test_fit_trace_shape():
    train = make_problem(14)
    model = nszsl.fit(train, SolverConfig(max_outer=3, rel_tol=1e-300))
    assert [e.half_step for e in model.trace] == ["wz", "wx"] * 3
    assert [e.iteration for e in model.trace] == [1, 1, 2, 2, 3, 3]
    assert model.converged is False
    assert model.m == train.num_classes and model.rank_matches_classes


def test_fit_constructed_instance():
    labels = np.array([0, 1, 2, 3, 0, 1, 2, 3])
    train = TrainingSet(
        x=np.eye(4)[:, labels],
        y=one_hot(labels, 4),
        z=DocMatrix(entries=np.eye(4), class_ids=("a", "b", "c", "d")),
    )
    config = SolverConfig(lambda1=1e-6, lambda2=1e-6, rel_tol=1e-12, max_outer=500, seed=1)
    model = nszsl.fit(train, config)
    assert nszsl.objective(train, model).loss < 1e-6


def test_fit_rank_override():
    train = make_problem(15, d=4, d_hat=6, num_classes=3, n=12)
    model = nszsl.fit(train, SolverConfig(rank=2, max_outer=10))
    assert model.wx.shape == (2, 4) and model.wz.shape == (2, 6)
    assert model.rank_matches_classes is False


def test_fit_frobenius_runs():
    train = make_problem(16, d=4, d_hat=6, num_classes=3, n=12)
    model = nszsl.fit(train, SolverConfig(regularizer="frobenius", max_outer=20))
    _assert_monotone_trace(model)


@pytest.mark.slow
def test_fit_is_locally_optimal():
    for seed in range(20):
        rng = np.random.default_rng(2000 + seed)
        c = int(rng.integers(2, 6))
        d, d_hat = int(rng.integers(c, 6)), int(rng.integers(c, 6))
        train = make_problem(seed, d=d, d_hat=d_hat, num_classes=c, n=int(rng.integers(c, 21)))
        config = SolverConfig(lambda1=0.5, lambda2=0.5, sigma=1e-3, rel_tol=1e-12, max_outer=2000, seed=seed)
        model = nszsl.fit(train, config)
        m = model.m

        def fun(flat):
            wx = flat[:m * d].reshape(m, d)
            wz = flat[m * d:].reshape(m, d_hat)
            value, g_wz = smoothed_wz_value_and_grad(train, wx, wz, config)
            _, g_wx = wx_value_and_grad(train, wx, wz, config.lambda1)
            return value, np.concatenate([g_wx.ravel(), g_wz.ravel()])

        start = np.concatenate([model.wx.ravel(), model.wz.ravel()])
        ref = scipy.optimize.minimize(fun, start, jac=True, method="L-BFGS-B",
                                      options={"gtol": 1e-12, "ftol": 1e-15, "maxiter": 100000})
        ours = nszsl.smoothed_objective(train, model.wx, model.wz, config)
        assert ours - ref.fun <= 1e-4


# ============================================================================
# TESTS - prediction
# ============================================================================

def test_predict_single_candidate():
    model = tiny_model(np.ones((2, 3)), np.ones((2, 4)))
    z = DocMatrix(entries=np.ones((4, 1)), class_ids=("only",))
    best, scores = nszsl.predict(model, np.array([1.0, -2.0, 0.5]), z)
    assert best == 0 and scores.shape == (1,)


def test_predict_scaling_and_explicit_v():
    train = make_problem(17, d=4, d_hat=6, num_classes=3, n=12)
    model = nszsl.fit(train, SolverConfig(max_outer=10))
    rng = np.random.default_rng(17)
    z = DocMatrix(entries=rng.integers(0, 2, size=(6, 5)).astype(float), class_ids=tuple("abcde"))
    v = model.compatibility()
    for _ in range(5):
        x = rng.normal(size=4)
        best, scores = nszsl.predict(model, x, z)
        assert nszsl.predict(model, 7.5 * x, z)[0] == best
        assert np.allclose(scores, x @ v @ z.entries)
        assert best == int(np.argmax(x @ v @ z.entries))


def test_predict_duplicate_class_ties_to_lowest_index():
    model = tiny_model([[1.0]], [[1.0, 0.5]])
    z = DocMatrix(entries=np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0]]), class_ids=("a", "b", "c"))
    assert nszsl.predict(model, np.array([1.0]), z)[0] == 1


def test_predict_topk():
    model = tiny_model([[1.0]], [[1.0]])
    z = DocMatrix(entries=np.array([[0.2, 0.9, 0.5]]), weighting="tfidf", class_ids=("a", "b", "c"))
    assert nszsl.predict_topk(model, np.array([1.0]), z, 2) == [1, 2]
    assert nszsl.predict_topk(model, np.array([1.0]), z, 1) == [nszsl.predict(model, np.array([1.0]), z)[0]]
    assert sorted(nszsl.predict_topk(model, np.array([1.0]), z, 3)) == [0, 1, 2]


def test_predict_dimension_mismatch():
    model = tiny_model(np.ones((2, 3)), np.ones((2, 4)))
    z = DocMatrix(entries=np.ones((4, 2)), class_ids=("a", "b"))
    with pytest.raises(DimensionMismatch):
        nszsl.predict(model, np.ones(5), z)
    with pytest.raises(DimensionMismatch):
        nszsl.predict(model, np.ones(3), DocMatrix(entries=np.ones((3, 2)), class_ids=("a", "b")))


# ============================================================================
# TESTS - analysis
# ============================================================================

def test_importance_weights_examples():
    assert np.array_equal(nszsl.importance_weights(tiny_model(np.ones((2, 1)), np.zeros((2, 3)))).values, np.zeros(3))
    assert np.allclose(nszsl.importance_weights(tiny_model(np.ones((2, 1)), [[3.0, 0.0], [4.0, 0.0]])).values, [5.0, 0.0])


def test_gini_coefficient():
    assert nszsl.gini_coefficient(np.ones(10)) == pytest.approx(0.0, abs=1e-12)
    assert nszsl.gini_coefficient(np.zeros(4)) == 0.0
    spike = np.zeros(10)
    spike[3] = 2.0
    assert nszsl.gini_coefficient(spike) == pytest.approx(0.9)


def test_importance_summary():
    weights = nszsl.importance_weights(tiny_model(np.ones((1, 1)), [[4.0, 0.0, 1e-9, 1.0]]))
    summary = nszsl.importance_summary(weights, zero_tol=1e-6)
    assert summary.num_words == 4
    assert summary.near_zero == 2
    assert summary.top_decile_share == pytest.approx(4.0 / (5.0 + 1e-9))


def test_top_words_per_class():
    vocab = Vocabulary(terms=("bird", "fox", "red"))
    model = tiny_model(np.ones((1, 1)), [[0.5, 2.0, 1.0]])
    z = DocMatrix(entries=np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 1.0]]), class_ids=("a", "b"))
    table = nszsl.top_words_per_class(model, vocab, z, k=2)
    assert table["a"] == [("fox", 2.0), ("red", 1.0)]
    assert table["b"] == [("red", 1.0)]


def test_top_words_uniform_weights_keep_vocabulary_order():
    vocab = Vocabulary(terms=("bird", "fox", "red"))
    model = tiny_model(np.ones((1, 1)), [[1.0, 1.0, 1.0]])
    z = DocMatrix(entries=np.ones((3, 1)), class_ids=("a",))
    assert [w for w, _ in nszsl.top_words_per_class(model, vocab, z)["a"]] == ["bird", "fox", "red"]


# ============================================================================
# MAIN
# ============================================================================

def main():
    print("\n" + "=" * 70)
    print("NSZSL MODEL TESTS")
    print("=" * 70)
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        fn()
        print(f"  ✅ {name}")
    print(f"\n{len(tests)} tests passed")


if __name__ == "__main__":
    main()
