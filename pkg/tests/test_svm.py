"""RBF-SVM tests: kernel, standardizer, SMO solver, one-vs-one ensemble."""

import numpy as np
import pytest

from emovox.errors import TrainingError
from emovox.svm import (
    STD_FLOOR,
    BinarySvm,
    MulticlassSvm,
    Standardizer,
    _kernel_matrix,
    decision_scores,
    dual_objective,
    fit_standardizer,
    predict,
    rbf_kernel,
    train_binary_smo,
    train_multiclass,
)


def random_binary_problem(seed, n=10, dim=3):
    r = np.random.default_rng(seed)
    x = r.standard_normal((n, dim))
    y = np.where(r.random(n) < 0.5, -1.0, 1.0)
    if np.all(y == y[0]):
        y[0] = -y[0]
    return x, y


def blobs(rng, centers, n_per, sigma=0.5):
    xs, labels = [], []
    for name, center in centers.items():
        xs.append(np.asarray(center) + rng.standard_normal((n_per, len(center))) * sigma)
        labels += [name] * n_per
    return np.vstack(xs), labels


def _project_box_hyperplane(v, y, c):
    """Exact Euclidean projection onto {0 <= a <= c, y·a = 0}."""
    bps = np.unique(np.concatenate([y * v, y * v - y * c]))
    svals = np.sum(y[None, :] * np.clip(v[None, :] - bps[:, None] * y[None, :], 0.0, c), axis=1)
    below = np.flatnonzero(svals <= 0.0)
    if below.size == 0:
        nu = bps[-1]
    elif below[0] == 0:
        nu = bps[0]
    else:
        k = below[0]
        sa, sb = svals[k - 1], svals[k]
        nu = bps[k - 1] if sa == sb else bps[k - 1] + (bps[k] - bps[k - 1]) * sa / (sa - sb)
    return np.clip(v - nu * y, 0.0, c)


def projected_gradient_dual(kmat, y, c, iters=10_000):
    """Slow reference solver for the SVM dual, independent of the SMO path."""
    q = kmat * np.outer(y, y)
    alpha = np.zeros(len(y))
    step = 1.0 / (np.linalg.norm(q, 2) + 1e-12)
    for _ in range(iters):
        alpha = _project_box_hyperplane(alpha - step * (q @ alpha - 1.0), y, c)
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def kkt_worst_violation(model, x, y):
    f = model.decision_values(x)
    worst = 0.0
    for ai, yi, fi in zip(model.alphas, y, f):
        margin = yi * fi
        if ai <= 1e-10 * model.c:
            worst = max(worst, 1.0 - margin)
        elif ai >= model.c * (1.0 - 1e-10):
            worst = max(worst, margin - 1.0)
        else:
            worst = max(worst, abs(margin - 1.0))
    return worst


# ---------------------------------------------------------------------------
# kernel and standardizer
# ---------------------------------------------------------------------------


def test_rbf_self_similarity(rng):
    for _ in range(5):
        x = rng.standard_normal(6)
        assert rbf_kernel(x, x, 2.0) == 1.0


def test_rbf_hand_value():
    assert rbf_kernel([0.0, 0.0], [1.0, 1.0], 0.5) == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_rbf_decreases_with_gamma():
    vals = [rbf_kernel([0.0], [1.5], g) for g in (0.1, 1.0, 10.0, 100.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-9


def test_rbf_validation():
    with pytest.raises(ValueError):
        rbf_kernel([1.0, 2.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        rbf_kernel([1.0], [2.0], 0.0)


def test_kernel_matrix_matches_scalar(rng):
    a = rng.standard_normal((4, 3))
    b = rng.standard_normal((5, 3))
    k = _kernel_matrix(a, b, 0.7)
    for i in range(4):
        for j in range(5):
            assert k[i, j] == pytest.approx(rbf_kernel(a[i], b[j], 0.7), abs=1e-12)


def test_standardizer_training_stats(rng):
    x = rng.standard_normal((40, 5)) * 3.0 + 7.0
    scaler = fit_standardizer(x)
    z = scaler.transform(x)
    assert np.all(np.abs(z.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(z.std(axis=0) - 1.0) < 1e-6)


def test_standardizer_floors_constant_dim(rng):
    x = rng.standard_normal((30, 3))
    x[:, 1] = 4.25
    scaler = fit_standardizer(x)
    assert scaler.std[1] == STD_FLOOR
    assert np.all(scaler.transform(x)[:, 1] == 0.0)


def test_standardizer_ignores_test_rows(rng):
    train = rng.standard_normal((30, 4))
    test = rng.standard_normal((10, 4))
    before = fit_standardizer(train)
    test[:] = 1e9  # corrupting held-out data must not touch fitted parameters
    after = fit_standardizer(train)
    assert np.array_equal(before.mean, after.mean)
    assert np.array_equal(before.std, after.std)
    assert np.array_equal(after.mean, train.mean(axis=0))


def test_standardizer_dim_mismatch(rng):
    scaler = fit_standardizer(rng.standard_normal((10, 4)))
    with pytest.raises(ValueError):
        scaler.transform(rng.standard_normal((3, 5)))


# ---------------------------------------------------------------------------
# binary SMO
# ---------------------------------------------------------------------------


def test_smo_two_point_symmetry():
    model = train_binary_smo(np.array([[-1.0], [1.0]]), [-1.0, 1.0], 1e3, 0.5)
    assert model.bias == pytest.approx(0.0, abs=1e-9)
    assert model.decision_values([[0.0]])[0] == pytest.approx(0.0, abs=1e-9)
    assert model.decision_values([[-0.5]])[0] < 0.0


def test_smo_xor_separates():
    x = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    model = train_binary_smo(x, y, 10.0, 1.0)
    assert model.converged
    assert np.array_equal(np.sign(model.decision_values(x)), y)


def test_smo_single_class_error():
    with pytest.raises(TrainingError):
        train_binary_smo(np.zeros((4, 2)), [1.0, 1.0, 1.0, 1.0], 1.0, 1.0)


def test_smo_label_validation():
    with pytest.raises(TrainingError):
        train_binary_smo(np.zeros((3, 2)), [0.0, 1.0, 1.0], 1.0, 1.0)
    with pytest.raises(TrainingError):
        train_binary_smo(np.zeros((3, 2)), [1.0, -1.0, 1.0], -1.0, 1.0)


def test_smo_alpha_box_and_balance():
    for seed in range(5):
        x, y = random_binary_problem(seed)
        model = train_binary_smo(x, y, 5.0, 1.0)
        assert np.all(model.alphas >= -1e-12)
        assert np.all(model.alphas <= 5.0 + 1e-12)
        assert abs(float(np.sum(model.alphas * y))) < 1e-6


def test_smo_kkt_at_tolerance():
    x = np.array([[1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    assert kkt_worst_violation(train_binary_smo(x, y, 10.0, 1.0), x, y) <= 1e-3 + 1e-7
    for seed in range(5):
        x, y = random_binary_problem(seed, n=14)
        model = train_binary_smo(x, y, 3.0, 0.8)
        assert kkt_worst_violation(model, x, y) <= 1e-3 + 1e-7


def test_smo_dual_matches_projected_gradient():
    for seed in range(5):
        x, y = random_binary_problem(seed)
        r = np.random.default_rng(seed)
        c = float(r.choice([1.0, 10.0]))
        gamma = float(r.choice([0.5, 2.0]))
        model = train_binary_smo(x, y, c, gamma, tol=1e-8, max_passes=100_000)
        oracle = projected_gradient_dual(_kernel_matrix(x, x, gamma), y, c)
        assert abs(dual_objective(model) - oracle) < 1e-4


def test_smo_convergence_flag():
    rng = np.random.default_rng(3)
    x, labels = blobs(rng, {"a": (0.0, 0.0), "b": (1.0, 1.0)}, 20, sigma=1.0)
    y = np.where(np.array(labels) == "a", 1.0, -1.0)
    short = train_binary_smo(x, y, 10.0, 1.0, max_passes=1)
    assert not short.converged
    full = train_binary_smo(x, y, 10.0, 1.0)
    assert full.converged


def test_free_support_vectors_sit_on_margin():
    rng = np.random.default_rng(4)
    x, labels = blobs(rng, {"a": (0.0, 0.0), "b": (4.0, 0.0)}, 25)
    y = np.where(np.array(labels) == "a", 1.0, -1.0)
    model = train_binary_smo(x, y, 10.0, 0.5)
    f = model.decision_values(x)
    free = (model.alphas > 1e-8) & (model.alphas < model.c - 1e-8)
    assert free.any()
    assert np.all(np.abs(y[free] * f[free] - 1.0) < 1e-2)


def test_decision_crosses_zero_once():
    rng = np.random.default_rng(5)
    x, labels = blobs(rng, {"a": (0.0, 0.0), "b": (5.0, 0.0)}, 25)
    y = np.where(np.array(labels) == "a", 1.0, -1.0)
    model = train_binary_smo(x, y, 10.0, 0.3)
    ts = np.linspace(-1.0, 6.0, 400)
    f = model.decision_values(np.column_stack([ts, np.zeros_like(ts)]))
    assert np.count_nonzero(np.diff(np.sign(f))) == 1


def test_sample_c_bounds_respected():
    x, y = random_binary_problem(7, n=12)
    sample_c = np.where(y > 0, 2.0, 0.5)
    model = train_binary_smo(x, y, 1.0, 1.0, sample_c=sample_c)
    assert np.all(model.alphas <= sample_c + 1e-12)


# ---------------------------------------------------------------------------
# one-vs-one multi-class
# ---------------------------------------------------------------------------


def test_multiclass_three_blobs(rng):
    x, labels = blobs(rng, {"a": (0.0, 0.0), "b": (10.0, 0.0), "c": (0.0, 10.0)}, 30)
    model = train_multiclass(x, labels, 10.0, 1.0)
    got = predict(model, x)
    accuracy = np.mean([g == t for g, t in zip(got, labels)])
    assert accuracy >= 0.99


def test_multiclass_machine_count(rng):
    x, labels = blobs(
        rng, {"a": (0, 0), "b": (8, 0), "c": (0, 8), "d": (8, 8)}, 10
    )
    model = train_multiclass(x, labels, 1.0, 0.5)
    assert len(model.machines) == 6
    assert model.classes == ("a", "b", "c", "d")


def test_multiclass_two_class_reduces_to_binary(rng):
    x, labels = blobs(rng, {"neg": (0.0, 0.0), "pos": (3.0, 3.0)}, 15)
    model = train_multiclass(x, labels, 5.0, 0.7)
    scaler = fit_standardizer(x)
    y = np.where(np.array(labels) == "neg", 1.0, -1.0)
    binary = train_binary_smo(scaler.transform(x), y, 5.0, 0.7)
    from_pairs = predict(model, x)
    from_binary = ["neg" if f > 0 else "pos" for f in binary.decision_values(scaler.transform(x))]
    assert from_pairs == from_binary


def test_multiclass_small_class_error(rng):
    x = rng.standard_normal((5, 2))
    with pytest.raises(TrainingError, match="rare"):
        train_multiclass(x, ["a", "a", "b", "b", "rare"], 1.0, 1.0)


def test_multiclass_single_class_error(rng):
    with pytest.raises(TrainingError):
        train_multiclass(rng.standard_normal((4, 2)), ["a"] * 4, 1.0, 1.0)


def test_prediction_reorder_invariance(rng):
    x, labels = blobs(rng, {"a": (0.0, 0.0), "b": (4.0, 0.0), "c": (0.0, 4.0)}, 12)
    labels = np.array(labels, dtype=object)
    perm = rng.permutation(len(labels))
    model1 = train_multiclass(x, list(labels), 5.0, 0.5, tol=1e-9)
    model2 = train_multiclass(x[perm], list(labels[perm]), 5.0, 0.5, tol=1e-9)
    probe = rng.standard_normal((20, 2)) * 3.0
    _, m1 = decision_scores(model1, probe)
    _, m2 = decision_scores(model2, probe)
    assert np.allclose(m1, m2, atol=1e-6)
    assert predict(model1, probe) == predict(model2, probe)


def _constant_machine(bias, dim=2):
    return BinarySvm(
        support_vectors=np.zeros((0, dim)),
        dual_coef=np.zeros(0),
        bias=float(bias),
        c=1.0,
        gamma=1.0,
        alphas=np.zeros(0),
    )


def test_tie_breaks_margin_then_lexicographic():
    scaler = Standardizer(np.zeros(2), np.ones(2))
    # one vote each -> margins all zero -> lexicographic winner "a"
    even = MulticlassSvm(
        ("a", "b", "c"),
        {("a", "b"): _constant_machine(1.0),
         ("a", "c"): _constant_machine(-1.0),
         ("b", "c"): _constant_machine(1.0)},
        scaler, 1.0, 1.0,
    )
    assert predict(even, np.zeros((1, 2))) == ["a"]
    # votes tie between a and c, but c accumulates the larger summed margin
    skew = MulticlassSvm(
        ("a", "b", "c"),
        {("a", "b"): _constant_machine(1.0),
         ("a", "c"): _constant_machine(-5.0),
         ("b", "c"): _constant_machine(1.0)},
        scaler, 1.0, 1.0,
    )
    votes, margins = decision_scores(skew, np.zeros((1, 2)))
    assert votes[0].tolist() == [1.0, 1.0, 1.0]
    assert predict(skew, np.zeros((1, 2))) == ["c"]


def test_decision_scores_dim_mismatch(rng):
    x, labels = blobs(rng, {"a": (0.0, 0.0), "b": (4.0, 0.0)}, 10)
    model = train_multiclass(x, labels, 1.0, 1.0)
    with pytest.raises(ValueError):
        predict(model, rng.standard_normal((2, 3)))
