import numpy as np
import pytest

from biomm import svm
from biomm.errors import ClassError, DimensionError, DomainError, FoldError
from biomm.ingest import LabeledDataset
from conftest import dual_objective, kkt_worst_violation

LINEAR = svm.KernelSpec("linear")
RBF2 = svm.KernelSpec("rbf", 2.0)


def make_ds(features, labels):
    c = max(labels) + 1
    return LabeledDataset(
        np.asarray(features, dtype=np.float64),
        labels,
        tuple(f"c{i}" for i in range(c)),
    )


def gaussian_clusters(rng, classes=5, per_class=10, dim=3, gap=40.0, spread=1.0):
    features, labels = [], []
    for c in range(classes):
        mu = rng.standard_normal(dim) * gap
        for _ in range(per_class):
            features.append(mu + rng.standard_normal(dim) * spread)
            labels.append(c)
    return make_ds(np.column_stack(features), labels)


class TestKernels:
    def test_rbf_self_similarity(self):
        rng = np.random.RandomState(0)
        for _ in range(5):
            x = rng.standard_normal(4)
            gamma = rng.uniform(0.1, 10.0)
            assert svm.kernel_eval(svm.KernelSpec("rbf", gamma), x, x) == 1.0

    def test_linear_dot(self):
        assert svm.kernel_eval(LINEAR, [1.0, 2.0], [3.0, 4.0]) == 11.0

    def test_rbf_gamma2_unit_gap(self):
        got = svm.kernel_eval(RBF2, np.array([0.0]), np.array([1.0]))
        assert abs(got - 0.1353352832366127) < 1e-12

    def test_symmetry(self):
        rng = np.random.RandomState(1)
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        for spec in (LINEAR, RBF2):
            assert svm.kernel_eval(spec, x, y) == svm.kernel_eval(spec, y, x)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            svm.kernel_eval(LINEAR, [1.0], [1.0, 2.0])

    def test_bad_gamma(self):
        with pytest.raises(DomainError):
            svm.KernelSpec("rbf", -1.0)

    def test_matrix_matches_eval(self):
        rng = np.random.RandomState(2)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((3, 5))
        for spec in (LINEAR, RBF2):
            k = svm.kernel_matrix(spec, a, b)
            for i in range(4):
                for j in range(5):
                    assert abs(k[i, j] - svm.kernel_eval(spec, a[:, i], b[:, j])) < 1e-12


def grid_oracle_two_point():
    """Dense search over the feasible segment of the 2-point dual."""
    # x = -1 (y=-1), x = +1 (y=+1), linear kernel: K = [[1,-1],[-1,1]]
    k11 = k22 = 1.0
    k12 = -1.0
    best_t, best_obj = 0.0, -np.inf
    for t in np.arange(0.0, 100.0 + 1e-9, 1e-3):
        # a1 = a2 = t from the equality constraint; quadratic term:
        obj = 2 * t - 0.5 * (
            t * t * k11 + t * t * k22 - 2 * t * t * k12 * 1.0
        )
        if obj > best_obj:
            best_obj, best_t = obj, t
        if t > 2.0:  # objective is concave; no need to walk the whole box
            break
    return best_t, best_obj


class TestTrainBinary:
    def test_two_point_analytic_vs_grid(self):
        x = np.array([[-1.0, 1.0]])
        y = np.array([-1.0, 1.0])
        m = svm.train_binary(x, y, LINEAR, c=100.0)
        best_t, best_obj = grid_oracle_two_point()
        assert abs(best_t - 0.5) <= 1e-3
        np.testing.assert_allclose(np.abs(m.dual_coefs), [0.5, 0.5], atol=1e-3)
        assert abs(m.bias) <= 1e-3
        assert abs(dual_objective(m) - best_obj) <= 1e-3
        score, sign = svm.predict_binary(m, np.array([0.25]))
        assert abs(score - 0.25) <= 1e-3
        assert sign == 1

    def test_xor_rbf(self):
        x = np.array([[1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0]])
        y = np.array([-1.0, 1.0, 1.0, -1.0])
        m = svm.train_binary(x, y, RBF2, c=10.0)
        for i in range(4):
            assert svm.predict_binary(m, x[:, i])[1] == y[i]

    def test_contradictory_duplicates(self):
        x = np.array([[0.0, 0.0]])
        y = np.array([1.0, -1.0])
        m = svm.train_binary(x, y, LINEAR, c=1.0)
        np.testing.assert_allclose(np.abs(m.dual_coefs), [1.0, 1.0], atol=1e-9)
        correct = sum(svm.predict_binary(m, x[:, i])[1] == y[i] for i in range(2))
        assert correct <= 1

    def test_dual_feasibility(self):
        rng = np.random.RandomState(3)
        for _ in range(10):
            n = rng.randint(4, 16)
            x = rng.standard_normal((3, n))
            y = np.sign(rng.standard_normal(n))
            y[y == 0] = 1.0
            if np.all(y == y[0]):
                y[0] = -y[0]
            c = rng.choice([0.5, 1.0, 10.0])
            m = svm.train_binary(x, y, RBF2, c=c)
            assert np.all(np.abs(m.dual_coefs) <= c + 1e-9)
            assert np.all(np.abs(m.dual_coefs) > 1e-12)  # pruned
            assert abs(m.dual_coefs.sum()) <= 1e-6

    def test_kkt_certificate_random(self):
        rng = np.random.RandomState(4)
        for trial in range(10):
            n = 14
            x = rng.standard_normal((2, n))
            y = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
            if np.all(y == y[0]):
                y[0] = -y[0]
            m = svm.train_binary(x, y, RBF2, c=10.0, tol=1e-3)
            assert kkt_worst_violation(m, x, y) <= 1e-3

    def test_separable_margin_constraints(self):
        # spec constraints (i)-(iii): y_i (w.x_i + b) >= 1 for separable data
        rng = np.random.RandomState(5)
        x = rng.standard_normal((2, 20))
        x[0, :10] += 8.0
        y = np.array([1.0] * 10 + [-1.0] * 10)
        tol = 1e-3
        m = svm.train_binary(x, y, LINEAR, c=1e4, tol=tol)
        for i in range(20):
            score, _ = svm.predict_binary(m, x[:, i])
            assert y[i] * score >= 1.0 - 10 * tol

    def test_margin_sv_score_is_unit(self):
        rng = np.random.RandomState(6)
        x = rng.standard_normal((3, 24))
        x[0, :12] += 3.0
        y = np.array([1.0] * 12 + [-1.0] * 12)
        tol = 1e-3
        m = svm.train_binary(x, y, RBF2, c=10.0, tol=tol)
        interior = np.abs(m.dual_coefs) < 10.0 - 1e-9
        assert interior.any()
        for idx in np.flatnonzero(interior):
            score, _ = svm.predict_binary(m, m.support_vectors[:, idx])
            assert abs(abs(score) - 1.0) <= 10 * tol

    def test_four_point_grid_objective(self):
        x = np.array([[0.0, 0.3, 2.0, 2.5], [0.0, 1.0, 0.5, 1.5]])
        y = np.array([1.0, 1.0, -1.0, -1.0])
        c = 1.0
        m = svm.train_binary(x, y, LINEAR, c=c, tol=1e-4)
        k = svm.kernel_matrix(LINEAR, x, x)
        q = np.outer(y, y) * k
        step = 0.01
        grid = np.arange(0.0, c + 1e-12, step)
        a1, a2, a3 = np.meshgrid(grid, grid, grid, indexing="ij")
        a4 = a1 + a2 - a3
        feasible = (a4 >= 0.0) & (a4 <= c)
        stacked = np.stack(
            [a1[feasible], a2[feasible], a3[feasible], a4[feasible]]
        )
        obj = stacked.sum(axis=0) - 0.5 * np.einsum(
            "in,ij,jn->n", stacked, q, stacked
        )
        assert abs(dual_objective(m) - obj.max()) <= 1e-3

    def test_single_class_rejected(self):
        with pytest.raises(ClassError):
            svm.train_binary(np.ones((2, 3)), np.ones(3), LINEAR, c=1.0)

    def test_monotone_capacity(self):
        rng = np.random.RandomState(7)
        x = rng.standard_normal((2, 16))
        x[0, :8] += 2.5
        y = np.array([1.0] * 8 + [-1.0] * 8)

        def train_acc(c):
            m = svm.train_binary(x, y, LINEAR, c=c)
            return sum(svm.predict_binary(m, x[:, i])[1] == y[i] for i in range(16))

        assert train_acc(1e4) >= train_acc(1e-2)


class TestPredictBinary:
    def test_zero_score_resolves_positive(self):
        m = svm.BinarySvm(
            support_vectors=np.array([[1.0]]),
            dual_coefs=np.array([0.0]),
            bias=0.0,
            kernel=LINEAR,
            c=1.0,
        )
        assert svm.predict_binary(m, np.array([5.0]))[1] == 1

    def test_far_from_svs_score_is_bias(self):
        m = svm.BinarySvm(
            support_vectors=np.array([[0.0]]),
            dual_coefs=np.array([2.0]),
            bias=-0.75,
            kernel=svm.KernelSpec("rbf", 2.0),
            c=10.0,
        )
        score, sign = svm.predict_binary(m, np.array([100.0]))
        assert abs(score - (-0.75)) < 1e-12
        assert sign == -1

    def test_sv_reordering_invariance(self):
        rng = np.random.RandomState(8)
        sv = rng.standard_normal((2, 6))
        coef = rng.standard_normal(6)
        m1 = svm.BinarySvm(sv, coef, 0.3, RBF2, 10.0)
        perm = rng.permutation(6)
        m2 = svm.BinarySvm(sv[:, perm], coef[perm], 0.3, RBF2, 10.0)
        for _ in range(5):
            q = rng.standard_normal(2)
            s1, _ = svm.predict_binary(m1, q)
            s2, _ = svm.predict_binary(m2, q)
            assert abs(s1 - s2) < 1e-12


class TestMulticlass:
    def test_two_classes_one_machine(self):
        rng = np.random.RandomState(9)
        ds = gaussian_clusters(rng, classes=2, per_class=5)
        model = svm.train_multiclass(ds, LINEAR, c=10.0)
        assert len(model.machines) == 1
        assert model.class_pairs == ((0, 1),)

    def test_five_classes_ten_machines(self):
        rng = np.random.RandomState(10)
        ds = gaussian_clusters(rng, classes=5, per_class=4)
        model = svm.train_multiclass(ds, RBF2, c=10.0)
        assert len(model.machines) == 10

    def test_separated_clusters_perfect_training(self):
        rng = np.random.RandomState(11)
        ds = gaussian_clusters(rng, classes=5, per_class=10, gap=50.0, spread=0.5)
        model = svm.train_multiclass(ds, LINEAR, c=10.0)
        for i in range(ds.num_samples):
            label, _ = svm.predict_multiclass(model, ds.features[:, i])
            assert label == ds.labels[i]

    def test_two_class_prediction_matches_sign(self):
        rng = np.random.RandomState(12)
        ds = gaussian_clusters(rng, classes=2, per_class=6)
        model = svm.train_multiclass(ds, LINEAR, c=10.0)
        for _ in range(10):
            q = rng.standard_normal(ds.dim) * 20
            score, sign = svm.predict_binary(model.machines[0], q)
            label, votes = svm.predict_multiclass(model, q)
            assert label == (0 if sign > 0 else 1)

    def test_unanimous_vote(self):
        rng = np.random.RandomState(13)
        ds = gaussian_clusters(rng, classes=4, per_class=6, gap=30.0)
        model = svm.train_multiclass(ds, LINEAR, c=10.0)
        center = ds.features[:, ds.labels == 3].mean(axis=1)
        label, votes = svm.predict_multiclass(model, center)
        assert label == 3
        assert votes[3] == 3  # C-1 machines involve class 3

    def test_engineered_cyclic_tie(self):
        # hand-built machines force one vote per class; strengths decide
        def constant_machine(score):
            # rbf at the query's own location: k = 1, so coef + bias = score
            return svm.BinarySvm(
                support_vectors=np.zeros((1, 1)),
                dual_coefs=np.array([score]),
                bias=0.0,
                kernel=svm.KernelSpec("rbf", 1.0),
                c=10.0,
            )

        pairs = ((0, 1), (0, 2), (1, 2))
        machines = (
            constant_machine(0.5),    # (0,1): votes 0, strength 0.5
            constant_machine(-0.9),   # (0,2): votes 2, strength 0.9
            constant_machine(0.7),    # (1,2): votes 1, strength 0.7
        )
        model = svm.SvmModel(3, pairs, machines)
        label, votes = svm.predict_multiclass(model, np.zeros(1))
        assert votes.tolist() == [1, 1, 1]
        assert label == 2

        # permuting the machines must not change the verdict
        order = [2, 0, 1]
        permuted = svm.SvmModel(
            3,
            tuple(pairs[i] for i in order),
            tuple(machines[i] for i in order),
        )
        assert svm.predict_multiclass(permuted, np.zeros(1))[0] == 2


class TestCrossValidate:
    def test_ceiling_case(self):
        # every fold holds duplicates of its training points
        point = np.eye(5) * 100.0
        features = np.repeat(point, 5, axis=1)
        labels = np.repeat(np.arange(5), 5)
        ds = make_ds(features, labels.tolist())
        acc = svm.cross_validate(ds, LINEAR, c=10.0, folds=5, seed=0)
        assert acc == 100.0

    def test_shuffled_labels_near_chance(self):
        rng = np.random.RandomState(14)
        ds = gaussian_clusters(rng, classes=5, per_class=10, gap=30.0)
        accs = []
        for seed in (0, 1, 2):
            shuffled = LabeledDataset(
                ds.features,
                rng.permutation(ds.labels),
                ds.class_names,
            )
            accs.append(
                svm.cross_validate(shuffled, RBF2, c=10.0, folds=10, seed=seed)
            )
        assert 5.0 <= np.mean(accs) <= 40.0

    def test_deterministic(self):
        rng = np.random.RandomState(15)
        ds = gaussian_clusters(rng, classes=3, per_class=6)
        a = svm.cross_validate(ds, RBF2, c=10.0, folds=5, seed=42)
        b = svm.cross_validate(ds, RBF2, c=10.0, folds=5, seed=42)
        assert a == b

    def test_fold_error(self):
        rng = np.random.RandomState(16)
        ds = gaussian_clusters(rng, classes=2, per_class=3)
        with pytest.raises(FoldError):
            svm.cross_validate(ds, LINEAR, c=1.0, folds=7, seed=0)
