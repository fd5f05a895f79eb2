import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import coreset_bench.kernels as kernels
from coreset_bench.data import Dataset, combination_count, generate_blobs
from coreset_bench.model import GradientMatrix, init_model, loss_and_grad, per_sample_gradients
from coreset_bench.selectors import (
    BudgetSpec,
    Coreset,
    GlisterConfig,
    allocate_budgets,
    craig_objective,
    omp_select,
    select_craig,
    select_glister,
    select_gradmatch,
    select_random,
)
from _oracles import (
    exhaustive_facility_location,
    facility_location_value,
    ridge_least_squares,
)


def _single_class_grads(rows):
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.zeros(rows.shape[0], dtype=np.int64)
    return GradientMatrix(rows=rows, mode="last_layer"), labels


def _budget(k):
    return BudgetSpec(total=k, per_class={0: k})


class TestAllocateBudgets:
    def _ds(self, pops):
        labels = np.concatenate([np.full(p, c) for c, p in enumerate(pops)])
        feats = np.zeros((labels.size, 2))
        return Dataset(features=feats, labels=labels, class_count=len(pops))

    def test_uniform_ten_classes(self):
        ds = self._ds([100] * 10)
        spec = allocate_budgets(ds, 0.1, "uniform")
        assert spec.total == 100
        assert all(spec.per_class[c] == 10 for c in range(10))

    def test_adaptive_proportional_example(self):
        ds = self._ds([50, 50])
        spec = allocate_budgets(ds, 8 / 100, "adaptive", scores=[1.0, 3.0])
        assert spec.total == 8
        assert spec.per_class == {0: 2, 1: 6}

    def test_adaptive_orders_by_combination_count(self):
        # class 0 has far fewer digit combinations than a mid-sum class
        pops = [60] * 28
        ds = self._ds(pops)
        scores = [combination_count(c, 3, 5) for c in range(28)]
        spec = allocate_budgets(ds, 0.05, "adaptive", scores=scores)
        assert spec.per_class[0] < spec.per_class[14]

    def test_cap_and_redistribute(self):
        ds = self._ds([1, 100, 100])
        spec = allocate_budgets(ds, 30 / 201, "uniform")
        assert spec.per_class[0] == 1  # capped at population
        assert sum(spec.per_class.values()) == spec.total

    def test_adaptive_floor_of_one(self):
        ds = self._ds([50, 50, 50])
        spec = allocate_budgets(ds, 9 / 150, "adaptive", scores=[0.0, 0.0, 1.0])
        assert spec.per_class[0] >= 1 and spec.per_class[1] >= 1
        assert sum(spec.per_class.values()) == 9

    def test_infeasible_budget(self):
        ds = self._ds([10] * 10)
        with pytest.raises(ValueError, match="infeasible"):
            allocate_budgets(ds, 0.05, "uniform")  # 5 slots for 10 classes

    def test_adaptive_requires_scores(self):
        ds = self._ds([10, 10])
        with pytest.raises(ValueError, match="scores"):
            allocate_budgets(ds, 0.5, "adaptive")

    @given(seed=st.integers(min_value=0, max_value=2**32 - 1),
           edpe=st.floats(min_value=0.05, max_value=1.0),
           classes=st.integers(min_value=2, max_value=8))
    @settings(max_examples=40, deadline=None)
    def test_sum_and_caps_always_hold(self, seed, edpe, classes):
        rng = np.random.default_rng(seed)
        pops = rng.integers(1, 40, classes)
        ds = self._ds(pops.tolist())
        total = int(np.floor(edpe * ds.n + 0.5))
        if total < classes:
            return
        scores = rng.uniform(0.1, 10.0, classes)
        for policy, sc in (("uniform", None), ("adaptive", scores)):
            spec = allocate_budgets(ds, edpe, policy, sc)
            assert sum(spec.per_class.values()) == spec.total == total
            assert all(spec.per_class[c] <= pops[c] for c in range(classes))
            if policy == "adaptive":
                assert all(spec.per_class[c] >= 1 for c in range(classes))


class TestSelectRandom:
    def test_full_budget_is_identity(self):
        ds = generate_blobs(5, 3, 2, 1.0, seed=0)
        spec = BudgetSpec(total=15, per_class={0: 5, 1: 5, 2: 5})
        cs = select_random(ds, spec, seed=9)
        assert np.array_equal(np.sort(cs.indices), np.arange(15))
        assert np.all(cs.weights == 1.0)

    def test_deterministic(self):
        ds = generate_blobs(20, 3, 2, 1.0, seed=0)
        spec = allocate_budgets(ds, 0.3, "uniform")
        a = select_random(ds, spec, seed=77)
        b = select_random(ds, spec, seed=77)
        assert np.array_equal(a.indices, b.indices)

    def test_respects_per_class_budgets(self):
        ds = generate_blobs(10, 4, 2, 1.0, seed=1)
        spec = BudgetSpec(total=10, per_class={0: 1, 1: 2, 2: 3, 3: 4})
        cs = select_random(ds, spec, seed=5)
        got = np.bincount(ds.labels[cs.indices], minlength=4)
        assert got.tolist() == [1, 2, 3, 4]

    def test_inclusion_frequency_binomial(self):
        # fixed seed set; every sample's inclusion rate within 3 sigma
        ds = generate_blobs(10, 2, 2, 1.0, seed=3)
        spec = BudgetSpec(total=10, per_class={0: 5, 1: 5})
        n_draws = 400
        counts = np.zeros(ds.n)
        for s in range(n_draws):
            counts[select_random(ds, spec, seed=s).indices] += 1
        p = 0.5
        sigma = np.sqrt(p * (1 - p) / n_draws)
        freq = counts / n_draws
        assert np.all(np.abs(freq - p) <= 3 * sigma)

    def test_infeasible_budget(self):
        ds = generate_blobs(3, 2, 2, 1.0, seed=0)
        with pytest.raises(ValueError, match="exceeds population"):
            select_random(ds, BudgetSpec(total=8, per_class={0: 4, 1: 4}), seed=0)


class TestSelectCraig:
    def test_three_point_medoid_example(self):
        # 1-D gradients {0, 0.1, 5}, budget 1: brute force over the three
        # singleton medoids picks the middle sample with weight 3
        rows = np.array([[0.0], [0.1], [5.0]])
        grads, labels = _single_class_grads(rows)
        cs = select_craig(grads, _budget(1), labels)
        dist = kernels.pairwise_distances(rows)
        sim = dist.max() + 1e-12 - dist
        brute_best = max(range(3), key=lambda j: facility_location_value(sim, [j]))
        assert brute_best == 1
        assert cs.indices.tolist() == [1]
        assert cs.weights.tolist() == [3.0]

    def test_full_budget_selects_everything_with_unit_weights(self):
        rng = np.random.default_rng(8)
        rows = rng.standard_normal((6, 3))
        grads, labels = _single_class_grads(rows)
        cs = select_craig(grads, _budget(6), labels)
        assert np.array_equal(cs.indices, np.arange(6))
        assert np.all(cs.weights == 1.0)

    def test_weights_are_positive_integers_summing_to_population(self):
        rng = np.random.default_rng(1)
        rows = rng.standard_normal((40, 4))
        labels = rng.integers(0, 3, 40)
        grads = GradientMatrix(rows=rows, mode="last_layer")
        pops = np.bincount(labels, minlength=3)
        spec = BudgetSpec(total=9, per_class={0: 3, 1: 3, 2: 3})
        cs = select_craig(grads, spec, labels)
        assert np.all(cs.weights == np.round(cs.weights))
        assert np.all(cs.weights > 0)
        for c in range(3):
            mask = labels[cs.indices] == c
            assert cs.weights[mask].sum() == pops[c]

    def test_greedy_objective_non_decreasing(self):
        rng = np.random.default_rng(5)
        rows = rng.standard_normal((15, 3))
        dist = kernels.pairwise_distances(rows)
        sim = dist.max() + 1e-12 - dist
        _, trace = kernels.facility_location_greedy(sim, 10)
        assert np.all(np.diff(trace) >= -1e-12)

    def test_greedy_approximation_guarantee(self):
        rng = np.random.default_rng(99)
        for _ in range(10):
            n = int(rng.integers(5, 13))
            k = int(rng.integers(1, min(4, n) + 1))
            rows = rng.standard_normal((n, 2))
            dist = kernels.pairwise_distances(rows)
            sim = dist.max() + 1e-12 - dist
            sel, _ = kernels.facility_location_greedy(sim, k)
            greedy_val = craig_objective(sim, sel)
            best = exhaustive_facility_location(sim, k)
            assert greedy_val >= (1 - 1 / np.e) * best - 1e-12

    def test_duplicate_rows_drop_zero_weight_medoids(self):
        # 3 identical gradients + 1 outlier, budget 3: greedy is forced to
        # take a duplicate whose assignment count is zero; it is dropped and
        # the weights still sum to the class population
        rows = np.array([[0.0], [0.0], [0.0], [5.0]])
        grads, labels = _single_class_grads(rows)
        cs = select_craig(grads, _budget(3), labels)
        assert cs.size == 2
        assert sorted(cs.indices.tolist()) == [0, 3]
        assert cs.weights.sum() == 4
        assert np.all(cs.weights > 0)

    def test_empty_class_with_positive_budget(self):
        rows = np.ones((3, 2))
        labels = np.zeros(3, dtype=np.int64)
        grads = GradientMatrix(rows=rows, mode="last_layer")
        spec = BudgetSpec(total=4, per_class={0: 3, 1: 1})
        with pytest.raises(ValueError, match="no samples"):
            select_craig(grads, spec, labels)


class TestOmpAndGradmatch:
    def test_orthogonal_pair_exact_recovery(self):
        rows = np.array([[1.0, 0.0], [0.0, 1.0]])
        grads, labels = _single_class_grads(rows)
        cs = select_gradmatch(grads, _budget(2), labels, lam=0.0, tol=1e-12)
        assert np.array_equal(cs.indices, [0, 1])
        assert np.allclose(cs.weights, [1.0, 1.0], atol=1e-12)

    def test_single_dominant_atom(self):
        # target = 3 * g0 with the other atoms orthogonal to it
        rows = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, 1.0, 1.0]])
        support, weights, res = omp_select(rows, np.array([3.0, 0.0, 0.0]), 1, lam=0.0)
        assert support.tolist() == [0]
        assert weights[0] == pytest.approx(3.0, abs=1e-12)
        assert res[-1] <= 1e-12

    def test_residual_monotone_lam_zero(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            m, p = int(rng.integers(4, 11)), int(rng.integers(3, 9))
            rows = rng.standard_normal((m, p))
            target = rows.sum(axis=0)
            _, _, res = omp_select(rows, target, int(rng.integers(1, m + 1)), lam=0.0, tol=1e-9)
            assert np.all(np.diff(res) <= 1e-12)

    def test_six_atom_instance_matches_dense_oracle(self):
        rng = np.random.default_rng(23)
        rows = rng.standard_normal((6, 5))
        target = rows.sum(axis=0)
        for lam in (0.0, 0.5):
            support, weights, res = omp_select(rows, target, 4, lam=lam, tol=1e-9)
            assert np.all(np.diff(res) <= 1e-9)
            pos = weights > 0
            oracle = ridge_least_squares(rows[support[pos]], target, lam)
            assert np.allclose(weights[pos], oracle, atol=1e-9)

    def test_selector_output_pruned_and_positive(self):
        rng = np.random.default_rng(31)
        rows = rng.standard_normal((30, 6))
        labels = rng.integers(0, 2, 30)
        grads = GradientMatrix(rows=rows, mode="last_layer")
        spec = BudgetSpec(total=10, per_class={0: 5, 1: 5})
        cs = select_gradmatch(grads, spec, labels, lam=0.5)
        assert np.all(cs.weights > 0)
        assert len(np.unique(cs.indices)) == cs.size
        for c in range(2):
            assert (labels[cs.indices] == c).sum() <= 5  # never over budget

    def test_weights_solve_support_normal_equations(self):
        rng = np.random.default_rng(37)
        rows = rng.standard_normal((12, 4))
        labels = np.zeros(12, dtype=np.int64)
        grads = GradientMatrix(rows=rows, mode="last_layer")
        lam = 0.5
        cs = select_gradmatch(grads, _budget(5), labels, lam=lam)
        target = rows.sum(axis=0)
        oracle = ridge_least_squares(rows[cs.indices], target, lam)
        assert np.allclose(cs.weights, oracle, atol=1e-9)


class TestSelectGlister:
    def _setup(self, seed, n_cand=8, n_val=10, d=4, c=3):
        rng = np.random.default_rng(seed)
        model = init_model("logistic", d, c, seed=seed, scale=0.5)
        xc = rng.standard_normal((n_cand, d))
        yc = np.zeros(n_cand, dtype=np.int64)
        val = Dataset(
            features=rng.standard_normal((n_val, d)),
            labels=rng.integers(0, c, n_val),
            class_count=c,
        )

        def provider(mdl, members):
            return per_sample_gradients(mdl, xc[members], yc[members], "last_layer").rows

        return model, xc, yc, val, provider

    def test_full_budget_selects_all(self):
        model, xc, yc, val, provider = self._setup(3)
        cs = select_glister(provider, model, val, _budget(len(yc)), yc, GlisterConfig(0.1))
        assert np.array_equal(cs.indices, np.arange(len(yc)))
        assert np.all(cs.weights == 1.0)

    def test_aligned_gradient_picked_first(self):
        # one candidate's gradient equals the validation gradient; the rest
        # are orthogonal to it, so it must win the first argmax
        model, xc, yc, val, provider = self._setup(5)
        tail = model.last_layer_slice()
        _, vg = loss_and_grad(model, val.features, val.labels, np.ones(val.n))
        v = vg[tail]
        rows = np.zeros((4, v.size))
        rows[2] = v
        basis = np.linalg.svd(np.vstack([v]))[2][1:4]
        rows[0], rows[1], rows[3] = basis[0], basis[1], basis[2]
        labels = np.zeros(4, dtype=np.int64)
        cs = select_glister(
            lambda m, members: rows[members], model, val, _budget(1), labels,
            GlisterConfig(0.05),
        )
        assert cs.indices.tolist() == [2]

    def test_first_pick_invariant_to_eta_scale(self):
        model, xc, yc, val, provider = self._setup(7)
        a = select_glister(provider, model, val, _budget(1), yc, GlisterConfig(1e-4))
        b = select_glister(provider, model, val, _budget(1), yc, GlisterConfig(10.0))
        assert np.array_equal(a.indices, b.indices)

    def test_first_pick_matches_exact_one_step_oracle(self):
        eta = 1e-3
        for seed in range(10):
            model, xc, yc, val, provider = self._setup(seed + 40)
            cs = select_glister(provider, model, val, _budget(1), yc, GlisterConfig(eta))
            pick = int(cs.indices[0])
            tail = model.last_layer_slice()
            rows = per_sample_gradients(model, xc, yc, "last_layer").rows
            exact = []
            for i in range(len(yc)):
                m2 = model.copy()
                m2.params[tail] -= eta * rows[i]
                exact.append(loss_and_grad(m2, val.features, val.labels, np.ones(val.n))[0])
            exact = np.asarray(exact)
            margin = val.class_count * eta ** 2
            assert exact[pick] <= exact.min() + margin

    def test_requires_validation_set(self):
        model, xc, yc, val, provider = self._setup(1)
        with pytest.raises(ValueError, match="validation"):
            select_glister(provider, model, None, _budget(2), yc, GlisterConfig(0.1))


class TestCoresetInvariants:
    def test_distinct_indices_enforced(self):
        with pytest.raises(ValueError, match="distinct"):
            Coreset(indices=np.array([1, 1]), weights=np.array([1.0, 1.0]))

    def test_positive_weights_enforced(self):
        with pytest.raises(ValueError, match="positive"):
            Coreset(indices=np.array([0, 1]), weights=np.array([1.0, 0.0]))

    def test_budget_spec_sum_checked(self):
        with pytest.raises(ValueError, match="sum"):
            BudgetSpec(total=5, per_class={0: 2, 1: 2})

    def test_all_selectors_deterministic_and_within_budget(self):
        ds = generate_blobs(30, 3, 6, 1.0, seed=2)
        model = init_model("logistic", 6, 3, seed=4, scale=0.2)
        grads = per_sample_gradients(model, ds.features, ds.labels, "last_layer")
        spec = allocate_budgets(ds, 0.2, "uniform")
        val = generate_blobs(5, 3, 6, 1.0, seed=3)

        def provider(m, members):
            return per_sample_gradients(
                m, ds.features[members], ds.labels[members], "last_layer"
            ).rows

        results = {}
        for name, make in {
            "random": lambda: select_random(ds, spec, seed=11),
            "craig": lambda: select_craig(grads, spec, ds.labels),
            "gradmatch": lambda: select_gradmatch(grads, spec, ds.labels),
            "glister": lambda: select_glister(
                provider, model, val, spec, ds.labels, GlisterConfig(0.05)
            ),
        }.items():
            a, b = make(), make()
            assert np.array_equal(a.indices, b.indices), name
            assert np.array_equal(a.weights, b.weights), name
            assert len(np.unique(a.indices)) == a.size
            assert a.indices.min() >= 0 and a.indices.max() < ds.n
            per_class = np.bincount(ds.labels[a.indices], minlength=3)
            for c in range(3):
                limit = spec.per_class[c]
                if name == "gradmatch":
                    assert per_class[c] <= limit
                else:
                    assert per_class[c] == limit
            results[name] = a
        assert results["random"].size == spec.total
