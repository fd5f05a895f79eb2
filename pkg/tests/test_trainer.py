import numpy as np
import pytest

from coreset_bench.data import generate_blobs
from coreset_bench.model import init_model
from coreset_bench.trainer import (
    RunConfig,
    evaluate_accuracy,
    evaluate_quadratic_kappa,
    run,
    run_full_baseline,
    selection_epochs,
    train_split,
)
from _oracles import confusion_kappa

BLOBS = {"kind": "blobs", "n_per_class": 40, "classes": 4, "dim": 6, "spread": 0.8, "seed": 13}


def _cfg(**kw):
    base = dict(dataset=BLOBS, epochs=10, edpe=0.4, ssi=5, method="random", seed=0)
    base.update(kw)
    return RunConfig(**base)


class TestSelectionEpochs:
    def test_basic(self):
        assert selection_epochs(30, 10) == [10, 20]

    def test_paper_counts_ratio(self):
        assert len(selection_epochs(105, 10)) == 10
        assert len(selection_epochs(105, 20)) == 5

    def test_ssi_equal_to_epochs_means_no_reselection(self):
        assert selection_epochs(30, 30) == []

    def test_bounds(self):
        with pytest.raises(ValueError):
            selection_epochs(10, 11)
        with pytest.raises(ValueError):
            selection_epochs(10, 0)


class TestRunConfig:
    def test_ssi_exceeding_epochs_names_field(self):
        with pytest.raises(ValueError, match="ssi"):
            _cfg(ssi=11).validate()

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            RunConfig.from_dict({"dataset": BLOBS, "epochs": 5, "edpe": 0.5,
                                 "ssi": 5, "method": "random", "bogus": 1})

    def test_missing_required_key(self):
        with pytest.raises(ValueError, match="missing"):
            RunConfig.from_dict({"dataset": BLOBS})

    def test_bad_method_named(self):
        with pytest.raises(ValueError, match="method"):
            _cfg(method="magic").validate()


class TestRun:
    def test_history_length_matches_selection_epochs(self):
        for method in ("random", "craig"):
            res = run(_cfg(method=method))
            assert len(res.coreset_history) == 1 + len(selection_epochs(10, 5))

    def test_ssi_equals_epochs_single_random_coreset(self):
        res = run(_cfg(method="craig", ssi=10))
        assert len(res.coreset_history) == 1
        assert res.coreset_history[0].method == "random"

    def test_time_identity_exact(self):
        res = run(_cfg(method="craig"))
        assert res.total_time_s == res.training_time_s + res.selection_time_s

    def test_deterministic_metrics(self):
        a = run(_cfg(method="gradmatch"))
        b = run(_cfg(method="gradmatch"))
        assert a.accuracy_per_epoch == b.accuracy_per_epoch
        for ca, cb in zip(a.coreset_history, b.coreset_history):
            assert np.array_equal(ca.indices, cb.indices)
            assert np.array_equal(ca.weights, cb.weights)

    def test_edpe_is_final_coreset_fraction(self):
        from coreset_bench.trainer import resolve_dataset

        cfg = _cfg(method="random", edpe=0.3)
        res = run(cfg)
        train = train_split(cfg, resolve_dataset(cfg)).train
        assert abs(res.edpe - res.coreset_history[-1].size / train.n) < 1e-12

    def test_full_edpe_random_equals_baseline_bitwise(self):
        cfg = _cfg(method="random", edpe=1.0)
        a = run(cfg)
        b = run_full_baseline(cfg)
        assert a.accuracy_per_epoch == b.accuracy_per_epoch
        assert a.final_accuracy == b.final_accuracy

    def test_random_reselection_changes_nothing_at_full_budget(self):
        a = run(_cfg(method="random", edpe=1.0, ssi=2))
        b = run(_cfg(method="random", edpe=1.0, ssi=10))
        assert a.accuracy_per_epoch == b.accuracy_per_epoch

    def test_selection_time_negligible_for_random_full_data(self):
        res = run(_cfg(method="random", edpe=1.0))
        assert res.selection_time_s < 0.01  # ~instant in absolute terms

    def test_selector_invocations_halve_when_ssi_doubles(self):
        r10 = run(_cfg(epochs=30, ssi=10, method="random"))
        r20 = run(_cfg(epochs=30, ssi=20, method="random"))
        assert len(r10.coreset_history) - 1 == 2 * (len(r20.coreset_history) - 1)

    def test_glister_requires_validation(self):
        with pytest.raises(ValueError, match="val_fraction"):
            run(_cfg(method="glister", val_fraction=0.0))

    def test_adaptive_on_composite(self):
        cfg = RunConfig(
            dataset={"kind": "composite-sum", "n": 800, "seed": 2},
            epochs=4, edpe=0.2, ssi=2, method="random",
            budget_policy="adaptive", seed=1,
        )
        res = run(cfg)
        assert len(res.coreset_history) == 2

    def test_ordinal_flag_produces_kappa(self):
        res = run(_cfg(ordinal=True))
        assert res.final_kappa is not None
        assert -1.0 <= res.final_kappa <= 1.0

    def test_mlp_end_to_end(self):
        kw = dict(model_kind="mlp", hidden=16, method="craig", epochs=40,
                  ssi=10, base_lr=0.2)
        res = run(_cfg(**kw))
        ref = run(_cfg(**kw))
        assert res.accuracy_per_epoch == ref.accuracy_per_epoch
        assert res.final_accuracy > 0.6  # learns the blobs well past 1/4 chance

    def test_full_gradient_mode_end_to_end(self):
        res = run(_cfg(method="gradmatch", grad_mode="full"))
        assert len(res.coreset_history) == 2


class TestEvaluateAccuracy:
    def test_perfect_model(self):
        from coreset_bench.data import Dataset
        from coreset_bench.model import Model

        # one-hot features with W = 10*I predict every label correctly
        feats = np.eye(3)[[0, 1, 2, 1, 0]]
        ds = Dataset(features=feats, labels=np.array([0, 1, 2, 1, 0]), class_count=3)
        params = np.concatenate([(10.0 * np.eye(3)).ravel(), np.zeros(3)])
        model = Model("logistic", params, 3, 0, 3)
        assert evaluate_accuracy(model, ds) == 1.0

    def test_zero_parameter_model_on_balanced_data(self):
        ds = generate_blobs(50, 4, 3, 1.0, seed=7)
        model = init_model("logistic", 3, 4, seed=0, scale=0.0)
        # all-zero logits predict class 0 everywhere; balanced data -> 1/C
        assert evaluate_accuracy(model, ds) == pytest.approx(0.25, abs=1e-12)

    def test_single_sample_is_zero_or_one(self):
        ds = generate_blobs(1, 2, 3, 1.0, seed=8)
        model = init_model("logistic", 3, 2, seed=1, scale=0.5)
        acc = evaluate_accuracy(model, ds.subset([0]))
        assert acc in (0.0, 1.0)


class TestQuadraticKappa:
    def test_identity_predictions_give_one(self):
        labels = np.array([0, 1, 2, 2, 1, 0, 2])
        assert evaluate_quadratic_kappa(labels, labels, 3) == pytest.approx(1.0, abs=1e-15)

    def test_three_class_example_matches_oracle(self):
        labels = np.array([0, 1, 2])
        preds = np.array([0, 2, 1])
        got = evaluate_quadratic_kappa(preds, labels, 3)
        want = confusion_kappa(labels, preds, 3)
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(0.5, abs=1e-12)  # hand-checked: 1 - 0.5/1.0

    def test_independent_predictions_near_zero(self):
        rng = np.random.default_rng(0)
        n = 200_00
        labels = rng.integers(0, 4, n)
        preds = rng.integers(0, 4, n)
        kappa = evaluate_quadratic_kappa(preds, labels, 4)
        assert abs(kappa) < 0.02

    def test_degenerate_single_class_warns_and_returns_zero(self):
        with pytest.warns(UserWarning, match="degenerate"):
            out = evaluate_quadratic_kappa(np.zeros(5, int), np.zeros(5, int), 3)
        assert out == 0.0

    def test_range_validation(self):
        with pytest.raises(ValueError):
            evaluate_quadratic_kappa(np.array([0, 3]), np.array([0, 1]), 3)
