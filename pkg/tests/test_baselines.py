"""Feature encoding and the six in-repo classifiers.

Numeric oracles here are computed inside the tests with plain numpy (the
first gradient steps of the linear model, exhaustive split search for the
tree root, Laplace-smoothed count tables for naive Bayes) and compared to
the implementations at tight tolerances.
"""

import dataclasses
import math

import numpy as np
import pytest

from crashkit.baselines import (
    MODEL_KINDS,
    BaselineModel,
    ModelSpec,
    display_name,
    encode_apply,
    encode_fit,
    load_model,
    predict,
    save_model,
    train,
)
from crashkit.baselines.bayes import (
    ALPHA,
    NUMERIC_BINS,
    _learn_edges,
    fit_naive_bayes,
    naive_bayes_scores,
)
from crashkit.baselines.boost import fit_adaboost, fit_forest, fit_gbdt, gbdt_scores
from crashkit.baselines.encode import EncoderState, FieldBlock
from crashkit.baselines.linear import fit_logreg, logreg_loss, logreg_scores, softmax
from crashkit.baselines.trees import (
    QUANTILE_BINS,
    build_candidates,
    fit_classification_tree,
    tree_apply,
    tree_depth,
    tree_probs,
)
from crashkit.errors import DimensionMismatch, EmptyMatrix, OutOfRange, SchemaMismatch
from crashkit.model import MISSING, Task
from test_sampler import make_record


class TestEncoder:
    def _records(self):
        r1 = make_record("E1")
        r2 = dataclasses.replace(
            r1, case_id="E2",
            general=dataclasses.replace(r1.general, milepost=3.0),
            infrastructure=dataclasses.replace(r1.infrastructure, lighting="dusk"),
        )
        r3 = dataclasses.replace(
            r1, case_id="E3",
            general=dataclasses.replace(r1.general, milepost=MISSING),
            infrastructure=dataclasses.replace(r1.infrastructure,
                                               work_zone=MISSING),
        )
        return [r1, r2, r3]

    def test_numeric_standardization(self, dictionary):
        ds = encode_fit(self._records(), dictionary, Task.INJURY)
        blk = ds.state.block("milepost")
        # Present mileposts are 1.0 and 3.0: mean 2, population std 1.
        assert blk.mean == pytest.approx(2.0, abs=1e-12)
        assert blk.std == pytest.approx(1.0, abs=1e-12)
        col = ds.X[:, blk.start]
        assert col[0] == pytest.approx(-1.0, abs=1e-9)
        assert col[1] == pytest.approx(1.0, abs=1e-9)
        assert col[2] == pytest.approx(0.0, abs=1e-12)
        assert list(ds.X[:, blk.start + 1]) == [0.0, 0.0, 1.0]

    def test_constant_numeric_uses_unit_scale(self, dictionary):
        records = [make_record(f"C{i}") for i in range(3)]
        ds = encode_fit(records, dictionary, Task.INJURY)
        blk = ds.state.block("milepost")
        assert blk.std == 1.0
        assert np.allclose(ds.X[:, blk.start], 0.0)

    def test_categorical_block_layout(self, dictionary):
        ds = encode_fit(self._records(), dictionary, Task.INJURY)
        blk = ds.state.block("lighting")
        # Sorted train categories plus a trailing missing column.
        assert blk.categories == ("daylight", "dusk")
        assert blk.width == 3
        names = ds.state.feature_names[blk.start:blk.start + blk.width]
        assert names == ("lighting=daylight", "lighting=dusk",
                         "lighting=<missing>")
        assert ds.X[0, blk.start] == 1.0 and ds.X[1, blk.start + 1] == 1.0

    def test_boolean_block_with_missing(self, dictionary):
        ds = encode_fit(self._records(), dictionary, Task.INJURY)
        blk = ds.state.block("work_zone")
        assert blk.width == 2
        assert list(ds.X[:, blk.start]) == [0.0, 0.0, 0.0]
        assert list(ds.X[:, blk.start + 1]) == [0.0, 0.0, 1.0]

    def test_multi_valued_field_sets_several_indicators(self, dictionary):
        r = make_record("M1")
        r = dataclasses.replace(r, event=dataclasses.replace(
            r.event, contributing_factors=("speeding", "inattention")))
        ds = encode_fit([r], dictionary, Task.INJURY)
        blk = ds.state.block("contributing_factors")
        row = ds.X[0, blk.start:blk.start + blk.width]
        assert row.sum() == 2.0

    def test_unseen_category_maps_to_missing_column(self, dictionary):
        records = self._records()
        ds = encode_fit(records, dictionary, Task.INJURY)
        unseen = dataclasses.replace(
            records[0], case_id="U1",
            infrastructure=dataclasses.replace(records[0].infrastructure,
                                               lighting="dark_no_street_lights"))
        applied = encode_apply([unseen], ds.state, dictionary, Task.INJURY)
        blk = ds.state.block("lighting")
        row = applied.X[0, blk.start:blk.start + blk.width]
        assert list(row) == [0.0, 0.0, 1.0]

    def test_apply_matches_fit_on_same_records(self, dictionary, corpus_small):
        records = corpus_small[:80]
        ds = encode_fit(records, dictionary, Task.SEVERITY)
        applied = encode_apply(records, ds.state, dictionary, Task.SEVERITY)
        assert np.array_equal(ds.X, applied.X)
        assert np.array_equal(ds.y, applied.y)

    def test_labels_and_class_names(self, dictionary):
        ds = encode_fit(self._records(), dictionary, Task.SEVERITY)
        assert ds.class_names == Task.SEVERITY.class_names
        # All three records carry severity code O.
        assert list(ds.y) == [0, 0, 0]
        ds_inj = encode_fit(self._records(), dictionary, Task.INJURY)
        assert list(ds_inj.y) == [0, 0, 0]

    def test_no_task_means_no_labels(self, dictionary):
        ds = encode_fit(self._records(), dictionary)
        assert ds.y is None and ds.class_names == ()

    def test_dictionary_version_pinning(self, dictionary):
        ds = encode_fit(self._records(), dictionary)
        stale = dataclasses.replace(ds.state, dictionary_version="someone-else")
        with pytest.raises(DimensionMismatch):
            encode_apply(self._records(), stale, dictionary)

    def test_empty_fit_rejected(self, dictionary):
        with pytest.raises(EmptyMatrix):
            encode_fit([], dictionary)

    def test_fit_is_deterministic(self, dictionary, corpus_small):
        a = encode_fit(corpus_small[:60], dictionary, Task.INJURY)
        b = encode_fit(corpus_small[:60], dictionary, Task.INJURY)
        assert a.state == b.state
        assert np.array_equal(a.X, b.X)


class TestLogreg:
    def _toy(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 4))
        y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.int64)
        return X, y

    def test_first_gradient_step_matches_numpy(self):
        # From zero init, one full-batch step has a closed form; replaying
        # it with plain numpy checks the gradient and the L2 placement
        # (weights only, never the bias).
        X, y = self._toy()
        n, d, k, lr, l2 = X.shape[0], X.shape[1], 2, 0.5, 1e-4
        params = fit_logreg(X, y, n_classes=k, learning_rate=lr, l2=l2, epochs=1)
        Y = np.zeros((n, k))
        Y[np.arange(n), y] = 1.0
        P0 = np.full((n, k), 1.0 / k)
        grad_w = X.T @ (P0 - Y) / n  # (d, k); l2 term is zero at W=0
        grad_b = (P0 - Y).mean(axis=0)
        assert np.allclose(np.asarray(params["weights"]), -lr * grad_w, atol=1e-12)
        assert np.allclose(np.asarray(params["bias"]), -lr * grad_b, atol=1e-12)

    def test_two_steps_match_numpy(self):
        X, y = self._toy()
        n, k, lr, l2 = X.shape[0], 2, 0.5, 1e-4
        params = fit_logreg(X, y, n_classes=k, learning_rate=lr, l2=l2, epochs=2)
        Y = np.zeros((n, k))
        Y[np.arange(n), y] = 1.0
        W = np.zeros((X.shape[1], k))
        b = np.zeros(k)
        for _ in range(2):
            P = softmax(X @ W + b)
            W = W - lr * (X.T @ (P - Y) / n + l2 * W)
            b = b - lr * (P - Y).mean(axis=0)
        assert np.allclose(np.asarray(params["weights"]), W, atol=1e-12)
        assert np.allclose(np.asarray(params["bias"]), b, atol=1e-12)

    def test_training_reduces_loss(self):
        X, y = self._toy()

        def loss(params):
            return logreg_loss(X, y, np.asarray(params["weights"]),
                               np.asarray(params["bias"]), l2=1e-4)

        early = fit_logreg(X, y, n_classes=2, epochs=1)
        late = fit_logreg(X, y, n_classes=2, epochs=300)
        assert loss(late) < loss(early)

    def test_separable_problem_is_solved(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1])
        params = fit_logreg(X, y, n_classes=2)
        pred = np.argmax(logreg_scores(params, X), axis=1)
        assert np.array_equal(pred, y)

    def test_softmax_rows_normalize(self):
        z = np.array([[1000.0, 1000.0], [-1000.0, 0.0]])
        p = softmax(z)
        assert np.allclose(p.sum(axis=1), 1.0)
        assert np.all(p >= 0)

    def test_score_width_checked(self):
        X, y = self._toy()
        params = fit_logreg(X, y, n_classes=2, epochs=1)
        with pytest.raises(DimensionMismatch):
            logreg_scores(params, X[:, :2])


def _brute_force_root(X, y, n_classes, min_samples_leaf=1):
    """Exhaustive weighted-Gini search over all candidate splits."""
    cands = build_candidates(X)
    best = None
    for idx in range(cands.feature.size):
        f, thr = int(cands.feature[idx]), float(cands.threshold[idx])
        left = X[:, f] <= thr
        nl, nr = int(left.sum()), int((~left).sum())
        if nl < min_samples_leaf or nr < min_samples_leaf:
            continue
        score = 0.0
        for side in (left, ~left):
            counts = np.bincount(y[side], minlength=n_classes).astype(float)
            total = counts.sum()
            score += total - counts @ counts / total
        if best is None or score < best[0] - 1e-12:
            best = (score, f, thr)
    return best


class TestClassificationTree:
    def test_conjunction_is_learned_at_depth_two(self):
        # y = x0 AND x1 needs two levels and has positive gain at both.
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 0, 0, 1])
        tree = fit_classification_tree(X, y, n_classes=2, max_depth=2,
                                       min_samples_leaf=1)
        assert np.array_equal(tree_apply(tree, X), y)
        assert tree_depth(tree) == 2

    def test_zero_gain_split_is_refused(self):
        # Pure XOR has zero Gini gain for every first split, so the greedy
        # grower stops at the root rather than splitting arbitrarily.
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        tree = fit_classification_tree(X, y, n_classes=2, max_depth=2,
                                       min_samples_leaf=1)
        assert tree["leaf"] is True
        assert tree["probs"] == [0.5, 0.5]

    def test_root_split_matches_exhaustive_search(self):
        rng = np.random.default_rng(11)
        X = (rng.random((80, 6)) > 0.5).astype(np.float64)
        y = rng.integers(0, 3, size=80)
        tree = fit_classification_tree(X, y, n_classes=3, max_depth=4,
                                       min_samples_leaf=1)
        _, f, thr = _brute_force_root(X, y, 3)
        assert tree["leaf"] is False
        assert tree["feature"] == f
        assert tree["threshold"] == pytest.approx(thr)

    def test_tie_prefers_lowest_feature_index(self):
        # Columns 1 and 2 are identical, column 0 is noise; the identical
        # pair ties exactly and the split must land on column 1.
        X = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0],
                      [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
        y = np.array([0, 0, 1, 1])
        tree = fit_classification_tree(X, y, n_classes=2, max_depth=1,
                                       min_samples_leaf=1)
        assert tree["feature"] == 1

    def test_pure_node_is_a_leaf(self):
        X = np.array([[0.0], [1.0], [0.5]])
        y = np.array([1, 1, 1])
        tree = fit_classification_tree(X, y, n_classes=3, max_depth=5,
                                       min_samples_leaf=1)
        assert tree["leaf"] is True
        assert tree["value"] == 1
        assert tree["probs"] == [0.0, 1.0, 0.0]

    def test_min_samples_leaf_respected(self):
        rng = np.random.default_rng(5)
        X = rng.random((200, 4))
        y = rng.integers(0, 2, size=200)
        tree = fit_classification_tree(X, y, n_classes=2, max_depth=8,
                                       min_samples_leaf=17)

        def check(node, rows):
            if node["leaf"]:
                assert rows.shape[0] >= 17
                return
            left = rows[X[rows, node["feature"]] <= node["threshold"]]
            right = rows[X[rows, node["feature"]] > node["threshold"]]
            check(node["left"], left)
            check(node["right"], right)

        check(tree, np.arange(200))

    def test_quantile_candidate_budget(self):
        X = np.linspace(0.0, 1.0, 500).reshape(-1, 1)
        cands = build_candidates(X)
        assert cands.feature.size <= QUANTILE_BINS - 1
        assert np.all(cands.threshold < X.max())

    def test_binary_column_gets_midpoint_cut(self):
        X = np.array([[0.0], [1.0], [0.0]])
        cands = build_candidates(X)
        assert list(cands.threshold) == [0.5]

    def test_constant_column_gets_no_candidates(self):
        X = np.ones((10, 1))
        cands = build_candidates(X)
        assert cands.feature.size == 0

    def test_tree_probs_are_distributions(self):
        rng = np.random.default_rng(9)
        X = rng.random((100, 3))
        y = rng.integers(0, 4, size=100)
        tree = fit_classification_tree(X, y, n_classes=4, max_depth=5,
                                       min_samples_leaf=5)
        probs = tree_probs(tree, X, 4)
        assert np.allclose(probs.sum(axis=1), 1.0)

    def test_tree_is_json_serializable(self):
        import json

        X = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
        y = np.array([0, 1, 1, 0])
        tree = fit_classification_tree(X, y, n_classes=2, max_depth=3,
                                       min_samples_leaf=1)
        assert json.loads(json.dumps(tree)) == tree


class TestNaiveBayes:
    def _state(self):
        blocks = (FieldBlock("color", "categorical", 0, 3, ("blue", "red"),
                             0.0, 1.0),)
        return EncoderState("v", blocks, ("color=blue", "color=red",
                                          "color=<missing>"))

    def test_hand_computed_posteriors(self):
        # Train: class 0 sees red twice; class 1 sees red once, blue once.
        # With Laplace alpha=1 over 3 categories:
        #   P(red|0) = (2+1)/(2+3) = 3/5, P(red|1) = (1+1)/(2+3) = 2/5
        #   priors     (2+1)/(4+2) = 1/2 each
        state = self._state()
        red = [0.0, 1.0, 0.0]
        blue = [1.0, 0.0, 0.0]
        X = np.array([red, red, red, blue])
        y = np.array([0, 0, 1, 1])
        params = fit_naive_bayes(X, y, n_classes=2, state=state)
        scores = naive_bayes_scores(params, np.array([red]), state)
        assert scores[0, 0] == pytest.approx(math.log(0.5) + math.log(3 / 5), abs=1e-12)
        assert scores[0, 1] == pytest.approx(math.log(0.5) + math.log(2 / 5), abs=1e-12)

    def test_missing_category_is_its_own_value(self):
        state = self._state()
        X = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        y = np.array([0, 1])
        params = fit_naive_bayes(X, y, n_classes=2, state=state)
        scores = naive_bayes_scores(params, np.array([[0.0, 0.0, 1.0]]), state)
        # Missing was seen only under class 1: (1+1)/(1+3) vs (0+1)/(1+3).
        diff = scores[0, 1] - scores[0, 0]
        assert diff == pytest.approx(math.log(2.0), abs=1e-12)

    def test_equal_width_edges(self):
        blocks = (FieldBlock("speed", "numeric", 0, 2, (), 0.0, 1.0),)
        state = EncoderState("v", blocks, ("speed", "speed=<missing>"))
        X = np.array([[0.0, 0.0], [4.0, 0.0], [8.0, 0.0], [0.0, 1.0]])
        edges = _learn_edges(X, state)
        assert edges["speed"] == pytest.approx([2.0, 4.0, 6.0])

    def test_numeric_binning_counts(self):
        blocks = (FieldBlock("speed", "numeric", 0, 2, (), 0.0, 1.0),)
        state = EncoderState("v", blocks, ("speed", "speed=<missing>"))
        X = np.array([[0.0, 0.0], [8.0, 0.0]])
        y = np.array([0, 1])
        params = fit_naive_bayes(X, y, n_classes=2, state=state)
        table = np.asarray(params["log_cond"][0])
        assert table.shape == (2, NUMERIC_BINS + 1)
        # Class 0 saw bin 0 once: (1+1)/(1+5); every other bin (0+1)/(1+5).
        assert table[0, 0] == pytest.approx(math.log(2 / 6), abs=1e-12)
        assert table[0, 3] == pytest.approx(math.log(1 / 6), abs=1e-12)

    def test_alpha_constant_is_laplace(self):
        assert ALPHA == 1.0


class TestForest:
    def _data(self, dictionary, corpus_small, task=Task.INJURY):
        return encode_fit(corpus_small[:200], dictionary, task)

    def test_single_unbagged_full_feature_forest_equals_tree(
            self, dictionary, corpus_small):
        ds = self._data(dictionary, corpus_small)
        holdout = encode_apply(corpus_small[200:300], ds.state, dictionary,
                               Task.INJURY)
        tree_model = train(ModelSpec("tree", Task.INJURY, seed=3), ds)
        forest_model = train(
            ModelSpec("forest", Task.INJURY, seed=3, hyperparams={
                "n_estimators": 1, "bootstrap": False, "feature_fraction": 1.0,
            }), ds)
        assert predict(tree_model, holdout.X) == predict(forest_model, holdout.X)

    def test_same_seed_reproduces_predictions(self, dictionary, corpus_small):
        ds = self._data(dictionary, corpus_small)
        a = train(ModelSpec("forest", Task.INJURY, seed=7), ds)
        b = train(ModelSpec("forest", Task.INJURY, seed=7), ds)
        assert predict(a, ds.X) == predict(b, ds.X)

    def test_seed_changes_the_ensemble(self, dictionary, corpus_small):
        ds = self._data(dictionary, corpus_small)
        a = train(ModelSpec("forest", Task.INJURY, seed=1), ds)
        b = train(ModelSpec("forest", Task.INJURY, seed=2), ds)
        sa = a.predict_scores(ds.X) if hasattr(a, "predict_scores") else None
        from crashkit.baselines.api import predict_scores

        assert not np.array_equal(predict_scores(a, ds.X),
                                  predict_scores(b, ds.X))


class TestAdaBoost:
    def test_first_alpha_matches_samme_formula(self):
        # One binary feature that mislabels exactly one of four points:
        # err = 1/4, so alpha = ln(3) + ln(K-1) with K=2.
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 0])
        params = fit_adaboost(X, y, n_classes=2, n_estimators=1, seed=0)
        assert params["alphas"][0] == pytest.approx(math.log(3.0), abs=1e-12)

    def test_perfect_stump_short_circuits(self):
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 1])
        params = fit_adaboost(X, y, n_classes=2, n_estimators=40, seed=0)
        assert len(params["trees"]) == 1
        assert params["alphas"][0] == pytest.approx(math.log(1e12), rel=1e-9)

    def test_zero_rounds_fall_back_to_single_stump(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0, 1])
        params = fit_adaboost(X, y, n_classes=2, n_estimators=0, seed=0)
        assert len(params["trees"]) == 1
        assert params["alphas"] == [1.0]

    def test_chance_level_learner_stops_boosting_early(self):
        # A constant feature admits no split, so every stump is a majority
        # leaf hovering at the SAMME chance boundary; the loop must stop
        # well before the requested round count.
        X = np.ones((6, 1))
        y = np.array([0, 0, 1, 1, 2, 2])
        params = fit_adaboost(X, y, n_classes=3, n_estimators=40, seed=0)
        assert len(params["trees"]) < 40

    def test_reweighting_follows_the_samme_recurrence(self):
        # Four points, one binary feature, one inconsistent point. Round 1:
        # majority leaves err on the single y=1 point (err 1/4, alpha ln 3).
        # Its weight triples, so round 2 errs only on the x=1, y=0 point
        # (weight 1/6, alpha ln 5) and the ensemble flips the x=1 column.
        X = np.array([[0.0], [0.0], [1.0], [1.0]])
        y = np.array([0, 0, 1, 0])
        params = fit_adaboost(X, y, n_classes=2, n_estimators=2, seed=0)
        assert params["alphas"] == pytest.approx([math.log(3.0), math.log(5.0)],
                                                 abs=1e-12)
        from crashkit.baselines.boost import adaboost_scores

        pred = np.argmax(adaboost_scores(params, X), axis=1)
        assert list(pred) == [0, 0, 1, 1]


class TestGbdt:
    def test_more_rounds_fit_the_training_set_better(self, dictionary,
                                                     corpus_small):
        ds = encode_fit(corpus_small[:250], dictionary, Task.ACCIDENT_TYPE)
        short = fit_gbdt(ds.X, ds.y, n_classes=len(ds.class_names),
                         n_estimators=1, max_depth=3, learning_rate=0.3)
        long = fit_gbdt(ds.X, ds.y, n_classes=len(ds.class_names),
                        n_estimators=20, max_depth=3, learning_rate=0.3)
        acc_short = float(np.mean(np.argmax(gbdt_scores(short, ds.X), 1) == ds.y))
        acc_long = float(np.mean(np.argmax(gbdt_scores(long, ds.X), 1) == ds.y))
        assert acc_long > acc_short

    def test_deterministic(self, dictionary, corpus_small):
        ds = encode_fit(corpus_small[:150], dictionary, Task.SEVERITY)
        a = fit_gbdt(ds.X, ds.y, n_classes=5, n_estimators=5, max_depth=3,
                     learning_rate=0.3)
        b = fit_gbdt(ds.X, ds.y, n_classes=5, n_estimators=5, max_depth=3,
                     learning_rate=0.3)
        assert np.array_equal(gbdt_scores(a, ds.X), gbdt_scores(b, ds.X))


class TestModelApi:
    def test_model_kinds_frozen(self):
        assert MODEL_KINDS == ("logreg", "tree", "forest", "adaboost",
                               "naive_bayes", "gbdt")

    def test_stand_in_display_names(self):
        assert display_name("naive_bayes") == "naive_bayes (Bayesian Network stand-in)"
        assert display_name("gbdt") == "gbdt (CatBoost stand-in)"
        assert display_name("tree") == "tree"

    def test_unknown_kind_rejected(self):
        with pytest.raises(OutOfRange):
            ModelSpec("svm", Task.INJURY)

    def test_unknown_hyperparam_rejected(self):
        with pytest.raises(OutOfRange):
            ModelSpec("tree", Task.INJURY, hyperparams={"depth": 3})

    def test_hyperparams_merge_with_defaults(self):
        spec = ModelSpec("forest", Task.INJURY, hyperparams={"n_estimators": 3})
        resolved = spec.resolved_hyperparams()
        assert resolved["n_estimators"] == 3
        assert resolved["max_depth"] == 10

    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_train_predict_save_load_cycle(self, kind, tmp_path, dictionary,
                                           corpus_small):
        ds = encode_fit(corpus_small[:150], dictionary, Task.INJURY)
        holdout = encode_apply(corpus_small[150:220], ds.state, dictionary,
                               Task.INJURY)
        spec = ModelSpec(kind, Task.INJURY, seed=5)
        model = train(spec, ds)
        labels = predict(model, holdout.X)
        assert len(labels) == 70
        assert set(labels) <= set(Task.INJURY.class_names)
        path = tmp_path / f"{kind}.json"
        save_model(model, path)
        again = load_model(path)
        assert predict(again, holdout.X) == labels
        assert again.spec.kind == kind

    def test_single_class_training_degenerates_to_constant(self, dictionary,
                                                           corpus_small):
        records = [r for r in corpus_small
                   if r.labels.injured_count == 0][:40]
        ds = encode_fit(records, dictionary, Task.INJURY)
        model = train(ModelSpec("logreg", Task.INJURY), ds)
        assert model.degenerate
        labels = predict(model, ds.X)
        assert set(labels) == {"ZERO"}

    def test_predict_checks_width(self, dictionary, corpus_small):
        ds = encode_fit(corpus_small[:100], dictionary, Task.INJURY)
        model = train(ModelSpec("tree", Task.INJURY), ds)
        with pytest.raises(DimensionMismatch):
            predict(model, ds.X[:, :-3])

    def test_saved_format_version_checked(self, tmp_path, dictionary,
                                          corpus_small):
        import json

        ds = encode_fit(corpus_small[:100], dictionary, Task.INJURY)
        model = train(ModelSpec("tree", Task.INJURY), ds)
        path = tmp_path / "model.json"
        save_model(model, path)
        blob = json.loads(path.read_text())
        assert blob["format_version"] == 1
        blob["format_version"] = 999
        path.write_text(json.dumps(blob))
        with pytest.raises(SchemaMismatch):
            load_model(path)

    def test_saved_file_is_stable(self, tmp_path, dictionary, corpus_small):
        ds = encode_fit(corpus_small[:100], dictionary, Task.INJURY)
        model = train(ModelSpec("gbdt", Task.INJURY, seed=2), ds)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_model(model, p1)
        save_model(model, p2)
        assert p1.read_bytes() == p2.read_bytes()
