"""Explanation extraction: exact decomposition, faithfulness, exports."""

import numpy as np
import pytest

from sralearn.autodiff import sigmoid
from sralearn.exceptions import UnsupportedModelError
from sralearn.explain import (
    contribution_matrix,
    explain_batch,
    explain_linear,
    export_reinforced,
    from_components,
    relevance_curve,
    svg_scatter,
    write_attributions_csv,
)
from sralearn.models import LinearModel, MlpModel, SraLinearModel, init_model


def _random_sra(p=4, seed=3, scale=1.0):
    rng = np.random.default_rng(seed)
    m = SraLinearModel(p=p, d_k=4, seed=seed)
    for name in m.params:
        m.params[name] = rng.normal(scale=scale, size=m.params[name].shape)
    return m


class TestFromComponents:
    def test_hand_example(self):
        # beta=(2,-1), a=(0.5,1), x=(1,2): contributions (1,-2), logit -1
        e = from_components([2.0, -1.0], 0.0, [0.5, 1.0], [1.0, 2.0])
        np.testing.assert_array_equal(e.contributions, [1.0, -2.0])
        assert e.logit == -1.0
        assert abs(e.output - 0.26894) < 1e-4

    def test_zero_input_kills_contributions(self):
        e = from_components([2.0, -1.0], 0.3, [0.9, 0.8], [0.0, 0.0])
        np.testing.assert_array_equal(e.contributions, [0.0, 0.0])
        assert e.logit == 0.3

    def test_suppressed_features_flagged(self):
        e = from_components([1.0, 1.0, 1.0], 0.0, [0.5, 0.0, 0.2], [1.0, 5.0, 1.0])
        assert e.suppressed == [1]
        assert e.contributions[1] == 0.0

    def test_ranking_by_absolute_value_ties_lower_index(self):
        e = from_components([1.0, -1.0, 1.0], 0.0, [1.0, 1.0, 1.0], [2.0, -2.0, 1.0])
        assert e.ranked == [0, 1, 2]

    def test_zero_attention_counterfactual_is_exact(self):
        # removing feature j's attention shifts the logit by -contribution[j]
        rng = np.random.default_rng(0)
        beta = rng.normal(size=5)
        a = rng.uniform(0, 1, 5)
        x = rng.normal(size=5)
        base = from_components(beta, 0.7, a, x)
        for j in range(5):
            masked = a.copy()
            masked[j] = 0.0
            cf = from_components(beta, 0.7, masked, x)
            assert cf.logit - base.logit == pytest.approx(
                -base.contributions[j], abs=1e-12)

    def test_regression_output_is_logit(self):
        e = from_components([1.0], 0.0, [1.0], [2.5], task="regression")
        assert e.output == e.logit == 2.5


class TestExplainBatch:
    def test_decomposition_exact_on_trained_shapes(self):
        m = _random_sra()
        X = np.random.default_rng(1).normal(size=(32, 4))
        for e in explain_batch(m, X):
            assert e.check_decomposition(1e-9)

    def test_matches_model_logit(self):
        m = _random_sra(seed=9)
        X = np.random.default_rng(2).normal(size=(16, 4))
        logits = m.decision_function(X)
        for e, logit in zip(explain_batch(m, X), logits):
            assert e.logit == pytest.approx(logit, abs=1e-9)

    def test_deterministic_across_calls(self):
        m = _random_sra(seed=5)
        X = np.random.default_rng(3).normal(size=(8, 4))
        a = explain_batch(m, X)
        b = explain_batch(m, X)
        for ea, eb in zip(a, b):
            np.testing.assert_array_equal(ea.contributions, eb.contributions)

    def test_mlp_rejected(self):
        with pytest.raises(UnsupportedModelError, match="mlp"):
            explain_batch(MlpModel(p=3, seed=0), np.zeros((2, 3)))

    def test_contribution_matrix_agrees_with_explanations(self):
        m = _random_sra(seed=11)
        X = np.random.default_rng(4).normal(size=(12, 4))
        mat = contribution_matrix(m, X)
        for i, e in enumerate(explain_batch(m, X)):
            np.testing.assert_array_equal(mat[i], e.contributions)


class TestExplainLinear:
    def test_contributions_are_beta_times_x(self):
        m = LinearModel(p=2)
        m.params["beta"] = np.array([1.0, -1.0])
        exps = explain_linear(m, np.array([[3.0, 3.0]]))
        np.testing.assert_array_equal(exps[0].contributions, [3.0, -3.0])
        np.testing.assert_array_equal(exps[0].attention, [1.0, 1.0])

    def test_zero_weights_zero_contributions(self):
        m = LinearModel(p=3)
        exps = explain_linear(m, np.ones((2, 3)))
        for e in exps:
            np.testing.assert_array_equal(e.contributions, np.zeros(3))

    def test_probability_output_for_binary(self):
        m = LinearModel(p=1, task="binary")
        m.params["beta"] = np.array([2.0])
        e = explain_linear(m, np.array([[1.0]]))[0]
        assert e.output == pytest.approx(float(sigmoid(np.array([2.0]))[0]))


class TestAttributionCsv:
    def test_layout_and_rowcount(self, tmp_path):
        m = _random_sra(p=2, seed=1)
        X = np.random.default_rng(5).normal(size=(6, 2))
        path = tmp_path / "attr.csv"
        write_attributions_csv(path, explain_batch(m, X))
        lines = path.read_text().splitlines()
        assert lines[0] == ("instance_id,x1,a_x1,contrib_x1,x2,a_x2,contrib_x2,"
                            "intercept,logit,output")
        assert len(lines) == 7

    def test_values_round_trip(self, tmp_path):
        m = _random_sra(p=2, seed=2)
        X = np.random.default_rng(6).normal(size=(3, 2))
        exps = explain_batch(m, X)
        path = tmp_path / "attr.csv"
        write_attributions_csv(path, exps)
        row = path.read_text().splitlines()[1].split(",")
        assert float(row[3]) == exps[0].contributions[0]
        assert float(row[-2]) == exps[0].logit

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_attributions_csv(tmp_path / "x.csv", [])


class TestExportReinforced:
    def test_untrained_zero_model_exports_quarter_x(self, tmp_path):
        m = SraLinearModel(p=2, d_k=4, seed=0)
        for name in m.params:
            m.params[name] = np.zeros_like(m.params[name])
        X = np.random.default_rng(7).normal(size=(10, 2))
        y = np.zeros(10)
        csv_path = tmp_path / "r.csv"
        export_reinforced(m, X, y, csv_path)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "x1,x2,a1,a2,o1,o2,y,prediction"
        assert len(lines) == 11
        first = [float(v) for v in lines[1].split(",")]
        np.testing.assert_allclose(first[4:6], 0.25 * X[0], rtol=0, atol=0)

    def test_svg_pair_written_for_2d(self, tmp_path):
        m = _random_sra(p=2, seed=4)
        X = np.random.default_rng(8).normal(size=(20, 2))
        y = (X[:, 0] > 0).astype(float)
        export_reinforced(m, X, y, tmp_path / "r.csv",
                          svg_original=tmp_path / "orig.svg",
                          svg_reinforced=tmp_path / "reinf.svg")
        orig = (tmp_path / "orig.svg").read_text()
        assert orig.startswith("<svg") and orig.count("<circle") == 20
        assert (tmp_path / "reinf.svg").read_text().count("<circle") == 20

    def test_row_count_matches_input(self, tmp_path):
        m = _random_sra(p=3, seed=6)
        X = np.random.default_rng(9).normal(size=(17, 3))
        csv_path = tmp_path / "r.csv"
        export_reinforced(m, X, np.zeros(17), csv_path)
        assert len(csv_path.read_text().splitlines()) == 18

    def test_svg_handles_constant_column(self):
        pts = np.zeros((5, 2))
        text = svg_scatter(pts, np.zeros(5), "flat")
        assert "<svg" in text and text.count("<circle") == 5


class TestRelevanceCurve:
    def test_pairs_condition_on_requested_feature(self):
        m = _random_sra(p=4, seed=8)
        X = np.random.default_rng(10).normal(size=(25, 4))
        table = relevance_curve(m, X, contribution_feature=2, conditioning_feature=3)
        assert table.shape == (25, 2)
        np.testing.assert_array_equal(table[:, 0], X[:, 3])
        np.testing.assert_array_equal(table[:, 1], contribution_matrix(m, X)[:, 2])

    def test_self_conditioning_valid(self):
        m = _random_sra(p=2, seed=9)
        X = np.random.default_rng(11).normal(size=(5, 2))
        table = relevance_curve(m, X, 0, 0)
        np.testing.assert_array_equal(table[:, 0], X[:, 0])

    def test_constant_conditioning_column_tolerated(self):
        m = _random_sra(p=2, seed=10)
        X = np.random.default_rng(12).normal(size=(5, 2))
        X[:, 1] = 2.0
        table = relevance_curve(m, X, 0, 1)
        np.testing.assert_array_equal(table[:, 0], np.full(5, 2.0))

    def test_index_out_of_range(self):
        m = _random_sra(p=2, seed=11)
        with pytest.raises(IndexError):
            relevance_curve(m, np.zeros((2, 2)), 0, 5)
