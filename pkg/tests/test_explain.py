import numpy as np
import pytest

from cet import (
    Neighbor,
    UnknownNameError,
    build_graph,
    build_vocab,
    explain,
    neighbor_profile,
)
from cet.explain import AGGREGATION_LABEL, explanation_tsv, format_explanation, source_label
from cet.scoring import ParameterSet, score_all_neighbors
from synth import assembled, tiny_corpus


def random_params(vocab, k=4, seed=0):
    rng = np.random.default_rng(seed)
    return ParameterSet(
        entity_emb=rng.normal(size=(vocab.num_entities, k)),
        relation_emb=rng.normal(size=(vocab.num_relations, k)),
        type_emb=rng.normal(size=(vocab.num_types, k)),
        W=rng.normal(size=(vocab.num_types, k)),
        b=rng.normal(size=vocab.num_types),
    )


@pytest.fixture(scope="module")
def setup():
    vocab, dataset, graph, *_ = assembled(tiny_corpus())
    return vocab, graph, random_params(vocab)


class TestExplain:
    def test_single_neighbor_yields_two_rows(self):
        triples = [("solo", "r", "other")]
        train = [("solo", "t0"), ("other", "t0")]
        vocab = build_vocab(triples, train)
        graph = build_graph(vocab, triples, [], include_type_edges=False)
        params = random_params(vocab)
        result = explain(params, graph, vocab, "solo", "t0", alpha=0.5, top_k=10)
        assert len(result.rows) == 2  # the neighbor plus the aggregation row
        labels = {row.source for row in result.rows}
        assert AGGREGATION_LABEL in labels

    def test_rows_sorted_descending_and_clamped(self, setup):
        vocab, graph, params = setup
        result = explain(params, graph, vocab, "a", "t1", alpha=0.5, top_k=99)
        scores = [row.score for row in result.rows]
        assert scores == sorted(scores, reverse=True)
        assert len(result.rows) == graph.degree(vocab.entity_ids["a"]) + 1

    def test_top_k_truncates(self, setup):
        vocab, graph, params = setup
        result = explain(params, graph, vocab, "a", "t1", alpha=0.5, top_k=1)
        assert len(result.rows) == 1

    def test_weights_sum_to_one_over_all_rows(self, setup):
        vocab, graph, params = setup
        result = explain(params, graph, vocab, "a", "t2", alpha=0.5, top_k=10**6)
        assert sum(row.weight for row in result.rows) == pytest.approx(1.0, abs=1e-6)

    def test_pooling_identity_and_eval_consistency(self, setup):
        # The weighted sum of the reported rows reproduces the pooled score,
        # which is the same number evaluation ranks with.
        vocab, graph, params = setup
        result = explain(params, graph, vocab, "a", "t1", alpha=0.5, top_k=10**6)
        weighted = sum(row.weight * row.score for row in result.rows)
        assert weighted == pytest.approx(result.pooled_score, rel=1e-6)
        bundle = score_all_neighbors(params, graph, vocab.entity_ids["a"], 0.5)
        assert result.pooled_score == pytest.approx(
            float(bundle.pooled[vocab.type_ids["t1"]]), abs=1e-6
        )

    def test_unknown_names_rejected(self, setup):
        vocab, graph, params = setup
        with pytest.raises(UnknownNameError, match="nobody"):
            explain(params, graph, vocab, "nobody", "t1", alpha=0.5)
        with pytest.raises(UnknownNameError, match="t99"):
            explain(params, graph, vocab, "a", "t99", alpha=0.5)

    def test_source_labels(self, setup):
        vocab, graph, params = setup
        r = vocab.relation_ids["r"]
        b = vocab.entity_ids["b"]
        t1 = vocab.type_ids["t1"]
        assert source_label(vocab, Neighbor(r, False, b)) == "(r, b)"
        assert source_label(vocab, Neighbor(r, True, b)) == "(inverse of r, b)"
        assert (
            source_label(vocab, Neighbor(0, False, t1, target_is_type=True))
            == "(has_type, t1)"
        )


class TestNeighborProfile:
    def test_bias_dominance(self, setup):
        vocab, graph, params = setup
        flat = params.copy()
        flat.W[:] = 0.0
        flat.b[:] = 0.0
        flat.b[vocab.type_ids["t2"]] = 5.0
        for entity in ("a", "b", "c"):
            for nb in graph.neighbors(vocab.entity_ids[entity]):
                top = neighbor_profile(flat, vocab, nb, top_k=1)
                assert top[0][0] == "t2"

    def test_zero_top_k(self, setup):
        vocab, graph, params = setup
        nb = graph.neighbors(vocab.entity_ids["a"])[0]
        assert neighbor_profile(params, vocab, nb, top_k=0) == []

    def test_scores_descending(self, setup):
        vocab, graph, params = setup
        nb = graph.neighbors(vocab.entity_ids["a"])[0]
        profile = neighbor_profile(params, vocab, nb, top_k=10)
        values = [score for _, score in profile]
        assert values == sorted(values, reverse=True)


class TestRendering:
    def test_format_contains_rows_and_header(self, setup):
        vocab, graph, params = setup
        result = explain(params, graph, vocab, "a", "t1", alpha=0.5, top_k=3)
        text = format_explanation(result)
        assert text.startswith("entity\ta\n")
        assert "rank\tsource\tscore\tweight" in text
        assert text.count("\n") >= 5

    def test_tsv_row_per_source(self, setup):
        vocab, graph, params = setup
        result = explain(params, graph, vocab, "a", "t1", alpha=0.5, top_k=2)
        tsv = explanation_tsv(result)
        lines = tsv.strip().split("\n")
        assert len(lines) == 2
        assert lines[0].startswith("1\t")
