import numpy as np
import pytest
from scipy.stats import ortho_group

from repground import cca, evalsuite, synth
from repground.errors import AlignmentError, DegenerateInputError, ValidationError
from repground.repstore import RepresentationSet, StsGold, StsRecord

from oracles import cosine_similarity, recall_from_ranks, sorted_retrieval_ranks, textbook_pearson, textbook_spearman

RNN_MMT = {
    "bleu": [36.9, 35.7, 34.6, 37.6],
    "sts": [0.536, 0.429, 0.487, 0.553],
}
# textbook formula on the four rows above, evaluated on the exact decimals
RNN_MMT_PEARSON = 0.7036392500638064


class TestRecallAtK:
    def test_self_retrieval(self):
        X = np.random.default_rng(0).standard_normal((20, 4))
        report = evalsuite.recall_at_k(X, X, np.arange(20), [1])
        assert report.recalls == (100.0,)

    def test_full_cutoff(self):
        rng = np.random.default_rng(1)
        report = evalsuite.recall_at_k(rng.standard_normal((15, 3)), rng.standard_normal((12, 3)),
                                       rng.integers(0, 12, 15), [12])
        assert report.recalls == (100.0,)

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            Q, C = rng.standard_normal((2, 100, 16))
            C = C + 0.8 * Q
            gold = rng.permutation(100)
            C = C[np.argsort(gold)]  # candidate gold[i] belongs to query i
            ranks = sorted_retrieval_ranks(Q, C, gold)
            report = evalsuite.recall_at_k(Q, C, gold, [1, 5, 10])
            assert report.recalls == tuple(recall_from_ranks(ranks, k) for k in (1, 5, 10))

    def test_ties_broken_by_index(self):
        Q = np.array([[1.0, 0.0]])
        C = np.array([[2.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
        assert evalsuite.gold_ranks(Q, C, [1]).tolist() == [1]
        assert evalsuite.gold_ranks(Q, C, [0]).tolist() == [0]

    def test_monotone_in_k(self):
        rng = np.random.default_rng(3)
        report = evalsuite.recall_at_k(rng.standard_normal((50, 5)), rng.standard_normal((50, 5)),
                                       np.arange(50), range(1, 51))
        assert all(a <= b for a, b in zip(report.recalls, report.recalls[1:]))

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(4)
        Q, C = rng.standard_normal((2, 60, 6))
        C = C + Q
        R = ortho_group.rvs(6, random_state=5)
        a = evalsuite.recall_at_k(Q, C, np.arange(60), [1, 5, 10])
        b = evalsuite.recall_at_k(Q @ R, C @ R, np.arange(60), [1, 5, 10])
        assert a.recalls == b.recalls

    def test_cutoff_too_large(self):
        with pytest.raises(ValidationError):
            evalsuite.recall_at_k(np.ones((3, 2)), np.ones((3, 2)), [0, 1, 2], [4])

    def test_zero_norm(self):
        with pytest.raises(DegenerateInputError):
            evalsuite.recall_at_k(np.zeros((2, 2)), np.ones((2, 2)), [0, 1], [1])


class TestImageRetrieval:
    def test_noise_free_recovers_pairs(self):
        train, test = synth.planted_retrieval(synth.SynthSpec(n=1000, dim_left=32, dim_right=16, seed=0))
        report = evalsuite.image_retrieval_eval(train, test)
        assert report.recall(1) == 100.0
        assert report.cca_k == 16 and report.n_queries == 100

    def test_snr_ladder(self):
        recalls = []
        for snr in (8, 4, 2, 1, 0.5):
            train, test = synth.planted_retrieval(synth.SynthSpec(n=1000, dim_left=32, dim_right=16, seed=7, snr=snr))
            recalls.append(evalsuite.image_retrieval_eval(train, test).recall(10))
        assert all(a >= b for a, b in zip(recalls, recalls[1:]))
        assert recalls[0] > recalls[-1]

    def test_fit_ignores_test_split(self):
        train, test = synth.planted_retrieval(synth.SynthSpec(n=500, dim_left=8, dim_right=6, seed=1, snr=2))
        first = evalsuite.image_retrieval_eval(train, test).model.to_bytes()
        rng = np.random.default_rng(0)
        noisy = test.rows(range(test.n))
        noisy = type(test)(noisy.left, RepresentationSet("r", noisy.right.ids,
                                                         noisy.right.vectors + rng.standard_normal(noisy.right.vectors.shape)))
        assert evalsuite.image_retrieval_eval(train, noisy).model.to_bytes() == first

    def test_directions_and_weighting(self):
        train, test = synth.planted_retrieval(synth.SynthSpec(n=1000, dim_left=16, dim_right=8, seed=2, snr=1))
        for direction in evalsuite.DIRECTIONS:
            for weighted in (True, False):
                r = evalsuite.image_retrieval_eval(train, test, direction=direction, weighted=weighted)
                assert r.direction == direction and r.weighted == weighted
                assert all(0 <= v <= 100 for v in r.recalls)

    def test_unknown_direction(self):
        train, test = synth.planted_retrieval(synth.SynthSpec(n=200, seed=2))
        with pytest.raises(ValidationError):
            evalsuite.image_retrieval_eval(train, test, direction="sideways")


def sts_fixture(seed=0, n=30, d=8):
    rng = np.random.default_rng(seed)
    ids = [f"s{i}" for i in range(2 * n)]
    reps = RepresentationSet("reps", ids, rng.standard_normal((2 * n, d)))
    records = [StsRecord(ids[2 * i], ids[2 * i + 1], float(rng.uniform(0, 5))) for i in range(n)]
    return reps, StsGold(tuple(records))


class TestSts:
    def test_perfect_and_reversed(self):
        reps, gold = sts_fixture()
        index = reps.index()
        sims = [cosine_similarity(reps.vectors[index[r.id_a]], reps.vectors[index[r.id_b]]) for r in gold.records]
        agree = StsGold(tuple(StsRecord(r.id_a, r.id_b, s) for r, s in zip(gold.records, sims)))
        reverse = StsGold(tuple(StsRecord(r.id_a, r.id_b, -s) for r, s in zip(gold.records, sims)))
        assert evalsuite.sts_eval(reps, agree).spearman == pytest.approx(1.0, abs=1e-15)
        assert evalsuite.sts_eval(reps, reverse).spearman == pytest.approx(-1.0, abs=1e-15)

    def test_matches_hand_composition(self):
        reps, gold = sts_fixture(seed=3)
        index = reps.index()
        sims = [cosine_similarity(reps.vectors[index[r.id_a]], reps.vectors[index[r.id_b]]) for r in gold.records]
        expected = textbook_spearman(sims, [r.score for r in gold.records])
        report = evalsuite.sts_eval(reps, gold)
        assert report.spearman == pytest.approx(expected, abs=1e-12)
        assert report.n_pairs == 30 and report.mode == "raw"

    def test_rescaling_invariance(self):
        reps, gold = sts_fixture(seed=4)
        scales = np.random.default_rng(9).uniform(0.1, 10, reps.n)[:, None]
        scaled = RepresentationSet("x", reps.ids, reps.vectors * scales)
        assert evalsuite.sts_eval(scaled, gold).spearman == pytest.approx(evalsuite.sts_eval(reps, gold).spearman,
                                                                           abs=1e-12)

    def test_projected_mode(self):
        reps, gold = sts_fixture(seed=5, d=6)
        data = synth.gaussian_cca_pair(synth.SynthSpec(n=500, dim_left=6, dim_right=4, seed=1, rho=(0.9, 0.5)))
        model = cca.fit(data)
        projected = evalsuite.sts_eval(reps, gold, "cca_projected", model)
        a = cca.project_left(model, reps.select([r.id_a for r in gold.records]).vectors)
        b = cca.project_left(model, reps.select([r.id_b for r in gold.records]).vectors)
        sims = [cosine_similarity(p, q) for p, q in zip(a, b)]
        assert projected.spearman == pytest.approx(textbook_spearman(sims, gold.scores), abs=1e-12)
        assert projected.mode == "cca_projected"

    def test_projected_needs_model(self):
        reps, gold = sts_fixture()
        with pytest.raises(ValidationError):
            evalsuite.sts_eval(reps, gold, "cca_projected")

    def test_missing_id(self):
        reps, gold = sts_fixture()
        bad = StsGold(gold.records + (StsRecord("nope", "s0", 1.0),))
        with pytest.raises(AlignmentError):
            evalsuite.sts_eval(reps, bad)


def table(rows, columns=("model_name", "architecture_tag", "bleu", "sts")):
    return evalsuite.MetricsTable(tuple(columns), tuple(dict(zip(columns, r)) for r in rows))


class TestMetrics:
    def test_linear_columns(self):
        t = table([(f"m{i}", "rnn", float(i), 2.0 * i + 1) for i in range(5)])
        assert evalsuite.metric_correlation_report(t, [("bleu", "sts")]).value("bleu", "sts") == 1.0

    def test_rnn_multimodal_score_rows(self):
        assert textbook_pearson(RNN_MMT["bleu"], RNN_MMT["sts"]) == pytest.approx(RNN_MMT_PEARSON, abs=1e-12)
        t = table([(f"m{i}", "rnn", b, s) for i, (b, s) in enumerate(zip(*RNN_MMT.values()))])
        report = evalsuite.metric_correlation_report(t, [("bleu", "sts")], group_by="architecture_tag")
        assert report.value("bleu", "sts", "rnn") == pytest.approx(RNN_MMT_PEARSON, abs=1e-12)
        assert report.to_dict()["correlations"] == {"rnn": {"bleu~sts": report.value("bleu", "sts", "rnn")}}
        assert [s["label"] for s in report.scatter] == ["m0", "m1", "m2", "m3"]

    def test_absent_values_skipped(self):
        t = table([("a", "x", 1.0, 1.0), ("b", "x", None, 5.0), ("c", "x", 2.0, 3.0), ("d", "x", 3.0, 2.0)])
        report = evalsuite.metric_correlation_report(t, [("bleu", "sts")])
        assert report.entries[0]["n"] == 3

    def test_insufficient_rows(self):
        t = table([("a", "x", 1.0, 1.0), ("b", "x", None, 2.0)])
        with pytest.raises(ValidationError, match="bleu~sts"):
            evalsuite.metric_correlation_report(t, [("bleu", "sts")])

    def test_positive_affine_invariance(self):
        rng = np.random.default_rng(6)
        b, s = rng.standard_normal((2, 8))
        t1 = table([(str(i), "x", p, q) for i, (p, q) in enumerate(zip(b, s))])
        t2 = table([(str(i), "x", 3 * p - 4, 0.5 * q + 9) for i, (p, q) in enumerate(zip(b, s))])
        r1 = evalsuite.metric_correlation_report(t1, [("bleu", "sts")]).value("bleu", "sts")
        r2 = evalsuite.metric_correlation_report(t2, [("bleu", "sts")]).value("bleu", "sts")
        assert r1 == pytest.approx(r2, abs=1e-12)

    def test_load_table(self, tmp_path):
        path = tmp_path / "m.tsv"
        path.write_text("model_name\tarchitecture_tag\tbleu\tsts\ttrain_size\n"
                        "a\trnn\t36.9\t.536\t29000\nb\trnn\t---\t.429\t\n")
        t = evalsuite.load_metrics_table(path)
        assert t.columns[-1] == "train_size"
        assert t.rows[0]["bleu"] == 36.9 and t.rows[1]["bleu"] is None and t.rows[1]["train_size"] is None

    def test_unknown_column(self):
        t = table([("a", "x", 1.0, 1.0), ("b", "x", 2.0, 2.0)])
        with pytest.raises(ValidationError):
            evalsuite.metric_correlation_report(t, [("bleu", "ppl")])
