import itertools
import math

import numpy as np
import pytest

from dmgae.evaluation import (
    auc_score,
    average_precision,
    clustering_metrics,
    kmeans,
    link_prediction_metrics,
    pair_scores,
    separation_ratio,
    split_edges,
    split_graph,
)
from dmgae.graph import AttributedGraph


def brute_force_auc(pos, neg):
    wins = ties = 0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1
            elif p == q:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


class TestKMeans:
    def test_separated_clouds_exact_recovery(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(20, 2)) + [10, 0]
        b = rng.normal(size=(20, 2)) - [10, 0]
        z = np.vstack([a, b])
        pred = kmeans(z, 2, seed=0)
        assert len(set(pred[:20])) == 1 and len(set(pred[20:])) == 1
        assert pred[0] != pred[20]

    def test_each_point_own_cluster(self):
        z = np.arange(5, dtype=float).reshape(-1, 1) * 10
        pred = kmeans(z, 5, seed=0)
        assert len(set(pred)) == 5

    def test_matches_exhaustive_partition_oracle(self):
        rng = np.random.default_rng(4)
        z = np.vstack([rng.normal(size=(6, 2)), rng.normal(size=(6, 2)) + [6, 6]])

        def inertia(assign):
            total = 0.0
            for c in set(assign):
                pts = z[[i for i, a in enumerate(assign) if a == c]]
                total += ((pts - pts.mean(axis=0)) ** 2).sum()
            return total

        best = min(
            inertia(assign)
            for assign in itertools.product([0, 1], repeat=12)
            if len(set(assign)) == 2
        )
        pred = kmeans(z, 2, seed=0)
        assert np.isclose(inertia(list(pred)), best, rtol=1e-9)

    def test_too_many_clusters_rejected(self):
        with pytest.raises(ValueError):
            kmeans(np.zeros((3, 2)), 4)


class TestClusteringMetrics:
    def test_identity(self):
        y = np.array([0, 0, 1, 1, 2, 2])
        res = clustering_metrics(y, y)
        assert res.acc == res.nmi == res.f1 == 1.0

    def test_permuted_ids(self):
        y = np.array([0, 0, 1, 1, 2, 2])
        pred = np.array([2, 2, 0, 0, 1, 1])
        res = clustering_metrics(pred, y)
        assert res.acc == res.nmi == res.f1 == 1.0

    def test_fixture_one_misassignment(self):
        truth = np.array([0, 0, 0, 1, 1, 1])
        pred = np.array([1, 1, 1, 0, 0, 1])  # one element of class 1 strays
        res = clustering_metrics(pred, truth)
        assert np.isclose(res.acc, 5 / 6)

        # hand-computed NMI: contingency [[3,1],[0,2]] (pred id 1 ~ class 0)
        def entropy(probs):
            return -sum(p * math.log(p) for p in probs if p > 0)

        h_true = entropy([0.5, 0.5])
        h_pred = entropy([4 / 6, 2 / 6])
        joint = [3 / 6, 1 / 6, 2 / 6]
        mi = h_true + h_pred - entropy(joint)
        assert np.isclose(res.nmi, mi / ((h_true + h_pred) / 2), atol=1e-9)

        # macro F1 after matching: class0 P=3/4 R=1 F=6/7; class1 P=1 R=2/3 F=4/5
        assert np.isclose(res.f1, (6 / 7 + 4 / 5) / 2, atol=1e-9)

    def test_acc_invariant_to_id_permutation(self):
        rng = np.random.default_rng(1)
        truth = rng.integers(0, 3, size=30)
        pred = rng.integers(0, 3, size=30)
        base = clustering_metrics(pred, truth)
        relabel = {0: 2, 1: 0, 2: 1}
        permuted = np.array([relabel[p] for p in pred])
        res = clustering_metrics(permuted, truth)
        assert res.acc == base.acc and np.isclose(res.nmi, base.nmi)

    def test_nmi_self_and_symmetry(self):
        from sklearn.metrics import normalized_mutual_info_score as nmi

        x = np.array([0, 1, 1, 2, 0, 2])
        y = np.array([1, 1, 0, 2, 2, 0])
        assert nmi(x, x) == 1.0
        assert np.isclose(nmi(x, y), nmi(y, x))


def ring_graph(n, f=3, seed=0):
    rng = np.random.default_rng(seed)
    edges = np.array([[i, i + 1] for i in range(n - 1)] + [[0, n - 1]])
    edges = np.sort(edges, axis=1)
    return AttributedGraph(n=n, edges=edges, features=rng.normal(size=(n, f)))


class TestSplitEdges:
    def test_complete_graph_rejected(self):
        n = 5
        edges = np.array([(i, j) for i in range(n) for j in range(i + 1, n)])
        g = AttributedGraph(n=n, edges=edges, features=np.zeros((n, 1)))
        with pytest.raises(ValueError, match="non-edges"):
            split_edges(g, seed=0)

    def test_deterministic(self):
        g = ring_graph(100)
        s1 = split_edges(g, seed=3)
        s2 = split_edges(g, seed=3)
        assert np.array_equal(s1.test_pos, s2.test_pos)
        assert np.array_equal(s1.test_neg, s2.test_neg)

    def test_counts(self):
        g = ring_graph(100)  # exactly 100 edges
        s = split_edges(g, seed=0)
        assert len(s.val_pos) == 5 and len(s.val_neg) == 5
        assert len(s.test_pos) == 10 and len(s.test_neg) == 10
        assert len(s.train_edges) == 85

    def test_positives_partition_edge_set(self):
        g = ring_graph(60)
        s = split_edges(g, seed=1)
        parts = [set(map(tuple, e)) for e in (s.train_edges, s.val_pos, s.test_pos)]
        assert parts[0] | parts[1] | parts[2] == g.edge_set()
        assert not (parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2])

    def test_negatives_are_true_non_edges(self):
        g = ring_graph(60)
        s = split_edges(g, seed=2)
        es = g.edge_set()
        negs = list(map(tuple, np.vstack([s.val_neg, s.test_neg])))
        assert all(p not in es and p[0] != p[1] for p in negs)
        assert len(set(negs)) == len(negs)

    def test_split_graph_uses_train_edges(self):
        g = ring_graph(60)
        s = split_edges(g, seed=4)
        gt = split_graph(g, s)
        assert gt.edge_set() == set(map(tuple, s.train_edges))
        assert np.array_equal(gt.features, g.features)


class TestRankingMetrics:
    def test_perfect_ranking(self):
        pos = np.array([0.9, 0.8, 0.7])
        neg = np.array([0.3, 0.2])
        assert auc_score(pos, neg) == 1.0
        assert average_precision(pos, neg) == 1.0

    def test_all_tied_auc_half(self):
        pos = np.full(4, 0.5)
        neg = np.full(6, 0.5)
        assert auc_score(pos, neg) == 0.5

    def test_eight_pair_fixture_brute_force(self):
        pos = np.array([0.9, 0.6, 0.6, 0.1])
        neg = np.array([0.8, 0.6, 0.2, 0.05])
        assert np.isclose(auc_score(pos, neg), brute_force_auc(pos, neg))

    def test_auc_matches_brute_force_random(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n_pos = int(rng.integers(1, 15))
            n_neg = int(rng.integers(1, 15))
            pos = rng.choice([0.1, 0.25, 0.5, 0.8], size=n_pos)
            neg = rng.choice([0.1, 0.25, 0.5, 0.8], size=n_neg)
            assert np.isclose(auc_score(pos, neg), brute_force_auc(pos, neg), atol=1e-12)

    def test_ap_matches_sklearn(self):
        from sklearn.metrics import average_precision_score

        rng = np.random.default_rng(1)
        pos = rng.uniform(size=12)
        neg = rng.uniform(size=20)
        y = np.concatenate([np.ones(12), np.zeros(20)])
        s = np.concatenate([pos, neg])
        assert np.isclose(average_precision(pos, neg), average_precision_score(y, s))

    def test_link_prediction_end_to_end(self):
        g = ring_graph(60, seed=5)
        s = split_edges(g, seed=5)
        rng = np.random.default_rng(5)
        z = rng.normal(size=(60, 4))
        auc, ap = link_prediction_metrics(z, s)
        pos = pair_scores(z, s.test_pos)
        neg = pair_scores(z, s.test_neg)
        assert np.isclose(auc, brute_force_auc(pos, neg))
        assert 0.0 <= ap <= 1.0


def test_separation_ratio_orders_configurations():
    rng = np.random.default_rng(0)
    labels = np.repeat([0, 1], 20)
    tight = np.vstack([rng.normal(0, 0.5, (20, 2)) + [5, 0],
                       rng.normal(0, 0.5, (20, 2)) - [5, 0]])
    crowded = np.vstack([rng.normal(0, 2.0, (20, 2)) + [1, 0],
                         rng.normal(0, 2.0, (20, 2)) - [1, 0]])
    assert separation_ratio(tight, labels) > separation_ratio(crowded, labels)
