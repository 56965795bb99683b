import numpy as np
import pytest

from lqts.corpus import FaceSet, Gallery
from lqts.errors import UsageError
from lqts.metafeat import feature_exemplar
from lqts.retrieval import (
    RetrievalConfig,
    rank_gallery,
    score_lqts,
    score_simple,
    select_proxies,
)
from lqts.similarity import fit_subspace, max_max_sim
from lqts.svr import SvrConfig, SvrModel, predict

from conftest import random_set


def constant_model(value: float) -> SvrModel:
    return SvrModel(
        support_vectors=np.empty((0, 5)),
        coefficients=np.empty(0),
        bias=value,
        config=SvrConfig(),
    )


def brute_force_proxy_table(gallery, k_p):
    """Independent oracle: full pairwise sort per set."""
    n = len(gallery)
    scores = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                scores[i, j] = max_max_sim(gallery.sets[i], gallery.sets[j]).score
    entries = {}
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (-scores[i, j], j))
        entries[gallery.set_ids[i]] = tuple(
            (gallery.set_ids[j], scores[i, j]) for j in order[:k_p]
        )
    return entries


class TestSelectProxies:
    def test_identical_sets_are_each_others_proxies(self, rng):
        x = np.abs(rng.normal(size=(3, 4))) + 0.1
        g = Gallery(
            sets=(
                FaceSet("a", x),
                FaceSet("b", x.copy()),
                FaceSet("c", rng.normal(size=(3, 4)) + 5.0),
            )
        )
        table = select_proxies(g, "exemplar", 1)
        assert table.proxies_of("a")[0][0] == "b"
        assert table.proxies_of("a")[0][1] == pytest.approx(1.0)

    def test_k0_gives_empty_lists(self, rng):
        g = Gallery(sets=tuple(random_set(rng, f"s{i}", n=3, d=4) for i in range(4)))
        table = select_proxies(g, "exemplar", 0)
        assert all(table.proxies_of(sid) == () for sid in g.set_ids)

    def test_matches_brute_force(self, rng):
        g = Gallery(sets=tuple(random_set(rng, f"s{i}", n=3, d=5) for i in range(5)))
        table = select_proxies(g, "exemplar", 3)
        oracle = brute_force_proxy_table(g, 3)
        for sid in g.set_ids:
            got = table.proxies_of(sid)
            want = oracle[sid]
            assert [p for p, _ in got] == [p for p, _ in want]
            np.testing.assert_allclose([s for _, s in got], [s for _, s in want], atol=1e-12)

    def test_k_too_large(self, rng):
        g = Gallery(sets=tuple(random_set(rng, f"s{i}", n=2, d=3) for i in range(3)))
        with pytest.raises(UsageError):
            select_proxies(g, "exemplar", 3)


class TestScoreLqts:
    def test_identical_content_scores_one(self, rng):
        s = random_set(rng, "q", n=3, d=4)
        t = FaceSet("t", s.exemplars.copy())
        assert score_lqts(s, t, [], constant_model(0.0)) == pytest.approx(1.0)

    def test_empty_proxies_reduce_to_baseline(self, rng):
        q = random_set(rng, "q", n=3, d=4)
        t = random_set(rng, "t", n=3, d=4)
        base = max_max_sim(q, t).score
        assert score_lqts(q, t, [], constant_model(0.99)) == pytest.approx(base)

    def test_constant_stub_model_wins_over_low_baseline(self):
        q = FaceSet("q", np.array([[1.0, 0.0, 0.0]]))
        t = FaceSet("t", np.array([[np.cos(1.26), np.sin(1.26), 0.0]]))  # baseline ~0.3
        p = FaceSet("p", np.array([[0.5, 0.5, 0.5]]))
        assert max_max_sim(q, t).score == pytest.approx(0.306, abs=0.01)
        assert score_lqts(q, t, [p], constant_model(0.9)) == pytest.approx(0.9)

    def test_never_below_baseline(self, rng):
        for _ in range(15):
            q = random_set(rng, "q", n=3, d=5)
            t = random_set(rng, "t", n=3, d=5)
            p = random_set(rng, "p", n=3, d=5)
            base = max_max_sim(q, t).score
            s = score_lqts(q, t, [p], constant_model(float(rng.random() * 2 - 0.5)))
            assert s >= base - 1e-12
            assert 0.0 <= s <= 1.0

    def test_prediction_clamped(self, rng):
        q = FaceSet("q", np.array([[1.0, 0.0]]))
        t = FaceSet("t", np.array([[0.0, 1.0]]))
        p = FaceSet("p", np.array([[1.0, 1.0]]))
        assert score_lqts(q, t, [p], constant_model(7.5)) == 1.0
        assert score_lqts(q, t, [p], constant_model(-3.0)) == 0.0

    def test_subspace_dispatch(self, rng):
        q = fit_subspace(random_set(rng, "q", n=4, d=6), k=2)
        t = fit_subspace(random_set(rng, "t", n=4, d=6), k=2)
        p = fit_subspace(random_set(rng, "p", n=4, d=6), k=2)
        s = score_lqts(q, t, [p], constant_model(0.5))
        assert 0.0 <= s <= 1.0


class TestScoreSimple:
    def setup_method(self):
        # singleton sets with prescribed pairwise cosines to the proxy:
        # rho_qp = 0.6, rho_pt = 0.8, baseline(q, t) tiny
        self.q = FaceSet("q", np.array([[0.6, 0.8, 0.0]]))
        self.p = FaceSet("p", np.array([[1.0, 0.0, 0.0]]))
        self.t = FaceSet("t", np.array([[0.8, 0.0, 0.6]]))

    def test_arith(self):
        got = score_simple(self.q, self.t, [self.p], "arith")
        assert got == pytest.approx(0.5 * (0.6 + 0.8), abs=1e-9)

    def test_geom_hand_values(self):
        # rule evaluated directly on the prescribed similarities
        assert score_simple(self.q, self.t, [self.p], "geom") == pytest.approx(
            np.sqrt(0.6 * 0.8), abs=1e-9
        )

    def test_quad(self):
        got = score_simple(self.q, self.t, [self.p], "quad")
        assert got == pytest.approx(np.sqrt(0.5 * 0.36 + 0.5 * 0.64), abs=1e-6)
        assert got == pytest.approx(0.707107, abs=1e-6)

    def test_no_proxies_reduces_to_baseline(self):
        base = max_max_sim(self.q, self.t).score
        assert score_simple(self.q, self.t, [], "arith") == pytest.approx(base)


class TestRankGallery:
    def test_extreme_scores(self):
        g = Gallery(
            sets=(
                FaceSet("query", np.array([[1.0, 0.0]])),
                FaceSet("same", np.array([[2.0, 0.0]])),
                FaceSet("orth", np.array([[0.0, 1.0]])),
            )
        )
        r = rank_gallery("query", g, RetrievalConfig(method="baseline"))
        assert r.ids() == ["same", "orth"]
        assert r.ranking[0][1] == pytest.approx(1.0)
        assert r.ranking[1][1] == pytest.approx(0.0)

    def test_lqts_with_k0_equals_baseline(self, rng):
        g = Gallery(sets=tuple(random_set(rng, f"s{i}", n=3, d=5) for i in range(6)))
        base = rank_gallery("s0", g, RetrievalConfig(method="baseline"))
        lqts = rank_gallery(
            "s0", g, RetrievalConfig(method="lqts", k_p=0, model=constant_model(0.9))
        )
        assert base.ids() == lqts.ids()
        np.testing.assert_allclose(
            [s for _, s in base.ranking], [s for _, s in lqts.ranking], atol=1e-12
        )

    def test_unknown_query_id(self, rng):
        g = Gallery(sets=tuple(random_set(rng, f"s{i}", n=3, d=5) for i in range(3)))
        from lqts.errors import CorpusError

        with pytest.raises(CorpusError):
            rank_gallery("missing", g, RetrievalConfig())

    def test_lqts_matches_straight_line_oracle(self, rng):
        # independent re-implementation: per-target feature construction
        # plus predict, no caching or batching
        sets = tuple(random_set(rng, f"s{i}", n=4, d=6, positive=True) for i in range(10))
        g = Gallery(sets=sets)
        table = select_proxies(g, "exemplar", 3)
        beta = rng.normal(size=8)
        beta -= beta.mean()
        model = SvrModel(
            support_vectors=rng.random((8, 5)),
            coefficients=beta,
            bias=0.2,
            config=SvrConfig(),
        )
        config = RetrievalConfig(method="lqts", k_p=3, model=model)
        got = rank_gallery("s0", g, config, table)

        query = g.get("s0")
        expected_scores = {}
        for target in sets[1:]:
            best = max_max_sim(query, target).score
            for pid, _ in table.proxies_of(target.set_id)[:3]:
                feat = feature_exemplar(query, target, g.get(pid))
                est = min(max(predict(model, feat.s), 0.0), 1.0)
                best = max(best, est)
            expected_scores[target.set_id] = best
        order = sorted(
            range(1, 10), key=lambda j: (-expected_scores[g.set_ids[j]], j)
        )
        assert got.ids() == [g.set_ids[j] for j in order]
        for sid, score in got.ranking:
            assert score == pytest.approx(expected_scores[sid], abs=1e-12)

    def test_simple_rules_match_per_target_scorer(self, rng):
        sets = tuple(random_set(rng, f"s{i}", n=3, d=5, positive=True) for i in range(7))
        g = Gallery(sets=sets)
        table = select_proxies(g, "exemplar", 2)
        for rule in ("arith", "geom", "quad"):
            config = RetrievalConfig(method=rule, k_p=2)
            got = rank_gallery("s0", g, config, table)
            query = g.get("s0")
            for sid, score in got.ranking:
                proxies = [g.get(pid) for pid, _ in table.proxies_of(sid)[:2]]
                assert score == pytest.approx(
                    score_simple(query, g.get(sid), proxies, rule), abs=1e-12
                )

    def test_external_query_ranks_whole_gallery(self, rng):
        g = Gallery(sets=tuple(random_set(rng, f"s{i}", n=3, d=5) for i in range(4)))
        external = random_set(rng, "ext", n=3, d=5)
        r = rank_gallery(external, g, RetrievalConfig(method="baseline"))
        assert sorted(r.ids()) == sorted(g.set_ids)
        assert r.query_id == "ext"

    def test_scores_non_increasing_and_permutation(self, rng):
        g = Gallery(sets=tuple(random_set(rng, f"s{i}", n=3, d=5) for i in range(8)))
        r = rank_gallery("s3", g, RetrievalConfig(method="baseline"))
        scores = [s for _, s in r.ranking]
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert sorted(r.ids()) == sorted(sid for sid in g.set_ids if sid != "s3")

    def test_deterministic(self, rng):
        g = Gallery(sets=tuple(random_set(rng, f"s{i}", n=3, d=5) for i in range(6)))
        table = select_proxies(g, "exemplar", 2)
        config = RetrievalConfig(method="lqts", k_p=2, model=constant_model(0.5))
        assert rank_gallery("s1", g, config, table) == rank_gallery("s1", g, config, table)


class TestRetrievalConfig:
    def test_lqts_requires_model(self):
        with pytest.raises(UsageError):
            RetrievalConfig(method="lqts", k_p=1, model=None)

    def test_unknown_method(self):
        with pytest.raises(UsageError):
            RetrievalConfig(method="harmonic")

    def test_unknown_baseline(self):
        with pytest.raises(UsageError):
            RetrievalConfig(baseline="manifold")
