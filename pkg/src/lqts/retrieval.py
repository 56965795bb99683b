"""Proxy selection, quasi-transitive scoring and gallery ranking.

A target's score against a query is never worse than the baseline: the
learnt and simple combiner methods take the maximum of the baseline
similarity and the proxy-mediated estimates, so they can only promote
targets. Regression outputs are clamped to [0, 1] before that max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FaceSet, Gallery, ProxyTable
from .errors import UsageError
from .metafeat import (
    BASELINES,
    EXEMPLAR,
    SUBSPACE,
    feature_exemplar,
    feature_subspace,
)
from .sampling import DEFAULT_SAMPLES, robust_select
from .similarity import (
    DEFAULT_SUBSPACE_DIM,
    MatchResult,
    SubspaceModel,
    cosine_sim,
    fit_subspace,
    max_corr,
    max_max_sim,
)
from .svr import SvrModel, predict

METHOD_BASELINE = "baseline"
METHOD_LQTS = "lqts"
SIMPLE_RULES = ("arith", "geom", "quad")
METHODS = (METHOD_BASELINE, METHOD_LQTS) + SIMPLE_RULES


@dataclass(frozen=True)
class RetrievalConfig:
    baseline: str = EXEMPLAR
    method: str = METHOD_BASELINE
    k_p: int = 0
    model: SvrModel | None = None
    subspace_k: int = DEFAULT_SUBSPACE_DIM
    # reduction applied to external exemplar queries, mirroring the gallery
    n_samples: int | None = DEFAULT_SAMPLES

    def __post_init__(self):
        if self.baseline not in BASELINES:
            raise UsageError(f"unknown baseline {self.baseline!r}")
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}")
        if self.k_p < 0:
            raise UsageError("k_p must be >= 0")
        if self.method == METHOD_LQTS and self.model is None:
            raise UsageError("method 'lqts' requires a trained model")


@dataclass(frozen=True)
class RankedResult:
    """Gallery ordering for one query, scores non-increasing."""

    query_id: str
    ranking: tuple[tuple[str, float], ...]
    method: str

    def ids(self) -> list[str]:
        return [sid for sid, _ in self.ranking]

    def rank_of(self, set_id: str) -> int:
        """1-based rank of a gallery set in this result."""
        for pos, (sid, _) in enumerate(self.ranking, start=1):
            if sid == set_id:
                return pos
        raise KeyError(set_id)


def _combine(rule: str, rho_qp: float, rho_pt: float) -> float:
    if rule == "arith":
        return 0.5 * (rho_qp + rho_pt)
    if rule == "geom":
        return float(np.sqrt(rho_qp * rho_pt))
    if rule == "quad":
        return float(np.sqrt(0.5 * rho_qp**2 + 0.5 * rho_pt**2))
    raise UsageError(f"unknown combiner rule {rule!r}")


class GalleryScorer:
    """Caches per-set representations and pairwise comparisons.

    Pair results are cached under the ordered index pair they were
    computed for, so mode orientation stays consistent with the feature
    construction that consumes them.
    """

    def __init__(self, gallery: Gallery, baseline: str, subspace_k: int = DEFAULT_SUBSPACE_DIM):
        if baseline not in BASELINES:
            raise UsageError(f"unknown baseline {baseline!r}")
        self.gallery = gallery
        self.baseline = baseline
        self.subspace_k = subspace_k
        self._reps: list = [None] * len(gallery)
        self._pairs: dict[tuple[int, int], MatchResult] = {}

    def rep(self, i: int):
        if self._reps[i] is None:
            s = self.gallery.sets[i]
            self._reps[i] = s if self.baseline == EXEMPLAR else fit_subspace(s, self.subspace_k)
        return self._reps[i]

    def compare(self, a, b) -> MatchResult:
        if self.baseline == EXEMPLAR:
            return max_max_sim(a, b)
        return max_corr(a, b)

    def pair(self, i: int, j: int) -> MatchResult:
        key = (i, j)
        res = self._pairs.get(key)
        if res is None:
            res = self.compare(self.rep(i), self.rep(j))
            self._pairs[key] = res
        return res

    def score(self, i: int, j: int) -> float:
        hit = self._pairs.get((i, j)) or self._pairs.get((j, i))
        return hit.score if hit is not None else self.pair(i, j).score


def select_proxies(
    gallery: Gallery, baseline: str, k_p: int, subspace_k: int = DEFAULT_SUBSPACE_DIM
) -> ProxyTable:
    """The k_p most-similar other sets for every gallery set, descending,
    ties broken by ascending gallery position."""
    n = len(gallery)
    if k_p < 0:
        raise UsageError("k_p must be >= 0")
    if k_p > n - 1:
        raise UsageError(f"k_p={k_p} too large for a gallery of {n} sets")
    scorer = GalleryScorer(gallery, baseline, subspace_k)
    ids = gallery.set_ids
    entries: dict[str, tuple[tuple[str, float], ...]] = {}
    for i in range(n):
        others = sorted(
            (j for j in range(n) if j != i),
            key=lambda j: (-scorer.score(i, j), j),
        )[:k_p]
        if others:
            entries[ids[i]] = tuple((ids[j], scorer.score(i, j)) for j in others)
    return ProxyTable(k_p=k_p, entries=entries)


def _clamp01(v):
    return np.minimum(np.maximum(v, 0.0), 1.0)


def score_lqts(query, target, proxies, model: SvrModel) -> float:
    """max(baseline(query,target), regression estimates through each proxy).

    Arguments are FaceSets under the exemplar baseline or SubspaceModels
    under the subspace baseline; an empty proxy list reduces to the
    baseline similarity.
    """
    subspace = isinstance(query, SubspaceModel)
    baseline_fn = max_corr if subspace else max_max_sim
    feature_fn = feature_subspace if subspace else feature_exemplar
    best = baseline_fn(query, target).score
    for p in proxies:
        est = float(_clamp01(predict(model, feature_fn(query, target, p).s)))
        best = max(best, est)
    return float(best)


def score_simple(query, target, proxies, rule: str) -> float:
    """max(baseline(query,target), combiner(query-proxy, proxy-target))
    over the proxies, with the arithmetic/geometric/quadratic mean rule."""
    subspace = isinstance(query, SubspaceModel)
    baseline_fn = max_corr if subspace else max_max_sim
    best = baseline_fn(query, target).score
    for p in proxies:
        rho_qp = baseline_fn(query, p).score
        rho_pt = baseline_fn(p, target).score
        best = max(best, _combine(rule, rho_qp, rho_pt))
    return float(best)


class Ranker:
    """Ranks queries against a fixed gallery under one configuration.

    Reusable across queries: pairwise comparisons between gallery sets
    (notably proxy-target modes) are computed once and shared.
    """

    def __init__(self, gallery: Gallery, config: RetrievalConfig, proxies: ProxyTable | None = None):
        if config.k_p > len(gallery) - 1:
            raise UsageError(f"k_p={config.k_p} too large for a gallery of {len(gallery)} sets")
        if config.method != METHOD_BASELINE and config.k_p > 0 and proxies is None:
            raise UsageError(f"method {config.method!r} with k_p > 0 needs a proxy table")
        self.gallery = gallery
        self.config = config
        self.proxies = proxies
        self.scorer = GalleryScorer(gallery, config.baseline, config.subspace_k)

    def _query_rep(self, query):
        """(gallery index or None, representation) for a query."""
        if isinstance(query, str):
            idx = self.gallery.index_of(query)
            return idx, self.scorer.rep(idx)
        if not isinstance(query, FaceSet):
            raise UsageError("query must be a set_id or a FaceSet")
        s = query
        if self.config.baseline == EXEMPLAR:
            if self.config.n_samples is not None:
                s = robust_select(s, self.config.n_samples)
            return None, s
        return None, fit_subspace(s, self.config.subspace_k)

    def rank(self, query) -> RankedResult:
        q_idx, q_rep = self._query_rep(query)
        query_id = query if isinstance(query, str) else query.set_id
        targets = [j for j in range(len(self.gallery)) if j != q_idx]

        qcache: dict[int, MatchResult] = {}

        def qpair(j: int) -> MatchResult:
            if q_idx is not None:
                return self.scorer.pair(q_idx, j)
            res = qcache.get(j)
            if res is None:
                res = self.scorer.compare(q_rep, self.scorer.rep(j))
                qcache[j] = res
            return res

        base = np.array([qpair(j).score for j in targets])
        method = self.config.method
        if method == METHOD_BASELINE or self.config.k_p == 0:
            scores = base
        elif method == METHOD_LQTS:
            scores = self._lqts_scores(targets, base, qpair)
        else:
            scores = self._simple_scores(targets, base, qpair, method)

        order = sorted(range(len(targets)), key=lambda t: (-scores[t], targets[t]))
        ids = self.gallery.set_ids
        ranking = tuple((ids[targets[t]], float(scores[t])) for t in order)
        label = f"{method}/{self.config.baseline}/k_p={self.config.k_p}"
        return RankedResult(query_id=query_id, ranking=ranking, method=label)

    def _target_proxy_indices(self, j: int) -> list[int]:
        sid = self.gallery.set_ids[j]
        plist = self.proxies.proxies_of(sid, self.config.k_p) if self.proxies else ()
        return [self.gallery.index_of(pid) for pid, _ in plist]

    def _lqts_scores(self, targets, base, qpair) -> np.ndarray:
        rows, owners = [], []
        for t_pos, j in enumerate(targets):
            r_qt = qpair(j)
            for p in self._target_proxy_indices(j):
                r_qp = qpair(p)
                r_pt = self.scorer.pair(p, j)
                rows.append(
                    (
                        r_qp.score,
                        r_qt.score,
                        r_pt.score,
                        cosine_sim(r_qp.mode_b, r_pt.mode_a),
                        cosine_sim(r_qt.mode_b, r_pt.mode_b),
                    )
                )
                owners.append(t_pos)
        scores = base.copy()
        if rows:
            est = _clamp01(predict(self.config.model, np.asarray(rows)))
            np.maximum.at(scores, np.asarray(owners), est)
        return scores

    def _simple_scores(self, targets, base, qpair, rule: str) -> np.ndarray:
        scores = base.copy()
        for t_pos, j in enumerate(targets):
            for p in self._target_proxy_indices(j):
                rho_qp = qpair(p).score
                rho_pt = self.scorer.score(p, j)
                scores[t_pos] = max(scores[t_pos], _combine(rule, rho_qp, rho_pt))
        return scores


def rank_gallery(
    query,
    gallery: Gallery,
    config: RetrievalConfig,
    proxies: ProxyTable | None = None,
) -> RankedResult:
    """Order all non-query gallery sets by decreasing score under the
    configured method. `query` is a gallery set_id or an external FaceSet."""
    return Ranker(gallery, config, proxies).rank(query)


def save_ranking(result: RankedResult, path) -> None:
    with open(path, "w") as fh:
        fh.write("rank\tset_id\tscore\n")
        for rank, (sid, score) in enumerate(result.ranking, start=1):
            fh.write(f"{rank}\t{sid}\t{repr(score)}\n")
