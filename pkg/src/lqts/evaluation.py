"""Retrieval quality measurement: average normalized rank and friends.

ANR averages the ranks of the matching sets and rescales so 0 means all
matches were retrieved first and 1 means they all came last. Identity
labels enter only here, through the gallery's evaluation-only accessor.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .corpus import Gallery, ProxyTable
from .retrieval import Ranker, RetrievalConfig

log = logging.getLogger(__name__)

DEFAULT_TOP_K = 100


@dataclass(frozen=True)
class AnrRecord:
    """Per-query outcome: gallery size n (query excluded), the c matching
    sets' 1-based ranks, and their average normalized rank."""

    query_id: str
    n: int
    c: int
    ranks: tuple[int, ...]
    anr: float


def anr(n: int, ranks) -> float:
    """(sum of match ranks - m) / (M - m) with m, M the best and worst
    attainable sums; 0 is perfect retrieval, 1 the worst possible."""
    ranks = sorted(int(r) for r in ranks)
    c = len(ranks)
    if c == 0:
        raise ValueError("at least one matching rank is required")
    if len(set(ranks)) != c:
        raise ValueError("ranks must be distinct")
    if ranks[0] < 1 or ranks[-1] > n:
        raise ValueError(f"ranks must lie in [1, {n}]")
    if c == n:
        raise ValueError("all gallery sets match the query: ANR undefined")
    m = c * (c + 1) / 2.0
    big_m = c * (2 * n - c + 1) / 2.0
    return float((sum(ranks) - m) / (big_m - m))


def admissible_query_ids(gallery: Gallery) -> tuple[list[str], int]:
    """set_ids usable as evaluation queries (identity has >= 2 sets) in
    gallery order, plus the number of excluded single-set identities."""
    labels = gallery.evaluation_labels()
    counts: dict[str, int] = defaultdict(int)
    for sid in gallery.set_ids:
        counts[labels[sid]] += 1
    admissible = [sid for sid in gallery.set_ids if counts[labels[sid]] >= 2]
    return admissible, len(gallery) - len(admissible)


def evaluate_all(
    gallery: Gallery,
    config: RetrievalConfig,
    proxies: ProxyTable | None = None,
) -> list[AnrRecord]:
    """Use every admissible gallery set as the query in turn.

    Queries whose identity has no other set are skipped (their retrieval
    has no right answer); the skip count is logged.
    """
    labels = gallery.evaluation_labels()
    queries, skipped = admissible_query_ids(gallery)
    if skipped:
        log.info("excluded %d single-set-identity queries", skipped)
    ranker = Ranker(gallery, config, proxies)
    records = []
    for qid in queries:
        result = ranker.rank(qid)
        want = labels[qid]
        ranks = tuple(
            pos
            for pos, (sid, _) in enumerate(result.ranking, start=1)
            if labels[sid] == want
        )
        records.append(
            AnrRecord(
                query_id=qid,
                n=len(result.ranking),
                c=len(ranks),
                ranks=ranks,
                anr=anr(len(result.ranking), ranks),
            )
        )
    return records


def anr_cdf(records, thresholds) -> list[tuple[float, float]]:
    """Fraction of queries with ANR <= t, for each threshold t."""
    if not records:
        raise ValueError("no records to aggregate")
    values = np.array([r.anr for r in records])
    return [(float(t), float(np.mean(values <= t))) for t in thresholds]


@dataclass(frozen=True)
class RankKStat:
    """Aggregate over queries having exactly k matches in the gallery."""

    k: int
    n_queries: int
    prob_hit: float  # share of queries with >= 1 match in the top K
    mean_count: float  # mean number of matches in the top K


def rank_k_stats(records, top_k: int = DEFAULT_TOP_K) -> list[RankKStat]:
    """Group queries by their number of matches k and report top-K hit
    probability and mean retrieved-match count per group."""
    groups: dict[int, list[AnrRecord]] = defaultdict(list)
    for r in records:
        groups[r.c].append(r)
    out = []
    for k in sorted(groups):
        recs = groups[k]
        hits = [sum(1 for r in rec.ranks if r <= top_k) for rec in recs]
        out.append(
            RankKStat(
                k=k,
                n_queries=len(recs),
                prob_hit=float(np.mean([h >= 1 for h in hits])),
                mean_count=float(np.mean(hits)),
            )
        )
    return out


def independence_prediction(p1: float, n1: float, k: int) -> tuple[float, float]:
    """Expected top-K behaviour for k matches if ranks were independent:
    hit probability 1 - (1 - p1)^k and match count k * n1, extrapolated
    from the single-match statistics (p1, n1)."""
    if not 0.0 <= p1 <= 1.0:
        raise ValueError("p1 must lie in [0, 1]")
    if k < 1:
        raise ValueError("k must be >= 1")
    return float(1.0 - (1.0 - p1) ** k), float(k * n1)


# ---------------------------------------------------------------------------
# report files


def write_anr_report(records, path) -> None:
    with open(path, "w") as fh:
        fh.write("query_id\tn\tc\tanr\n")
        for r in records:
            fh.write(f"{r.query_id}\t{r.n}\t{r.c}\t{repr(r.anr)}\n")


def write_cdf_report(records, thresholds, path) -> None:
    with open(path, "w") as fh:
        fh.write("threshold,fraction\n")
        for t, frac in anr_cdf(records, thresholds):
            fh.write(f"{t:g},{repr(frac)}\n")


def write_rank_k_report(records, path, top_k: int = DEFAULT_TOP_K) -> None:
    """Per-k empirical stats next to the independence-based predictions
    extrapolated from the k = 1 group (nan when that group is absent)."""
    stats = rank_k_stats(records, top_k)
    by_k = {s.k: s for s in stats}
    base = by_k.get(1)
    with open(path, "w") as fh:
        fh.write("k,empirical_prob,predicted_prob,empirical_count,predicted_count\n")
        for s in stats:
            if base is not None:
                pred_p, pred_c = independence_prediction(base.prob_hit, base.mean_count, s.k)
            else:
                pred_p, pred_c = float("nan"), float("nan")
            fh.write(
                f"{s.k},{repr(s.prob_hit)},{repr(pred_p)},{repr(s.mean_count)},{repr(pred_c)}\n"
            )
