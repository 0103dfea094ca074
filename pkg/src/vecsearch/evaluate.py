"""TREC-style retrieval evaluation.

Parses 4-column qrels and 6-column run files, computes RR@10, AP,
nDCG@10, and R@1k per query, and aggregates arithmetic means over the
judged queries. Binary metrics (RR, AP, R) treat grade >= threshold as
relevant; nDCG uses the raw graded judgments with linear gain and a
log2(rank+1) discount. Unjudged retrieved documents count as
non-relevant.
"""

from __future__ import annotations

import json
import logging
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import format_float32
from .errors import InvalidArgumentError, ParseError
from .vectors import ScoredDoc, canonical_order

logger = logging.getLogger(__name__)

AP_CUTOFF = 1000
RR_CUTOFF = 10
NDCG_CUTOFF = 10
RECALL_CUTOFF = 1000


@contextmanager
def _open_text_read(source):
    own = isinstance(source, (str, os.PathLike))
    handle = open(source, "r", encoding="utf-8") if own else source
    try:
        yield handle
    finally:
        if own:
            handle.close()


@contextmanager
def _open_text_write(sink):
    own = isinstance(sink, (str, os.PathLike))
    handle = open(sink, "w", encoding="utf-8") if own else sink
    try:
        yield handle
    finally:
        if own:
            handle.close()


class Qrels:
    """Graded relevance judgments: (query id, doc id) -> grade >= 0."""

    def __init__(self):
        self._judgments: dict[str, dict[str, int]] = {}

    def add(self, query_id: str, doc_id: str, grade: int) -> None:
        if grade < 0:
            raise InvalidArgumentError(
                f"grade must be >= 0, got {grade} for ({query_id}, {doc_id})"
            )
        per_query = self._judgments.setdefault(query_id, {})
        if doc_id in per_query:
            logger.warning(
                "duplicate judgment for (%s, %s): overwriting grade %d with %d",
                query_id, doc_id, per_query[doc_id], grade,
            )
        per_query[doc_id] = grade

    def __len__(self) -> int:
        return sum(len(d) for d in self._judgments.values())

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._judgments

    def query_ids(self) -> list[str]:
        return sorted(self._judgments)

    def grades(self, query_id: str) -> dict[str, int]:
        return dict(self._judgments.get(query_id, {}))

    def grade(self, query_id: str, doc_id: str) -> int | None:
        return self._judgments.get(query_id, {}).get(doc_id)

    def relevant(self, query_id: str, threshold: int = 1) -> set[str]:
        """Doc ids with grade >= threshold for one query."""
        return {
            d for d, g in self._judgments.get(query_id, {}).items() if g >= threshold
        }


def parse_qrels(source) -> Qrels:
    """Parse whitespace-delimited ``qid iter docid grade`` lines; the iter
    column is ignored and later duplicates overwrite with a warning."""
    qrels = Qrels()
    with _open_text_read(source) as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) < 4:
                raise ParseError(
                    f"expected 4 columns 'qid iter docid grade', got {len(parts)}",
                    line_no,
                )
            qid, _iter, docid, grade_s = parts[0], parts[1], parts[2], parts[3]
            try:
                grade = int(grade_s)
            except ValueError as exc:
                raise ParseError(f"grade {grade_s!r} is not an integer", line_no) from exc
            try:
                qrels.add(qid, docid, grade)
            except InvalidArgumentError as exc:
                raise ParseError(str(exc), line_no) from exc
    return qrels


@dataclass
class Run:
    """One system's ranked output: query id -> hits in canonical order."""

    rankings: dict[str, list[ScoredDoc]] = field(default_factory=dict)
    tag: str = "run"

    def query_ids(self) -> list[str]:
        return sorted(self.rankings)


def parse_run(source) -> Run:
    """Parse 6-column ``qid Q0 docid rank score tag`` lines. Ranking order
    is re-derived from the scores with the canonical tie-break; a warning
    is logged if the file's order disagreed."""
    rankings: dict[str, list[ScoredDoc]] = {}
    seen: dict[str, set[str]] = {}
    tag = None
    with _open_text_read(source) as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(
                    f"expected 6 columns 'qid Q0 docid rank score tag', got {len(parts)}",
                    line_no,
                )
            qid, _q0, docid, _rank, score_s, line_tag = parts
            try:
                score = float(np.float32(score_s))
            except ValueError as exc:
                raise ParseError(f"score {score_s!r} is not a number", line_no) from exc
            if docid in seen.setdefault(qid, set()):
                raise ParseError(
                    f"duplicate doc {docid!r} for query {qid!r}", line_no
                )
            seen[qid].add(docid)
            rankings.setdefault(qid, []).append(ScoredDoc(docid, score))
            if tag is None:
                tag = line_tag
    for qid, docs in rankings.items():
        ordered = canonical_order(docs)
        if ordered != docs:
            logger.warning(
                "run order for query %s disagreed with scores; re-sorted", qid
            )
        rankings[qid] = ordered
    return Run(rankings=rankings, tag=tag if tag is not None else "run")


def write_run(run: Run, sink) -> int:
    """Write a run in 6-column exchange format; returns the line count.

    Hits are re-sorted canonically so ranks are always consistent with
    scores; scores are serialized at 32-bit precision.
    """
    count = 0
    with _open_text_write(sink) as handle:
        for qid in run.query_ids():
            for rank, doc in enumerate(canonical_order(run.rankings[qid]), start=1):
                handle.write(
                    f"{qid} Q0 {doc.doc_id} {rank} {format_float32(doc.score)} {run.tag}\n"
                )
                count += 1
    return count


# -- metric primitives ----------------------------------------------------


def rr_at_k(ranking: Sequence[str], relevant: set[str], k: int = RR_CUTOFF) -> float:
    """Reciprocal of the 1-based rank of the first relevant doc within the
    top k; 0 if none appears."""
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    for i, doc_id in enumerate(ranking[:k], start=1):
        if doc_id in relevant:
            return 1.0 / i
    return 0.0


def average_precision(
    ranking: Sequence[str], relevant: set[str], cutoff: int = AP_CUTOFF
) -> float:
    """Mean of precision at each relevant doc's rank (within the cutoff),
    normalized by the total relevant count; 0 with a warning when there
    are no relevant docs."""
    if not relevant:
        logger.warning("average_precision: no relevant documents; returning 0")
        return 0.0
    hits = 0
    total = 0.0
    for i, doc_id in enumerate(ranking[:cutoff], start=1):
        if doc_id in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def ndcg_at_k(
    ranking: Sequence[str], grades: Mapping[str, int], k: int = NDCG_CUTOFF
) -> float:
    """DCG@k / IDCG@k with linear gain and 1/log2(rank+1) discount; the
    ideal ordering is the judged grades sorted descending."""
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    ideal = sorted((g for g in grades.values() if g > 0), reverse=True)
    if not ideal:
        logger.warning("ndcg_at_k: no positive grades; returning 0")
        return 0.0
    dcg = 0.0
    for i, doc_id in enumerate(ranking[:k], start=1):
        grade = grades.get(doc_id, 0)
        if grade > 0:
            dcg += grade / math.log2(i + 1)
    idcg = sum(g / math.log2(i + 1) for i, g in enumerate(ideal[:k], start=1))
    return dcg / idcg


def recall_at_k(
    ranking: Sequence[str], relevant: set[str], k: int = RECALL_CUTOFF
) -> float:
    """Fraction of the relevant docs found in the top k; 0 with a warning
    when there are no relevant docs."""
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    if not relevant:
        logger.warning("recall_at_k: no relevant documents; returning 0")
        return 0.0
    found = sum(1 for doc_id in ranking[:k] if doc_id in relevant)
    return found / len(relevant)


# -- aggregation ------------------------------------------------------------


@dataclass(frozen=True)
class QueryMetrics:
    rr_at_10: float
    ap: float
    ndcg_at_10: float
    r_at_1k: float


@dataclass
class MetricReport:
    """Per-query metric values plus their arithmetic means over all judged
    queries."""

    per_query: dict[str, QueryMetrics]
    means: QueryMetrics

    def to_table(self) -> str:
        """Aligned text table, one row per query plus an 'all' row."""
        header = f"{'query':<24} {'RR@10':>8} {'AP':>8} {'nDCG@10':>8} {'R@1k':>8}"
        lines = [header]
        for qid in sorted(self.per_query):
            m = self.per_query[qid]
            lines.append(
                f"{qid:<24} {m.rr_at_10:>8.4f} {m.ap:>8.4f} "
                f"{m.ndcg_at_10:>8.4f} {m.r_at_1k:>8.4f}"
            )
        m = self.means
        lines.append(
            f"{'all':<24} {m.rr_at_10:>8.4f} {m.ap:>8.4f} "
            f"{m.ndcg_at_10:>8.4f} {m.r_at_1k:>8.4f}"
        )
        return "\n".join(lines)

    def to_json_lines(self) -> str:
        """One JSON object per query plus one 'all' summary line."""
        lines = []
        for qid in sorted(self.per_query):
            m = self.per_query[qid]
            lines.append(json.dumps({"query": qid, **_metric_dict(m)}))
        lines.append(json.dumps({"query": "all", **_metric_dict(self.means)}))
        return "\n".join(lines)


def _metric_dict(m: QueryMetrics) -> dict[str, float]:
    return {
        "rr_at_10": m.rr_at_10,
        "ap": m.ap,
        "ndcg_at_10": m.ndcg_at_10,
        "r_at_1k": m.r_at_1k,
    }


def evaluate(run: Run, qrels: Qrels, binary_rel_threshold: int = 1) -> MetricReport:
    """Score a run against judgments.

    Means are taken over the queries present in the qrels; judged queries
    missing from the run score zero (with a warning), and run queries
    without judgments are excluded (with a warning).
    """
    if binary_rel_threshold < 1:
        raise InvalidArgumentError(
            f"binary_rel_threshold must be >= 1, got {binary_rel_threshold}"
        )
    unjudged = sorted(set(run.rankings) - set(qrels.query_ids()))
    if unjudged:
        logger.warning(
            "%d run quer%s without judgments excluded (e.g. %s)",
            len(unjudged), "y" if len(unjudged) == 1 else "ies", unjudged[0],
        )
    per_query: dict[str, QueryMetrics] = {}
    for qid in qrels.query_ids():
        hits = run.rankings.get(qid)
        if hits is None:
            logger.warning("judged query %s missing from run; scoring as zero", qid)
            ranking: list[str] = []
        else:
            ranking = [d.doc_id for d in hits]
        grades = qrels.grades(qid)
        relevant = qrels.relevant(qid, binary_rel_threshold)
        per_query[qid] = QueryMetrics(
            rr_at_10=rr_at_k(ranking, relevant, RR_CUTOFF),
            ap=average_precision(ranking, relevant, AP_CUTOFF),
            ndcg_at_10=ndcg_at_k(ranking, grades, NDCG_CUTOFF),
            r_at_1k=recall_at_k(ranking, relevant, RECALL_CUTOFF),
        )
    n = len(per_query)
    if n == 0:
        means = QueryMetrics(0.0, 0.0, 0.0, 0.0)
    else:
        means = QueryMetrics(
            rr_at_10=sum(m.rr_at_10 for m in per_query.values()) / n,
            ap=sum(m.ap for m in per_query.values()) / n,
            ndcg_at_10=sum(m.ndcg_at_10 for m in per_query.values()) / n,
            r_at_1k=sum(m.r_at_1k for m in per_query.values()) / n,
        )
    return MetricReport(per_query=per_query, means=means)
