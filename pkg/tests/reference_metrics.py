"""Straightforward second implementation of the four retrieval metrics,
written directly from their definitions and kept independent of the
library code so it can act as an oracle.

Conventions match the library's contracts: binary metrics treat
grade >= threshold as relevant, undefined values are 0, unjudged
documents are non-relevant.
"""

import math


def ref_rr(ranking, relevant, k):
    rank = 0
    for i in range(min(k, len(ranking))):
        if ranking[i] in relevant:
            rank = i + 1
            break
    return 0.0 if rank == 0 else 1.0 / rank


def ref_ap(ranking, relevant, cutoff):
    if len(relevant) == 0:
        return 0.0
    num_hits = 0
    precision_sum = 0.0
    for i in range(min(cutoff, len(ranking))):
        if ranking[i] in relevant:
            num_hits += 1
            precision_sum += num_hits / (i + 1)
    return precision_sum / len(relevant)


def ref_ndcg(ranking, grades, k):
    ideal_gains = sorted((g for g in grades.values() if g > 0), reverse=True)[:k]
    if not ideal_gains:
        return 0.0
    dcg = 0.0
    for i in range(min(k, len(ranking))):
        dcg += grades.get(ranking[i], 0) / math.log2(i + 2)
    idcg = 0.0
    for i, g in enumerate(ideal_gains):
        idcg += g / math.log2(i + 2)
    return dcg / idcg


def ref_recall(ranking, relevant, k):
    if len(relevant) == 0:
        return 0.0
    return len(set(ranking[:k]) & relevant) / len(relevant)


def ref_evaluate(run_rankings, qrels_grades, threshold):
    """Per-query metric dicts plus means over the judged queries.

    run_rankings: {qid: [docid, ...]} in rank order.
    qrels_grades: {qid: {docid: grade}}.
    """
    per_query = {}
    for qid, grades in qrels_grades.items():
        ranking = run_rankings.get(qid, [])
        relevant = {d for d, g in grades.items() if g >= threshold}
        per_query[qid] = {
            "rr_at_10": ref_rr(ranking, relevant, 10),
            "ap": ref_ap(ranking, relevant, 1000),
            "ndcg_at_10": ref_ndcg(ranking, grades, 10),
            "r_at_1k": ref_recall(ranking, relevant, 1000),
        }
    n = len(per_query)
    means = {
        key: (sum(m[key] for m in per_query.values()) / n if n else 0.0)
        for key in ("rr_at_10", "ap", "ndcg_at_10", "r_at_1k")
    }
    return per_query, means
