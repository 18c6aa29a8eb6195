from __future__ import annotations

import logging
import os
from typing import Dict, List, Tuple

import numpy as np

from models import RankedList

logger = logging.getLogger('evaluation')

DEFAULT_RUN_DEPTH = 1000


class Qrels:
    def __init__(self, judgments: Dict[str, Dict[str, int]] = None):
        self.judgments = judgments if judgments is not None else {}

    def add(self, query_id: str, doc_id: str, grade: int):
        if grade < 0:
            raise ValueError('Relevance grade must be >= 0. query_id={}, doc_id={}, grade={}'
                             .format(query_id, doc_id, grade))
        per_query = self.judgments.setdefault(query_id, {})
        if doc_id in per_query:
            raise ValueError('Duplicate judgment. query_id={}, doc_id={}'.format(query_id, doc_id))
        per_query[doc_id] = grade

    def grades(self, query_id: str) -> Dict[str, int]:
        return self.judgments.get(query_id, {})

    def query_ids(self) -> List[str]:
        return list(self.judgments.keys())

    def __len__(self):
        return len(self.judgments)


class Run:
    def __init__(self, lists: Dict[str, RankedList] = None):
        self.lists = lists if lists is not None else {}

    def add(self, ranked: RankedList):
        self.lists[ranked.query_id] = ranked

    def get(self, query_id: str) -> RankedList:
        return self.lists.get(query_id)

    def query_ids(self) -> List[str]:
        return list(self.lists.keys())

    def __len__(self):
        return len(self.lists)

    def __eq__(self, other):
        if not isinstance(other, Run):
            return NotImplemented
        return self.lists == other.lists


def _dcg(gains: List[int]) -> float:
    if not gains:
        return 0.0
    grades = np.array(gains, dtype=float)
    discounts = np.log2(np.arange(2, len(grades) + 2))
    return float(np.sum((np.power(2.0, grades) - 1.0) / discounts))


def ndcg_at_k(ranked: RankedList, qrels: Qrels, k: int = 10) -> float:
    """
    nDCG@k with exponential gain (2^rel - 1) and log2(rank + 1) discount. Queries without a positive judgment
    score 0 and are logged.
    """
    if k < 1:
        raise ValueError('nDCG cutoff must be >= 1. k={}'.format(k))
    query_id = ranked.query_id
    grades = qrels.grades(query_id)
    ideal = _dcg(sorted((g for g in grades.values() if g > 0), reverse=True)[:k])
    if ideal == 0:
        logger.warning("Query has no positively graded document. query_id={}".format(query_id))
        return 0.0
    gains = [grades.get(doc_id, 0) for doc_id in ranked.doc_ids()[:k]]
    return _dcg(gains) / ideal


def per_query_ndcg(run: Run, qrels: Qrels, k: int = 10) -> Tuple[Dict[str, float], List[str]]:
    """
    Returns (scores, flagged): one score per judged query, and the query ids that could not score above 0
    because they are missing from the run or have no positive judgment.
    """
    if not len(qrels):
        raise ValueError('Qrels are empty.')
    scores = {}
    flagged = []
    for query_id in qrels.query_ids():
        ranked = run.get(query_id)
        if ranked is None or not any(g > 0 for g in qrels.grades(query_id).values()):
            scores[query_id] = 0.0
            flagged.append(query_id)
            continue
        scores[query_id] = ndcg_at_k(ranked, qrels, k)
    if flagged:
        logger.warning("{} queries scored 0 without evaluation. query_ids={}".format(len(flagged), flagged))
    return scores, flagged


def evaluate_run(run: Run, qrels: Qrels, k: int = 10) -> Tuple[float, Dict[str, float], List[str]]:
    scores, flagged = per_query_ndcg(run, qrels, k)
    return float(np.mean(list(scores.values()))), scores, flagged


def mean_ndcg(run: Run, qrels: Qrels, k: int = 10) -> float:
    return evaluate_run(run, qrels, k)[0]


def read_qrels(path: str) -> Qrels:
    qrels = Qrels()
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 4:
                raise ValueError('Malformed qrels line {}: {!r}'.format(line_number, line.rstrip('\n')))
            query_id, _, doc_id, grade = fields
            try:
                qrels.add(query_id, doc_id, int(grade))
            except ValueError as e:
                raise ValueError('Malformed qrels line {}: {}'.format(line_number, e))
    logger.info("Loaded qrels. path={}, queries={}".format(path, len(qrels)))
    return qrels


def format_score(score: float) -> str:
    return repr(float(score))


def write_run(run: Run, path: str, depth: int = DEFAULT_RUN_DEPTH, tag: str = None):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    lines = 0
    with open(path, 'w', encoding='utf-8') as f:
        for query_id, ranked in run.lists.items():
            run_tag = '_'.join((tag or ranked.tag or 'gff').split())
            scores = ranked.score_text or [format_score(score) for _, score in ranked.entries]
            for rank, (doc_id, score) in enumerate(zip(ranked.doc_ids()[:depth], scores), start=1):
                f.write('{} Q0 {} {} {} {}\n'.format(query_id, doc_id, rank, score, run_tag))
                lines += 1
    logger.info("Wrote run. path={}, queries={}, lines={}".format(path, len(run), lines))


def read_run(path: str) -> Run:
    rows: Dict[str, List[Tuple[int, str, float, str]]] = {}
    tags: Dict[str, str] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ValueError('Malformed run line {}: {!r}'.format(line_number, line.rstrip('\n')))
            query_id, _, doc_id, rank, score, tag = fields
            try:
                rows.setdefault(query_id, []).append((int(rank), doc_id, float(score), score))
            except ValueError as e:
                raise ValueError('Malformed run line {}: {}'.format(line_number, e))
            tags[query_id] = tag
    run = Run()
    for query_id, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        try:
            run.add(RankedList(query_id, [(doc_id, score) for _, doc_id, score, _ in entries], tag=tags[query_id],
                               score_text=[text for _, _, _, text in entries]))
        except ValueError as e:
            raise ValueError('Invalid run for query {} in {}: {}'.format(query_id, path, e))
    return run
