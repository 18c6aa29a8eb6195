from __future__ import annotations

import collections
import json
import logging
import math
import re
from typing import Dict, List, Tuple

from models import Document, Query, RankedList, STATUS_EMPTY_QUERY

logger = logging.getLogger('corpus')

TERM_PATTERN = re.compile(r'[^\W_]+')

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4


def tokenize(text: str) -> List[str]:
    if not text:
        return []
    return TERM_PATTERN.findall(text.lower())


class Corpus:
    def __init__(self, documents: Dict[str, Document], postings: Dict[str, List[Tuple[str, int]]]):
        self.documents = documents
        self.postings = postings
        self.doc_count = len(documents)
        total_length = sum(d.length for d in documents.values())
        self.avg_doc_length = total_length / self.doc_count if self.doc_count else 0.0

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, []))

    def idf(self, term: str) -> float:
        """
        Okapi IDF in the non-negative form ln(1 + (N - df + 0.5) / (df + 0.5)).
        """
        df = self.document_frequency(term)
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))

    def text(self, doc_id: str) -> str:
        if doc_id not in self.documents:
            raise ValueError('Unknown document id: {}'.format(doc_id))
        return self.documents[doc_id].text

    def save(self, path: str):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(dict(documents=[d.to_dict() for d in self.documents.values()],
                           postings={t: [[d, tf] for d, tf in p] for t, p in self.postings.items()}), f)
        logger.info("Saved index. path={}, docs={}, terms={}".format(path, self.doc_count, len(self.postings)))

    @staticmethod
    def load(path: str) -> Corpus:
        with open(path, 'r', encoding='utf-8') as f:
            raw = json.load(f)
        documents = {d['_id']: Document(d['_id'], d['text'], d['length']) for d in raw['documents']}
        postings = {t: [(d, tf) for d, tf in p] for t, p in raw['postings'].items()}
        return Corpus(documents, postings)


def build_index(documents: List[Document]) -> Corpus:
    by_id: Dict[str, Document] = {}
    postings: Dict[str, List[Tuple[str, int]]] = collections.defaultdict(list)
    for document in documents:
        if document.id in by_id:
            raise ValueError('Duplicate document id: {}'.format(document.id))
        terms = tokenize(document.text)
        document.length = len(terms)
        by_id[document.id] = document
        for term, tf in collections.Counter(terms).items():
            postings[term].append((document.id, tf))
    corpus = Corpus(by_id, dict(postings))
    logger.info("Built index. docs={}, terms={}, avg_doc_length={}"
                .format(corpus.doc_count, len(corpus.postings), corpus.avg_doc_length))
    return corpus


def bm25_scores(corpus: Corpus, query: Query, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Dict[str, float]:
    """
    Scores every document sharing a term with the query. Repeated query terms contribute once per occurrence.
    """
    scores: Dict[str, float] = collections.defaultdict(float)
    avg_length = corpus.avg_doc_length if corpus.avg_doc_length > 0 else 1.0
    for term in tokenize(query.text):
        postings = corpus.postings.get(term)
        if not postings:
            continue
        idf = corpus.idf(term)
        for doc_id, tf in postings:
            length = corpus.documents[doc_id].length
            norm = k1 * (1.0 - b + b * length / avg_length)
            scores[doc_id] += idf * tf * (k1 + 1.0) / (tf + norm)
    return {doc_id: score for doc_id, score in scores.items() if score > 0}


def bm25_retrieve(corpus: Corpus, query: Query, depth: int, k1: float = DEFAULT_K1,
                  b: float = DEFAULT_B) -> RankedList:
    if depth < 1:
        raise ValueError('Retrieval depth must be >= 1. depth={}'.format(depth))
    if not tokenize(query.text):
        logger.warning("Query has no indexable terms. query_id={}, text={!r}".format(query.id, query.text))
        return RankedList(query.id, [], tag='bm25', status=STATUS_EMPTY_QUERY)
    scores = bm25_scores(corpus, query, k1=k1, b=b)
    return RankedList.from_scores(query.id, scores, tag='bm25', depth=depth)


def load_documents(path: str) -> List[Document]:
    documents = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                documents.append(Document(str(record['_id']), record['text']))
            except (ValueError, KeyError) as e:
                raise ValueError('Malformed corpus line {}: {}'.format(line_number, e))
    logger.info("Loaded {} documents. path={}".format(len(documents), path))
    return documents


def load_queries(path: str) -> List[Query]:
    queries = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_number, line in enumerate(f, start=1):
            line = line.rstrip('\n')
            if not line.strip():
                continue
            parts = line.split('\t', 1)
            if len(parts) != 2:
                raise ValueError('Malformed query line {}: {!r}'.format(line_number, line))
            queries.append(Query(parts[0], parts[1]))
    logger.info("Loaded {} queries. path={}".format(len(queries), path))
    return queries
