import collections
import logging
from typing import Dict, List

from corpus import Corpus, bm25_retrieve, tokenize, DEFAULT_K1, DEFAULT_B
from fusion import normalize_scores
from models import Keyword, Query, WeightedTerm

logger = logging.getLogger('prf')

DEFAULT_FB_DOCS = 10
DEFAULT_FB_TERMS = 10
DEFAULT_LAMBDA = 0.5


def _normalize(vector: Dict[str, float]) -> Dict[str, float]:
    total = sum(vector.values())
    if total <= 0:
        return {}
    return {term: weight / total for term, weight in vector.items()}


def _query_model(query: Query) -> Dict[str, float]:
    return _normalize(dict(collections.Counter(tokenize(query.text))))


def _truncate(model: Dict[str, float], fb_terms: int) -> List[WeightedTerm]:
    # Zero-weight terms never survive truncation.
    ranked = sorted(((t, w) for t, w in model.items() if w > 0), key=lambda item: (-item[1], item[0]))[:fb_terms]
    kept = _normalize(dict(ranked))
    return [WeightedTerm(term, kept[term]) for term, _ in ranked]


def relevance_model(corpus: Corpus, query: Query, fb_docs: int, k1: float = DEFAULT_K1,
                    b: float = DEFAULT_B) -> Dict[str, float]:
    """
    P(w|R) proportional to sum over feedback docs of P(w|d) * prior(d), where P(w|d) = tf / length and the prior is
    the min-max normalized BM25 score of d within the feedback set.
    """
    feedback = bm25_retrieve(corpus, query, fb_docs, k1=k1, b=b)
    if not len(feedback):
        return {}
    priors = normalize_scores(feedback).scores()
    model: Dict[str, float] = collections.defaultdict(float)
    for doc_id, _ in feedback:
        terms = tokenize(corpus.text(doc_id))
        if not terms:
            continue
        for term, tf in collections.Counter(terms).items():
            model[term] += (tf / len(terms)) * priors[doc_id]
    return _normalize(model)


def rm3_expand(corpus: Corpus, query: Query, fb_docs: int = DEFAULT_FB_DOCS, fb_terms: int = DEFAULT_FB_TERMS,
               lam: float = DEFAULT_LAMBDA, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> List[WeightedTerm]:
    """
    RM3 term distribution: lam * P(w|q) + (1 - lam) * P(w|R), truncated to the fb_terms heaviest terms and
    renormalized. Ties are broken by ascending term.
    """
    if not 0 <= lam <= 1:
        raise ValueError('RM3 lambda must be in [0, 1]. lambda={}'.format(lam))
    if fb_docs < 1 or fb_terms < 1:
        raise ValueError('RM3 fb_docs and fb_terms must be >= 1. fb_docs={}, fb_terms={}'.format(fb_docs, fb_terms))
    query_model = _query_model(query)
    if lam == 1:
        return _truncate(query_model, fb_terms)
    feedback_model = relevance_model(corpus, query, fb_docs, k1=k1, b=b)
    if not feedback_model:
        logger.warning("No feedback documents, using query unigram model. query_id={}".format(query.id))
        return _truncate(query_model, fb_terms)
    vocabulary = set(query_model) | set(feedback_model)
    mixed = {term: lam * query_model.get(term, 0.0) + (1 - lam) * feedback_model.get(term, 0.0)
             for term in vocabulary}
    return _truncate(mixed, fb_terms)


def rm3_keywords(expansion: List[WeightedTerm], k: int, query: Query = None) -> List[Keyword]:
    """
    Top-k expansion terms not already in the query. Keyword.votes carries the 1-based rank position.
    """
    if k < 1:
        raise ValueError('Keyword count must be >= 1. k={}'.format(k))
    query_terms = set(tokenize(query.text)) if query is not None else set()
    ranked = sorted(expansion, key=lambda t: (-t.weight, t.term))
    kept = [t for t in ranked if t.term not in query_terms][:k]
    return [Keyword(t.term, votes=position) for position, t in enumerate(kept, start=1)]
