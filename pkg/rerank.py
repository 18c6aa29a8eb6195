import logging
import math
import time
from typing import Optional, Union

from corpus import Corpus
from endpoints.reranker import Reranker
from models import Keyword, Query, RankedList

logger = logging.getLogger('rerank')

PLAIN = 'plain'
EXPANDED = 'expanded'
DEFAULT_MAX_DOC_TOKENS = 512


class ConcatTemplate:
    def __init__(self, form: str = PLAIN, max_doc_tokens: int = DEFAULT_MAX_DOC_TOKENS):
        if form not in (PLAIN, EXPANDED):
            raise ValueError('Unknown concat form: {}'.format(form))
        self.form = form
        self.max_doc_tokens = max_doc_tokens

    @staticmethod
    def for_expansion(expansion: Optional[str], max_doc_tokens: int = DEFAULT_MAX_DOC_TOKENS):
        return ConcatTemplate(EXPANDED if expansion else PLAIN, max_doc_tokens=max_doc_tokens)

    def truncate(self, text: str) -> str:
        tokens = text.split()
        if len(tokens) <= self.max_doc_tokens:
            return text
        return ' '.join(tokens[:self.max_doc_tokens])

    def render(self, query_text: str, document_text: str, expansion: Optional[str] = None) -> str:
        if self.form == EXPANDED:
            if not expansion:
                raise ValueError('Expanded concat template requires an expansion.')
            return 'Question: {} {} Document: {}'.format(query_text, expansion, self.truncate(document_text))
        return 'Question: {} Document: {}'.format(query_text, self.truncate(document_text))


def expansion_text(keyword: Union[Keyword, str, None]) -> Optional[str]:
    if keyword is None:
        return None
    if isinstance(keyword, Keyword):
        return keyword.surface
    return keyword


def rerank_list(reranker: Reranker, corpus: Corpus, query: Query, candidates: RankedList,
                keyword: Union[Keyword, str, None] = None,
                max_doc_tokens: int = DEFAULT_MAX_DOC_TOKENS) -> RankedList:
    """
    Scores every candidate with the plain or expanded template. Any scoring failure fails the whole list.
    """
    if not len(candidates):
        raise ValueError('Cannot rerank an empty candidate list. query_id={}'.format(query.id))
    expansion = expansion_text(keyword)
    template = ConcatTemplate.for_expansion(expansion, max_doc_tokens=max_doc_tokens)
    doc_ids = candidates.doc_ids()
    inputs = [template.render(query.text, corpus.text(doc_id), expansion) for doc_id in doc_ids]
    start_time_ms = round(time.time() * 1000)
    try:
        scores = reranker.score_batch(inputs)
    except Exception as e:
        raise ValueError('Error reranking candidates: query_id={}, expansion={!r}, error={}'
                         .format(query.id, expansion, e)) from e
    if len(scores) != len(doc_ids):
        raise ValueError('Reranker returned {} scores for {} candidates. query_id={}'
                         .format(len(scores), len(doc_ids), query.id))
    for doc_id, score in zip(doc_ids, scores):
        if not math.isfinite(score):
            raise ValueError('Non-finite reranker score. query_id={}, doc_id={}'.format(query.id, doc_id))
    end_time_ms = round(time.time() * 1000)
    logger.debug("Reranking took {}s. query_id={}, expansion={!r}, candidates={}"
                 .format((end_time_ms - start_time_ms) / 1000, query.id, expansion, len(doc_ids)))
    tag = 'rerank' if expansion is None else 'rerank:{}'.format('_'.join(expansion.split()))
    return RankedList.from_scores(query.id, dict(zip(doc_ids, scores)), tag=tag)
