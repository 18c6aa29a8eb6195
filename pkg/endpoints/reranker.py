from __future__ import annotations

import logging
import math
from abc import abstractmethod
from typing import List, Optional, Tuple

from corpus import Corpus, tokenize
from endpoints.endpoint import Endpoint, HTTPEndpoint

QUESTION_MARKER = 'Question:'
DOCUMENT_MARKER = 'Document:'


class Reranker(Endpoint):
    @abstractmethod
    def score(self, concatenated_input: str) -> float:
        pass

    def score_batch(self, inputs: List[str]) -> List[float]:
        return [self.score(i) for i in inputs]


def split_segments(concatenated_input: str) -> Tuple[str, str]:
    question_at = concatenated_input.find(QUESTION_MARKER)
    if question_at < 0:
        raise ValueError('Reranker input has no "{}" marker: {!r}'.format(QUESTION_MARKER, concatenated_input[:80]))
    document_at = concatenated_input.find(DOCUMENT_MARKER, question_at + len(QUESTION_MARKER))
    if document_at < 0:
        raise ValueError('Reranker input has no "{}" marker: {!r}'.format(DOCUMENT_MARKER, concatenated_input[:80]))
    question = concatenated_input[question_at + len(QUESTION_MARKER):document_at]
    document = concatenated_input[document_at + len(DOCUMENT_MARKER):]
    return question.strip(), document.strip()


class LexicalStandinReranker(Reranker):
    """
    Deterministic stand-in for a cross-encoder: sum of idf over the distinct question terms found in the document.
    Without a corpus every term weighs 1, i.e. the score is the shared-term count.
    """
    logger = logging.getLogger('reranker')

    def __init__(self, corpus: Optional[Corpus] = None):
        self.corpus = corpus

    @property
    def name(self) -> str:
        return 'lexical-standin-{}'.format('corpus' if self.corpus is not None else 'uniform')

    def idf(self, term: str) -> float:
        if self.corpus is None:
            return 1.0
        return self.corpus.idf(term)

    def score(self, concatenated_input: str) -> float:
        question, document = split_segments(concatenated_input)
        shared = set(tokenize(question)) & set(tokenize(document))
        return math.fsum(self.idf(term) for term in sorted(shared))


def lexical_standin_score(concatenated_input: str, corpus: Optional[Corpus] = None) -> float:
    return LexicalStandinReranker(corpus).score(concatenated_input)


class RemoteReranker(HTTPEndpoint, Reranker):
    logger = logging.getLogger('reranker')

    def __init__(self, url: str, token: str = None, batch_size: int = 512, **kwargs):
        super().__init__(url, token=token, **kwargs)
        if batch_size < 1:
            raise ValueError('Reranker batch size must be >= 1. batch_size={}'.format(batch_size))
        self.batch_size = batch_size

    def score(self, concatenated_input: str) -> float:
        return self.score_batch([concatenated_input])[0]

    def score_batch(self, inputs: List[str]) -> List[float]:
        scores = []
        for start in range(0, len(inputs), self.batch_size):
            batch = inputs[start:start + self.batch_size]
            body = self.post(dict(inputs=batch))
            batch_scores = body.get('scores')
            if batch_scores is None or len(batch_scores) != len(batch):
                raise ValueError('Reranker returned {} scores for {} inputs. url={}'
                                 .format(None if batch_scores is None else len(batch_scores), len(batch), self.url))
            for value in batch_scores:
                value = float(value)
                if not math.isfinite(value):
                    raise ValueError('Reranker returned a non-finite score. url={}, score={}'.format(self.url, value))
                scores.append(value)
        self.logger.debug("Scored {} inputs in {} requests.".format(len(inputs),
                                                                      math.ceil(len(inputs) / self.batch_size)))
        return scores
