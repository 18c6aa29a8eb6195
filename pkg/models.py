from __future__ import annotations

from typing import Dict, Iterable, List, Optional, Tuple

STATUS_OK = 'ok'
STATUS_EMPTY_QUERY = 'empty_query'
STATUS_EMPTY = 'empty'


class Document:
    def __init__(self, id: str, text: str, length: int = 0):
        self.id = id
        self.text = text
        self.length = length

    def to_dict(self) -> dict:
        return dict(_id=self.id, text=self.text, length=self.length)


class Query:
    def __init__(self, id: str, text: str):
        if text is None or not text.strip():
            raise ValueError('Query text must not be empty. query_id={}'.format(id))
        self.id = id
        self.text = text


class RankedList:
    """
    Ordered (doc_id, score) entries for one query. Ranks are 1-based list positions.
    """

    def __init__(self, query_id: str, entries: Iterable[Tuple[str, float]] = (), tag: str = '',
                 status: str = STATUS_OK, score_text: Optional[List[str]] = None):
        self.query_id = query_id
        self.entries: List[Tuple[str, float]] = [(doc_id, float(score)) for doc_id, score in entries]
        self.tag = tag
        self.status = status
        # Score tokens as read from a run file, written back verbatim.
        self.score_text = list(score_text) if score_text is not None else None
        self._validate()

    @staticmethod
    def from_scores(query_id: str, scores: Dict[str, float], tag: str = '', depth: Optional[int] = None,
                    status: str = STATUS_OK) -> RankedList:
        # Descending score, ascending doc id at equal score.
        ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
        if depth is not None:
            ordered = ordered[:depth]
        return RankedList(query_id, ordered, tag=tag, status=status)

    def _validate(self):
        if self.score_text is not None and len(self.score_text) != len(self.entries):
            raise ValueError('Score text does not match entries. query_id={}, entries={}, scores={}'
                             .format(self.query_id, len(self.entries), len(self.score_text)))
        seen = set()
        previous = None
        for doc_id, score in self.entries:
            if doc_id in seen:
                raise ValueError('Duplicate document in ranked list. query_id={}, doc_id={}'
                                 .format(self.query_id, doc_id))
            seen.add(doc_id)
            if previous is not None and score > previous:
                raise ValueError('Ranked list scores must be non-increasing. query_id={}, doc_id={}'
                                 .format(self.query_id, doc_id))
            previous = score

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def doc_ids(self) -> List[str]:
        return [doc_id for doc_id, _ in self.entries]

    def scores(self) -> Dict[str, float]:
        return dict(self.entries)

    def rank_of(self, doc_id: str) -> int:
        for i, (d, _) in enumerate(self.entries):
            if d == doc_id:
                return i + 1
        raise ValueError('Document not in ranked list. query_id={}, doc_id={}'.format(self.query_id, doc_id))

    def with_tag(self, tag: str) -> RankedList:
        return RankedList(self.query_id, self.entries, tag=tag, status=self.status, score_text=self.score_text)

    def to_dict(self) -> dict:
        return dict(query_id=self.query_id, tag=self.tag, status=self.status,
                    entries=[[doc_id, score] for doc_id, score in self.entries])

    @staticmethod
    def from_dict(d: dict) -> RankedList:
        return RankedList(d['query_id'], [(e[0], e[1]) for e in d['entries']], tag=d.get('tag', ''),
                          status=d.get('status', STATUS_OK))

    def __eq__(self, other):
        if not isinstance(other, RankedList):
            return NotImplemented
        return self.query_id == other.query_id and self.entries == other.entries and self.tag == other.tag

    def __repr__(self):
        return 'RankedList(query_id={}, tag={}, entries={})'.format(self.query_id, self.tag, self.entries[:5])


class WeightedTerm:
    def __init__(self, term: str, weight: float):
        self.term = term
        self.weight = weight

    def __eq__(self, other):
        if not isinstance(other, WeightedTerm):
            return NotImplemented
        return self.term == other.term and self.weight == other.weight

    def __repr__(self):
        return 'WeightedTerm({}, {})'.format(self.term, self.weight)


def canonical_form(keyword: str) -> str:
    return keyword.strip().casefold()


class Keyword:
    def __init__(self, surface: str, votes: int = 1, canonical: str = None):
        self.surface = surface
        self.canonical = canonical if canonical is not None else canonical_form(surface)
        self.votes = votes

    def __eq__(self, other):
        if not isinstance(other, Keyword):
            return NotImplemented
        return (self.canonical, self.surface, self.votes) == (other.canonical, other.surface, other.votes)

    def __hash__(self):
        return hash((self.canonical, self.surface, self.votes))

    def __repr__(self):
        return 'Keyword({}, votes={})'.format(self.surface, self.votes)


class ExpansionSet:
    def __init__(self, query_id: str, keywords: List[Keyword], source_strategy: str, status: str = STATUS_OK):
        self.query_id = query_id
        self.keywords = keywords
        self.source_strategy = source_strategy
        self.status = status

    def __len__(self):
        return len(self.keywords)

    def surfaces(self) -> List[str]:
        return [k.surface for k in self.keywords]

    def to_dict(self) -> dict:
        return dict(query_id=self.query_id, source_strategy=self.source_strategy, status=self.status,
                    keywords=[dict(canonical=k.canonical, surface=k.surface, votes=k.votes) for k in self.keywords])


class GenerationTranscript:
    def __init__(self, query_id: str, strategy: str, round: int, raw_output: str,
                 parsed_keywords: List[str] = None, parsed_documents: List[str] = None, slot: int = 0,
                 seed: int = 0, keyword_limit: Optional[int] = None, failed: bool = False, error: str = None):
        if round < 1:
            raise ValueError('Transcript round must be >= 1. round={}'.format(round))
        self.query_id = query_id
        self.strategy = strategy
        self.round = round
        self.slot = slot
        self.seed = seed
        self.raw_output = raw_output
        self.parsed_keywords = parsed_keywords if parsed_keywords is not None else []
        self.parsed_documents = parsed_documents if parsed_documents is not None else []
        self.keyword_limit = keyword_limit
        self.failed = failed
        self.error = error

    def to_dict(self) -> dict:
        return dict(query_id=self.query_id, strategy=self.strategy, round=self.round, slot=self.slot,
                    seed=self.seed, raw_output=self.raw_output, parsed_keywords=self.parsed_keywords,
                    parsed_documents=self.parsed_documents, keyword_limit=self.keyword_limit,
                    failed=self.failed, error=self.error)

    @staticmethod
    def from_dict(d: dict) -> GenerationTranscript:
        return GenerationTranscript(**d)

    def __eq__(self, other):
        if not isinstance(other, GenerationTranscript):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        return 'GenerationTranscript(query_id={}, strategy={}, round={}, slot={}, keywords={})'.format(
            self.query_id, self.strategy, self.round, self.slot, self.parsed_keywords)
