import logging
from typing import Dict, List, Tuple

from corpus import tokenize
from models import ExpansionSet, GenerationTranscript, Keyword, Query, WeightedTerm, STATUS_EMPTY, \
    canonical_form
from prf import rm3_keywords

logger = logging.getLogger('keyword_filter')

DEFAULT_TOP_K = 3
SELF_CONSISTENCY = 'self-consistency'
RM3 = 'RM3'


def tally_votes(transcripts: List[GenerationTranscript]) -> Tuple[Dict[str, int], Dict[str, str], Dict[str, tuple]]:
    """
    Counts each canonical keyword at most once per transcript. Returns (votes, surface form, first occurrence).
    First occurrence is (round, transcript position, keyword position) with transcripts taken in round order.
    """
    votes: Dict[str, int] = {}
    surfaces: Dict[str, str] = {}
    first_seen: Dict[str, tuple] = {}
    ordered = sorted(enumerate(transcripts), key=lambda item: (item[1].round, item[0]))
    for position, transcript in ordered:
        if transcript.failed:
            continue
        present = set()
        for index, surface in enumerate(transcript.parsed_keywords):
            canonical = canonical_form(surface)
            if not canonical or canonical in present:
                continue
            present.add(canonical)
            votes[canonical] = votes.get(canonical, 0) + 1
            if canonical not in first_seen:
                first_seen[canonical] = (transcript.round, position, index)
                surfaces[canonical] = surface.strip()
    return votes, surfaces, first_seen


def self_consistency_filter(transcripts: List[GenerationTranscript], top_k: int = DEFAULT_TOP_K,
                            query: Query = None, source_strategy: str = SELF_CONSISTENCY) -> ExpansionSet:
    """
    Majority vote over transcripts: top_k keywords by vote count, ties broken by first occurrence. Keywords equal to
    a query token are dropped after voting.
    """
    if top_k < 1:
        raise ValueError('Filter top_k must be >= 1. top_k={}'.format(top_k))
    query_id = query.id if query is not None else (transcripts[0].query_id if transcripts else '')
    votes, surfaces, first_seen = tally_votes(transcripts)
    query_tokens = set(tokenize(query.text)) if query is not None else set()
    ranked = sorted(votes, key=lambda c: (-votes[c], first_seen[c]))
    kept = [c for c in ranked if c not in query_tokens][:top_k]
    keywords = [Keyword(surfaces[c], votes=votes[c], canonical=c) for c in kept]
    if not keywords:
        logger.warning("No keywords survived filtering. query_id={}, transcripts={}"
                       .format(query_id, len(transcripts)))
        return ExpansionSet(query_id, [], source_strategy, status=STATUS_EMPTY)
    logger.debug("Selected keywords. query_id={}, keywords={}".format(query_id, [str(k) for k in keywords]))
    return ExpansionSet(query_id, keywords, source_strategy)


def rm3_weight_filter(weighted_terms: List[WeightedTerm], top_k: int = DEFAULT_TOP_K,
                      query: Query = None) -> ExpansionSet:
    """
    Highest-weight RM3 terms. Keyword.votes holds the rank position, not a vote count.
    """
    query_id = query.id if query is not None else ''
    keywords = rm3_keywords(weighted_terms, top_k, query=query)
    if not keywords:
        logger.warning("No RM3 terms available. query_id={}".format(query_id))
        return ExpansionSet(query_id, [], RM3, status=STATUS_EMPTY)
    return ExpansionSet(query_id, keywords, RM3)
