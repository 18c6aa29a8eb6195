from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np
from scipy.special import softmax
from scipy.stats import entropy, wasserstein_distance

from models import Keyword, RankedList

logger = logging.getLogger('fusion')

RECIPROCAL_RANK = 'reciprocal_rank'
MEAN = 'mean'
TOPK_OVERLAP = 'topk_overlap'
ENTROPY = 'entropy'
KL = 'kl'
WASSERSTEIN = 'wasserstein'
WEIGHTINGS = [RECIPROCAL_RANK, MEAN, TOPK_OVERLAP, ENTROPY, KL, WASSERSTEIN]
ALT_WEIGHTINGS = [TOPK_OVERLAP, ENTROPY, KL, WASSERSTEIN]

CONVEX = 'convex'
ADDITIVE = 'additive'


class FusionConfig:
    def __init__(self, weighting: str = RECIPROCAL_RANK, smoothingC: float = 0.0, originalCoefficient: float = 0.3,
                 overlapK: int = 10, originalMix: str = CONVEX):
        self.weighting = weighting
        self.smoothingC = smoothingC
        self.originalCoefficient = originalCoefficient
        self.overlapK = overlapK
        self.originalMix = originalMix

    def validate(self):
        if self.weighting not in WEIGHTINGS:
            raise AssertionError("ABORT: Unknown fusion weighting: {}. Available: {}"
                                 .format(self.weighting, ', '.join(WEIGHTINGS)))
        if self.smoothingC < 0:
            raise AssertionError("ABORT: fusion.smoothingC must be >= 0. smoothingC={}".format(self.smoothingC))
        if not 0 <= self.originalCoefficient <= 1:
            raise AssertionError("ABORT: fusion.originalCoefficient must be in [0, 1]. originalCoefficient={}"
                                 .format(self.originalCoefficient))
        if self.overlapK < 1:
            raise AssertionError("ABORT: fusion.overlapK must be >= 1. overlapK={}".format(self.overlapK))
        if self.originalMix not in (CONVEX, ADDITIVE):
            raise AssertionError("ABORT: fusion.originalMix must be one of [convex | additive]. originalMix={}"
                                 .format(self.originalMix))


class FusionInput:
    def __init__(self, original_list: RankedList, expansion_lists: List[Tuple[Keyword, RankedList]]):
        if not len(original_list):
            raise ValueError('Original ranked list is empty. query_id={}'.format(original_list.query_id))
        self.original_list = original_list
        self.expansion_lists = expansion_lists
        self.anchor_doc = original_list.entries[0][0]
        doc_set = set(original_list.doc_ids())
        for keyword, ranked in expansion_lists:
            if set(ranked.doc_ids()) != doc_set:
                raise ValueError('Expansion list does not share the candidate set. query_id={}, keyword={}'
                                 .format(original_list.query_id, keyword.surface))


def normalize_scores(ranked: RankedList) -> RankedList:
    """
    Min-max normalization into [0, 1]. Constant-score lists map to 0.5 everywhere.
    """
    if not len(ranked):
        raise ValueError('Cannot normalize an empty ranked list. query_id={}'.format(ranked.query_id))
    scores = np.array([s for _, s in ranked.entries], dtype=float)
    low, high = scores.min(), scores.max()
    if high == low:
        normalized = np.full(len(scores), 0.5)
    else:
        normalized = (scores - low) / (high - low)
    return RankedList(ranked.query_id, zip(ranked.doc_ids(), normalized.tolist()), tag=ranked.tag,
                      status=ranked.status)


def reciprocal_rank_weight(expansion_list: RankedList, anchor_doc: str, smoothing_c: float = 0.0) -> float:
    return 1.0 / (smoothing_c + expansion_list.rank_of(anchor_doc))


def _aligned(ranked: RankedList, doc_ids: List[str]) -> np.ndarray:
    scores = normalize_scores(ranked).scores()
    return np.array([scores[d] for d in doc_ids], dtype=float)


def alt_weight(expansion_list: RankedList, original_list: RankedList, method: str,
               config: FusionConfig = None) -> float:
    config = config or FusionConfig()
    doc_ids = sorted(original_list.doc_ids())
    if sorted(expansion_list.doc_ids()) != doc_ids:
        raise ValueError('Expansion and original lists do not share a document set. query_id={}'
                         .format(original_list.query_id))
    if method == TOPK_OVERLAP:
        k = min(config.overlapK, len(original_list))
        overlap = set(expansion_list.doc_ids()[:k]) & set(original_list.doc_ids()[:k])
        return len(overlap) / k
    expansion = _aligned(expansion_list, doc_ids)
    if method == ENTROPY:
        return 1.0 / (1.0 + float(entropy(softmax(expansion))))
    original = _aligned(original_list, doc_ids)
    if method == KL:
        return 1.0 / (1.0 + float(entropy(softmax(expansion), softmax(original))))
    if method == WASSERSTEIN:
        return 1.0 / (1.0 + float(wasserstein_distance(np.sort(expansion), np.sort(original))))
    raise ValueError('Unknown weighting method: {}'.format(method))


def expansion_weight(expansion_list: RankedList, fusion_input: FusionInput, config: FusionConfig,
                     count: int) -> float:
    if config.weighting == MEAN:
        return 1.0 / count
    if config.weighting == RECIPROCAL_RANK:
        return reciprocal_rank_weight(expansion_list, fusion_input.anchor_doc, config.smoothingC)
    return alt_weight(expansion_list, fusion_input.original_list, config.weighting, config)


def fuse(fusion_input: FusionInput, config: FusionConfig = None) -> RankedList:
    """
    Weighted mean of min-max normalized expansion scores, mixed with the normalized original list.
    """
    config = config or FusionConfig()
    original = fusion_input.original_list
    if not fusion_input.expansion_lists:
        return original
    # Fixed summation order keeps the result independent of the input order.
    expansions = sorted(fusion_input.expansion_lists, key=lambda pair: (pair[0].canonical, pair[1].tag))
    doc_ids = sorted(original.doc_ids())
    count = len(expansions)
    weights = np.array([expansion_weight(ranked, fusion_input, config, count) for _, ranked in expansions])
    weight_sum = weights.sum()
    if weight_sum <= 0:
        raise ValueError('Fusion weights sum to zero. query_id={}, weighting={}'
                         .format(original.query_id, config.weighting))
    matrix = np.vstack([_aligned(ranked, doc_ids) for _, ranked in expansions])
    expansion_scores = np.clip((weights[:, None] * matrix).sum(axis=0) / weight_sum, 0.0, 1.0)
    original_scores = _aligned(original, doc_ids)
    beta = config.originalCoefficient
    if config.originalMix == ADDITIVE:
        final = expansion_scores + beta * original_scores
    else:
        final = np.clip((1.0 - beta) * expansion_scores + beta * original_scores, 0.0, 1.0)
    logger.debug("Fused {} expansions. query_id={}, weights={}".format(count, original.query_id, weights.tolist()))
    return RankedList.from_scores(original.query_id, dict(zip(doc_ids, final.tolist())), tag='gff')
