from __future__ import annotations

import hashlib
import logging
import os
from typing import Dict, List, Optional

from cache import ArtifactCache, digest
from corpus import Corpus, bm25_retrieve
from endpoints.generator import GeneratorEndpoint, SEPARATOR, QUESTION_TAG, KEYWORDS_MARKER, PASSAGE_MARKER
from models import GenerationTranscript, Query, canonical_form

logger = logging.getLogger('keygen')

Q2K = 'Q2K'
Q2D = 'Q2D'
D2K = 'D2K'
Q2D2K = 'Q2D2K'
PRF_D2K = 'PRF+D2K'
Q2K_FALLBACK = 'Q2K-fallback'

QUERY_PLACEHOLDER = '[user query]'
PASSAGE_PLACEHOLDER = '[retrieved passage]'
REQUIRED_PLACEHOLDERS = {
    Q2K: [QUERY_PLACEHOLDER],
    Q2D: [QUERY_PLACEHOLDER],
    D2K: [QUERY_PLACEHOLDER, PASSAGE_PLACEHOLDER],
}
TEMPLATE_FILES = {Q2K: 'q2k.txt', Q2D: 'q2d.txt', D2K: 'd2k.txt'}
DEFAULT_TEMPLATES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'prompts')

DEFAULT_DOCS_PER_ROUND = 2
DEFAULT_KEYWORDS_PER_DOC = 5
DEFAULT_ROUNDS = 3


class PromptTemplate:
    def __init__(self, name: str, body: str):
        if name not in REQUIRED_PLACEHOLDERS:
            raise ValueError('Unknown prompt template: {}. Available: {}'
                             .format(name, ', '.join(REQUIRED_PLACEHOLDERS)))
        missing = [p for p in REQUIRED_PLACEHOLDERS[name] if p not in body]
        if missing:
            raise ValueError('Prompt template {} is missing placeholders: {}'.format(name, missing))
        self.name = name
        self.body = body
        self.hash = hashlib.sha256(body.encode('utf-8')).hexdigest()


def load_template(name: str, directory: str = DEFAULT_TEMPLATES_DIR) -> PromptTemplate:
    if name not in TEMPLATE_FILES:
        raise ValueError('Unknown prompt template: {}'.format(name))
    # newline='' keeps the file byte-identical in the rendered prompt.
    with open(os.path.join(directory, TEMPLATE_FILES[name]), 'r', encoding='utf-8', newline='') as f:
        return PromptTemplate(name, f.read())


def load_templates(directory: str = DEFAULT_TEMPLATES_DIR) -> Dict[str, PromptTemplate]:
    return {name: load_template(name, directory) for name in TEMPLATE_FILES}


def render_prompt(template: PromptTemplate, query: Query, passage: Optional[str] = None) -> str:
    if template.name == D2K and passage is None:
        raise ValueError('D2K prompt requires a passage. query_id={}'.format(query.id))
    if template.name != D2K and passage is not None:
        raise ValueError('{} prompt does not take a passage. query_id={}'.format(template.name, query.id))
    prompt = template.body.replace(QUERY_PLACEHOLDER, query.text)
    if passage is not None:
        prompt = prompt.replace(PASSAGE_PLACEHOLDER, passage)
    return prompt


def _generated_text(raw_output: str) -> str:
    text = raw_output or ''
    for marker in (SEPARATOR, QUESTION_TAG):
        text = text.split(marker, 1)[0]
    return text


def parse_keywords(raw_output: str, limit: Optional[int] = None) -> List[str]:
    """
    Comma-separated keywords from the first generated line. Duplicates (after case-folding) keep the first
    surface form.
    """
    lines = [line.strip() for line in _generated_text(raw_output).splitlines() if line.strip()]
    line = lines[0] if lines else ''
    if line.startswith(KEYWORDS_MARKER):
        line = line[len(KEYWORDS_MARKER):]
    keywords = []
    seen = set()
    for part in line.split(','):
        surface = part.strip()
        if not surface or canonical_form(surface) in seen:
            continue
        seen.add(canonical_form(surface))
        keywords.append(surface)
    if not keywords:
        logger.warning("No keywords parsed from generator output. raw_output={!r}".format((raw_output or '')[:80]))
    return keywords[:limit] if limit is not None else keywords


def parse_document(raw_output: str) -> List[str]:
    passage = _generated_text(raw_output).strip()
    if passage.startswith(PASSAGE_MARKER):
        passage = passage[len(PASSAGE_MARKER):].strip()
    return [passage] if passage else []


def reparse(transcript: GenerationTranscript) -> GenerationTranscript:
    if transcript.strategy == Q2D:
        keywords, documents = [], parse_document(transcript.raw_output)
    else:
        keywords, documents = parse_keywords(transcript.raw_output, transcript.keyword_limit), []
    return GenerationTranscript(transcript.query_id, transcript.strategy, transcript.round, transcript.raw_output,
                                keywords, documents, slot=transcript.slot, seed=transcript.seed,
                                keyword_limit=transcript.keyword_limit, failed=transcript.failed,
                                error=transcript.error)


class Generation:
    """
    Shared plumbing for the strategies: template lookup, transcript caching and the endpoint retry loop.
    """

    def __init__(self, endpoint: GeneratorEndpoint, templates: Dict[str, PromptTemplate] = None,
                 cache: ArtifactCache = None, max_retries: int = 0):
        self.endpoint = endpoint
        self.templates = templates if templates is not None else load_templates()
        self.cache = cache if cache is not None else ArtifactCache(None)
        self.max_retries = max_retries

    def _generate(self, prompt: str, seed: int, query_id: str):
        error = None
        for attempt in range(self.max_retries + 1):
            try:
                return self.endpoint.generate(prompt, seed), None
            except Exception as e:
                error = str(e)
                logger.warning("Generator call failed. query_id={}, attempt={}, error={}"
                               .format(query_id, attempt + 1, e))
        return None, error

    def call(self, template_name: str, strategy: str, query: Query, round: int, slot: int, seed: int,
             passage: Optional[str] = None, keyword_limit: Optional[int] = None) -> GenerationTranscript:
        template = self.templates[template_name]
        prompt = render_prompt(template, query, passage)
        fingerprint = digest(self.endpoint.cache_identity, template.name, template.hash, prompt, seed)
        key = '{}__{}__r{}__s{}__{}'.format(query.id, strategy, round, slot, fingerprint[:16])
        cached = self.cache.get(key)
        if cached is not None:
            return GenerationTranscript.from_dict(cached)
        raw_output, error = self._generate(prompt, seed, query.id)
        if raw_output is None:
            return GenerationTranscript(query.id, strategy, round, '', slot=slot, seed=seed,
                                        keyword_limit=keyword_limit, failed=True, error=error)
        if template_name == Q2D:
            keywords, documents = [], parse_document(raw_output)
        else:
            keywords, documents = parse_keywords(raw_output, keyword_limit), []
        transcript = GenerationTranscript(query.id, strategy, round, raw_output, keywords, documents, slot=slot,
                                          seed=seed, keyword_limit=keyword_limit)
        self.cache.put(key, transcript.to_dict())
        return transcript


def _as_generation(source) -> Generation:
    if isinstance(source, Generation):
        return source
    return Generation(source)


def _require_counts(**counts):
    for name, value in counts.items():
        if value < 1:
            raise ValueError('{} must be >= 1. {}={}'.format(name, name, value))


def q2k(generation: Generation, query: Query, rounds: int = DEFAULT_ROUNDS) -> List[GenerationTranscript]:
    _require_counts(rounds=rounds)
    generation = _as_generation(generation)
    return [generation.call(Q2K, Q2K, query, r, 0, r - 1) for r in range(1, rounds + 1)]


def q2d(generation: Generation, query: Query, rounds: int = DEFAULT_ROUNDS) -> List[GenerationTranscript]:
    _require_counts(rounds=rounds)
    generation = _as_generation(generation)
    return [generation.call(Q2D, Q2D, query, r, 0, r - 1) for r in range(1, rounds + 1)]


def q2d2k(generation: Generation, query: Query, docs_per_round: int = DEFAULT_DOCS_PER_ROUND,
          keywords_per_doc: int = DEFAULT_KEYWORDS_PER_DOC,
          rounds: int = DEFAULT_ROUNDS) -> List[GenerationTranscript]:
    """
    Per round: docs_per_round Q2D calls, then one D2K call per generated document.
    """
    _require_counts(docs_per_round=docs_per_round, keywords_per_doc=keywords_per_doc, rounds=rounds)
    generation = _as_generation(generation)
    transcripts = []
    for r in range(1, rounds + 1):
        documents = []
        for slot in range(docs_per_round):
            seed = (r - 1) * docs_per_round + slot
            generated = generation.call(Q2D, Q2D, query, r, slot, seed)
            transcripts.append(generated)
            documents.extend((slot, seed, d) for d in generated.parsed_documents)
        for slot, seed, document in documents:
            transcripts.append(generation.call(D2K, Q2D2K, query, r, slot, seed, passage=document,
                                               keyword_limit=keywords_per_doc))
    return transcripts


def prf_d2k(generation: Generation, corpus: Corpus, query: Query, docs: int = DEFAULT_DOCS_PER_ROUND,
            keywords_per_doc: int = DEFAULT_KEYWORDS_PER_DOC, rounds: int = DEFAULT_ROUNDS,
            k1: float = None, b: float = None) -> List[GenerationTranscript]:
    """
    Like q2d2k with the top BM25 passages in place of generated documents. Falls back to Q2K when retrieval is empty.
    """
    _require_counts(docs=docs, keywords_per_doc=keywords_per_doc, rounds=rounds)
    generation = _as_generation(generation)
    bm25_params = {name: value for name, value in (('k1', k1), ('b', b)) if value is not None}
    retrieved = bm25_retrieve(corpus, query, docs, **bm25_params)
    passages = [corpus.text(doc_id) for doc_id in retrieved.doc_ids()]
    transcripts = []
    for r in range(1, rounds + 1):
        if not passages:
            logger.warning("No retrieved passages, falling back to Q2K. query_id={}, round={}".format(query.id, r))
            transcripts.append(generation.call(Q2K, Q2K_FALLBACK, query, r, 0, r - 1))
            continue
        for slot, passage in enumerate(passages):
            transcripts.append(generation.call(D2K, PRF_D2K, query, r, slot, (r - 1) * docs + slot,
                                               passage=passage, keyword_limit=keywords_per_doc))
    return transcripts
