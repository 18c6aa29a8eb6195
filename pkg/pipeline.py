from __future__ import annotations

import logging
import os
import threading
import time
from multiprocessing.pool import ThreadPool
from typing import Dict, List, Optional, Tuple

import keygen
from cache import ArtifactCache, digest
from config import PipelineConfig
from corpus import Corpus, bm25_retrieve, build_index, load_documents, load_queries
from endpoints.generator import GeneratorEndpoint, RemoteGenerator, ScriptedGenerator
from endpoints.reranker import LexicalStandinReranker, RemoteReranker, Reranker
from evaluation import Qrels, Run, evaluate_run, read_qrels, write_run
from fusion import FusionConfig, FusionInput, fuse
from keyword_filter import rm3_weight_filter, self_consistency_filter
from models import ExpansionSet, GenerationTranscript, Keyword, Query, RankedList, STATUS_EMPTY, canonical_form
from prf import rm3_expand
from rerank import rerank_list

logger = logging.getLogger('pipeline')

FUSION = 'fusion'
CONCAT = 'concat'
NONE = 'none'

REPORT_HEADER = ['dataset', 'strategy', 'weighting', 'ndcg@10']
SWEEP_HEADER = ['k', 'fusion', 'concat']

SOURCE_LABELS = {'q2k': keygen.Q2K, 'q2d': keygen.Q2D, 'q2d2k': keygen.Q2D2K, 'prf_d2k': keygen.PRF_D2K}


def build_generator(config: PipelineConfig) -> GeneratorEndpoint:
    settings = config.generator
    if settings.type == 'remote':
        return RemoteGenerator(settings.url, token=os.environ.get(settings.tokenEnv), max_tokens=settings.maxTokens,
                               temperature=settings.temperature, timeout=settings.timeout,
                               max_in_flight=settings.maxInFlight)
    return ScriptedGenerator.from_file(settings.scriptPath, seed=config.seed, selection=settings.selection)


def build_reranker(config: PipelineConfig, corpus: Corpus) -> Reranker:
    settings = config.reranker
    if settings.type == 'remote':
        return RemoteReranker(settings.url, token=os.environ.get(settings.tokenEnv), batch_size=settings.batchSize,
                              timeout=settings.timeout, max_in_flight=settings.maxInFlight)
    return LexicalStandinReranker(corpus if settings.idf == 'corpus' else None)


class RunReport:
    def __init__(self, dataset: str, strategy: str, weighting: str, top_k: int, ndcg: Optional[float] = None,
                 per_query: Dict[str, float] = None, flagged: List[str] = None, failures: Dict[str, str] = None,
                 elapsed: float = 0.0):
        self.dataset = dataset
        self.strategy = strategy
        self.weighting = weighting
        self.top_k = top_k
        self.ndcg = ndcg
        self.per_query = per_query if per_query is not None else {}
        self.flagged = flagged if flagged is not None else []
        self.failures = failures if failures is not None else {}
        self.elapsed = elapsed

    def row(self) -> List[str]:
        return [self.dataset, self.strategy, self.weighting, '' if self.ndcg is None else '{:.4f}'.format(self.ndcg)]

    def write(self, path: str):
        """
        Appends one TSV row, writing the header first when the file is new.
        """
        new_file = not os.path.exists(path)
        with open(path, 'a', encoding='utf-8') as f:
            if new_file:
                f.write('\t'.join(REPORT_HEADER) + '\n')
            f.write('\t'.join(self.row()) + '\n')
        logger.info("Wrote report. path={}".format(path))


class SweepRow:
    def __init__(self, k: int, fusion_ndcg: float, concat_ndcg: float):
        self.k = k
        self.fusion_ndcg = fusion_ndcg
        self.concat_ndcg = concat_ndcg

    def __repr__(self):
        return 'SweepRow(k={}, fusion={}, concat={})'.format(self.k, self.fusion_ndcg, self.concat_ndcg)


def write_sweep(rows: List[SweepRow], path: str):
    with open(path, 'w', encoding='utf-8') as f:
        f.write('\t'.join(SWEEP_HEADER) + '\n')
        for row in rows:
            f.write('{}\t{:.4f}\t{:.4f}\n'.format(row.k, row.fusion_ndcg, row.concat_ndcg))
    logger.info("Wrote sweep table. path={}, rows={}".format(path, len(rows)))


class GffPipeline:
    """
    Per-query stages: BM25 candidates, plain rerank, keyword generation and filtering, one rerank per kept keyword,
    fusion. Candidates, transcripts and reranked lists are cached on disk and memoized for the lifetime of the
    pipeline, so repeated runs with a different top_k only redo filtering and fusion.
    """

    def __init__(self, config: PipelineConfig, generator: GeneratorEndpoint = None, reranker: Reranker = None,
                 corpus: Corpus = None):
        self.config = config
        self.corpus = corpus if corpus is not None else build_index(load_documents(config.corpusPath))
        self.queries = load_queries(config.queriesPath)
        self.qrels: Optional[Qrels] = read_qrels(config.qrelsPath) if config.qrelsPath else None
        if generator is None and config.uses_generator():
            generator = build_generator(config)
        self.generator = generator
        self.reranker = reranker if reranker is not None else build_reranker(config, self.corpus)

        cache_dir = config.cacheDir
        self.candidate_cache = ArtifactCache(os.path.join(cache_dir, 'candidates') if cache_dir else None)
        self.rerank_cache = ArtifactCache(os.path.join(cache_dir, 'reranks') if cache_dir else None)
        self.transcript_cache = ArtifactCache(os.path.join(cache_dir, 'transcripts') if cache_dir else None)

        self.generation = None
        if generator is not None:
            templates_dir = config.keygen.templatesDir or keygen.DEFAULT_TEMPLATES_DIR
            self.generation = keygen.Generation(generator, templates=keygen.load_templates(templates_dir),
                                                cache=self.transcript_cache, max_retries=config.keygen.maxRetries)

        self._memo: Dict[tuple, object] = {}
        self._memo_lock = threading.Lock()

    def _memoized(self, key: tuple, compute):
        with self._memo_lock:
            if key in self._memo:
                return self._memo[key]
        value = compute()
        with self._memo_lock:
            return self._memo.setdefault(key, value)

    def candidates(self, query: Query) -> RankedList:
        return self._memoized(('candidates', query.id), lambda: self._candidates(query))

    def _candidates(self, query: Query) -> RankedList:
        bm25 = self.config.bm25
        key = '{}__{}'.format(query.id, digest(self.corpus.doc_count, self.config.corpusPath, query.text,
                                               self.config.candidateDepth, bm25.k1, bm25.b)[:16])
        cached = self.candidate_cache.get(key)
        if cached is not None:
            return RankedList.from_dict(cached)
        ranked = bm25_retrieve(self.corpus, query, self.config.candidateDepth, k1=bm25.k1, b=bm25.b)
        self.candidate_cache.put(key, ranked.to_dict())
        return ranked

    def rerank(self, query: Query, candidates: RankedList, expansion: Optional[str] = None) -> RankedList:
        return self._memoized(('rerank', query.id, expansion), lambda: self._rerank(query, candidates, expansion))

    def _rerank(self, query: Query, candidates: RankedList, expansion: Optional[str]) -> RankedList:
        max_doc_tokens = self.config.reranker.maxDocTokens
        key = '{}__{}'.format(query.id, digest(self.reranker.name, query.text, expansion, candidates.doc_ids(),
                                               max_doc_tokens)[:16])
        cached = self.rerank_cache.get(key)
        if cached is not None:
            return RankedList.from_dict(cached)
        ranked = rerank_list(self.reranker, self.corpus, query, candidates, keyword=expansion,
                             max_doc_tokens=max_doc_tokens)
        self.rerank_cache.put(key, ranked.to_dict())
        return ranked

    def plain(self, query: Query) -> RankedList:
        return self.rerank(query, self.candidates(query))

    def transcripts(self, query: Query, strategy: str) -> List[GenerationTranscript]:
        return self._memoized(('transcripts', query.id, strategy), lambda: self._transcripts(query, strategy))

    def _transcripts(self, query: Query, strategy: str) -> List[GenerationTranscript]:
        if self.generation is None:
            raise ValueError('Strategy {} requires a generator.'.format(strategy))
        settings = self.config.keygen
        start_time_ms = round(time.time() * 1000)
        if strategy == 'q2k':
            transcripts = keygen.q2k(self.generation, query, rounds=settings.rounds)
        elif strategy == 'q2d':
            transcripts = keygen.q2d(self.generation, query, rounds=settings.rounds)
        elif strategy == 'q2d2k':
            transcripts = keygen.q2d2k(self.generation, query, docs_per_round=settings.docsPerRound,
                                       keywords_per_doc=settings.keywordsPerDoc, rounds=settings.rounds)
        elif strategy == 'prf_d2k':
            transcripts = keygen.prf_d2k(self.generation, self.corpus, query, docs=settings.docsPerRound,
                                         keywords_per_doc=settings.keywordsPerDoc, rounds=settings.rounds,
                                         k1=self.config.bm25.k1, b=self.config.bm25.b)
        else:
            raise ValueError('Strategy {} does not generate transcripts.'.format(strategy))
        end_time_ms = round(time.time() * 1000)
        failed = [t for t in transcripts if t.failed]
        if failed and len(failed) == len(transcripts):
            raise ValueError('Every generator call failed. query_id={}, error={}'.format(query.id, failed[-1].error))
        logger.debug("Generation took {}s. query_id={}, strategy={}, transcripts={}, failed={}"
                     .format((end_time_ms - start_time_ms) / 1000, query.id, strategy, len(transcripts),
                             len(failed)))
        return transcripts

    def expansions(self, query: Query, strategy: str, top_k: int) -> ExpansionSet:
        if strategy == NONE:
            return ExpansionSet(query.id, [], NONE)
        if strategy == 'rm3':
            prf = self.config.prf
            terms = self._memoized(('rm3', query.id), lambda: rm3_expand(
                self.corpus, query, fb_docs=prf.fbDocs, fb_terms=prf.fbTerms, lam=prf.fbLambda,
                k1=self.config.bm25.k1, b=self.config.bm25.b))
            return rm3_weight_filter(terms, top_k, query=query)
        transcripts = self.transcripts(query, strategy)
        if strategy == 'q2d':
            return self._passages(query, transcripts, top_k)
        return self_consistency_filter(transcripts, top_k, query=query, source_strategy=SOURCE_LABELS[strategy])

    @staticmethod
    def _passages(query: Query, transcripts: List[GenerationTranscript], top_k: int) -> ExpansionSet:
        # Each generated passage is one expansion, taken in round order.
        passages = []
        seen = set()
        for transcript in sorted(transcripts, key=lambda t: (t.round, t.slot)):
            for passage in transcript.parsed_documents:
                if canonical_form(passage) not in seen:
                    seen.add(canonical_form(passage))
                    passages.append(Keyword(passage))
        expansion = ExpansionSet(query.id, passages[:top_k], keygen.Q2D)
        if not passages:
            logger.warning("No generated passages. query_id={}".format(query.id))
            expansion.status = STATUS_EMPTY
        return expansion

    def fused(self, query: Query, strategy: str, top_k: int) -> RankedList:
        candidates = self.candidates(query)
        if not len(candidates):
            return candidates
        plain = self.plain(query)
        expansion = self.expansions(query, strategy, top_k)
        lists = [(keyword, self.rerank(query, candidates, keyword.surface)) for keyword in expansion.keywords]
        return fuse(FusionInput(plain, lists), self.config.fusion)

    def concatenated(self, query: Query, strategy: str, top_k: int) -> RankedList:
        candidates = self.candidates(query)
        if not len(candidates):
            return candidates
        expansion = self.expansions(query, strategy, top_k)
        if not expansion.keywords:
            return self.plain(query)
        return self.rerank(query, candidates, ' '.join(expansion.surfaces()))

    def process(self, query: Query, mode: str, strategy: str, top_k: int) -> Tuple[RankedList, Optional[str]]:
        """
        Never raises: a failed query falls back to the plain rerank, or to BM25 order if reranking itself failed.
        """
        try:
            if mode == CONCAT:
                return self.concatenated(query, strategy, top_k), None
            return self.fused(query, strategy, top_k), None
        except Exception as e:
            logger.error("Query failed, falling back to plain rerank. query_id={}, error={}".format(query.id, e))
            try:
                return self.plain(query), str(e)
            except Exception as plain_error:
                logger.error("Plain rerank failed, falling back to BM25. query_id={}, error={}"
                             .format(query.id, plain_error))
                try:
                    return self.candidates(query), str(e)
                except Exception:
                    return RankedList(query.id, [], tag='bm25', status='failed'), str(e)

    def run(self, mode: str = None, strategy: str = None, top_k: int = None) -> Tuple[Run, RunReport]:
        mode = mode or self.config.mode
        strategy = strategy or self.config.keyword_strategy()
        top_k = top_k or self.config.topK
        start_time_ms = round(time.time() * 1000)
        arg_list = [(query, mode, strategy, top_k) for query in self.queries]
        if self.config.workers > 1:
            with ThreadPool(self.config.workers) as pool:
                results = pool.starmap(self.process, arg_list)
        else:
            results = [self.process(*args) for args in arg_list]
        end_time_ms = round(time.time() * 1000)

        run = Run()
        failures = {}
        for query, (ranked, error) in zip(self.queries, results):
            run.add(ranked)
            if error is not None:
                failures[query.id] = error
        label = self.config.strategy if strategy == self.config.keyword_strategy() else strategy
        weighting = CONCAT if mode == CONCAT else (NONE if strategy == NONE else self.config.fusion.weighting)
        report = RunReport(self.config.dataset, label, weighting, top_k, failures=failures,
                           elapsed=(end_time_ms - start_time_ms) / 1000)
        if self.qrels is not None:
            report.ndcg, report.per_query, report.flagged = evaluate_run(run, self.qrels)
        logger.info("Processing {} queries took {}s. mode={}, strategy={}, top_k={}, failures={}, ndcg@10={}"
                    .format(len(self.queries), report.elapsed, mode, strategy, top_k, len(failures), report.ndcg))
        return run, report


def run_tag(config: PipelineConfig, mode: str = None) -> str:
    return 'gff.{}.{}'.format(config.strategy, mode or config.mode)


def run_pipeline(config: PipelineConfig, generator: GeneratorEndpoint = None, reranker: Reranker = None,
                 pipeline: GffPipeline = None) -> Tuple[Run, RunReport]:
    pipeline = pipeline or GffPipeline(config, generator=generator, reranker=reranker)
    mode = CONCAT if config.strategy == 'concat_topk' else config.mode
    run, report = pipeline.run(mode=mode)
    write_run(run, config.outputPath, depth=config.runDepth, tag=run_tag(config, mode))
    if config.reportPath:
        report.write(config.reportPath)
    if report.ndcg is not None:
        logger.info("Mean nDCG@10: {:.4f}. dataset={}, strategy={}"
                    .format(report.ndcg, report.dataset, report.strategy))
    return run, report


def run_baseline_concat(config: PipelineConfig, generator: GeneratorEndpoint = None, reranker: Reranker = None,
                        pipeline: GffPipeline = None) -> Run:
    """
    Single rerank per query with every kept keyword (or the generated passages) appended to the question.
    """
    pipeline = pipeline or GffPipeline(config, generator=generator, reranker=reranker)
    run, _ = pipeline.run(mode=CONCAT)
    return run


def sweep_keyword_count(config: PipelineConfig, k_values: List[int], generator: GeneratorEndpoint = None,
                        reranker: Reranker = None, pipeline: GffPipeline = None) -> List[SweepRow]:
    if not k_values:
        raise ValueError('Sweep requires at least one keyword count.')
    if any(k < 1 for k in k_values):
        raise ValueError('Keyword counts must be >= 1. k_values={}'.format(k_values))
    pipeline = pipeline or GffPipeline(config, generator=generator, reranker=reranker)
    if pipeline.qrels is None:
        raise ValueError('Sweep requires qrelsPath.')
    rows = []
    for k in k_values:
        _, fusion_report = pipeline.run(mode=FUSION, top_k=k)
        _, concat_report = pipeline.run(mode=CONCAT, top_k=k)
        rows.append(SweepRow(k, fusion_report.ndcg, concat_report.ndcg))
        logger.info("Sweep row. k={}, fusion={}, concat={}".format(k, fusion_report.ndcg, concat_report.ndcg))
    return rows


def fuse_runs(original: Run, expansion_runs: List[Run], config: FusionConfig = None) -> Run:
    """
    Fuses an original run with expansion runs over the same candidates. Each expansion list is identified by its
    run tag.
    """
    fused = Run()
    for query_id in original.query_ids():
        ranked = original.get(query_id)
        if not len(ranked):
            fused.add(ranked)
            continue
        lists = []
        for position, expansion_run in enumerate(expansion_runs):
            expansion = expansion_run.get(query_id)
            if expansion is None:
                logger.warning("Expansion run has no list for query. query_id={}, run={}".format(query_id, position))
                continue
            lists.append((Keyword(expansion.tag or 'expansion{}'.format(position)), expansion))
        fused.add(fuse(FusionInput(ranked, lists), config))
    return fused
