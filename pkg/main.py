#!/usr/bin/env python3
import argparse
import json
import logging
import sys
import time

from config import PipelineConfig, apply_overrides, load_config
from corpus import Corpus, bm25_retrieve, build_index, load_documents
from evaluation import Run, evaluate_run, read_qrels, read_run, write_run
from pipeline import GffPipeline, fuse_runs, run_pipeline, sweep_keyword_count, write_sweep
from rerank import rerank_list

logger = logging.getLogger()
logger.setLevel(logging.INFO)

handler = logging.StreamHandler(sys.stdout)
formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
handler.setFormatter(formatter)
logger.addHandler(handler)


def _corpus(config: PipelineConfig, args) -> Corpus:
    if getattr(args, 'index', None):
        return Corpus.load(args.index)
    return build_index(load_documents(config.corpusPath))


def cmd_index(config: PipelineConfig, args):
    corpus = build_index(load_documents(config.corpusPath))
    corpus.save(args.output or 'index.json')


def cmd_retrieve(config: PipelineConfig, args):
    pipeline = GffPipeline(config, corpus=_corpus(config, args))
    run = Run()
    for query in pipeline.queries:
        run.add(bm25_retrieve(pipeline.corpus, query, config.candidateDepth, k1=config.bm25.k1, b=config.bm25.b))
    write_run(run, config.outputPath, depth=config.candidateDepth, tag='bm25')


def cmd_rerank(config: PipelineConfig, args):
    pipeline = GffPipeline(config, corpus=_corpus(config, args))
    candidates = read_run(args.candidates) if args.candidates else None
    run = Run()
    for query in pipeline.queries:
        if candidates is None:
            run.add(pipeline.rerank(query, pipeline.candidates(query), args.expansion))
            continue
        ranked = candidates.get(query.id)
        if ranked is None or not len(ranked):
            logger.warning("No candidates for query. query_id={}".format(query.id))
            continue
        run.add(rerank_list(pipeline.reranker, pipeline.corpus, query, ranked, keyword=args.expansion,
                            max_doc_tokens=config.reranker.maxDocTokens))
    write_run(run, config.outputPath, depth=config.runDepth)


def cmd_expand(config: PipelineConfig, args):
    pipeline = GffPipeline(config, corpus=_corpus(config, args))
    strategy = config.keyword_strategy()
    with open(config.outputPath, 'w', encoding='utf-8') as f:
        for query in pipeline.queries:
            expansion = pipeline.expansions(query, strategy, config.topK)
            f.write(json.dumps(expansion.to_dict(), sort_keys=True) + '\n')
    logger.info("Wrote expansions. path={}, queries={}".format(config.outputPath, len(pipeline.queries)))


def cmd_fuse(config: PipelineConfig, args):
    original = read_run(args.original)
    expansions = [read_run(path) for path in args.expansion_runs]
    write_run(fuse_runs(original, expansions, config.fusion), config.outputPath, depth=config.runDepth, tag='gff')


def cmd_eval(config: PipelineConfig, args):
    qrels = read_qrels(args.qrels or config.qrelsPath)
    run = read_run(args.run or config.outputPath)
    mean, per_query, flagged = evaluate_run(run, qrels)
    for query_id, score in per_query.items():
        logger.debug("nDCG@10. query_id={}, score={:.4f}".format(query_id, score))
    logger.info("Mean nDCG@10: {:.4f}. queries={}, flagged={}".format(mean, len(per_query), len(flagged)))


def cmd_pipeline(config: PipelineConfig, args):
    run_pipeline(config)


def cmd_sweep(config: PipelineConfig, args):
    rows = sweep_keyword_count(config, args.k_values)
    write_sweep(rows, args.table or 'sweep.tsv')


COMMANDS = dict(index=cmd_index, retrieve=cmd_retrieve, rerank=cmd_rerank, expand=cmd_expand, fuse=cmd_fuse,
                eval=cmd_eval, pipeline=cmd_pipeline, sweep=cmd_sweep)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', dest='config', required=False, default='config.yml',
                        help='Path to config file.')
    common.add_argument('--strategy', dest='strategy', required=False, default=None,
                        help='Expansion strategy: none, rm3, q2k, q2d, q2d2k, prf_d2k or concat_topk.')
    common.add_argument('--mode', dest='mode', required=False, default=None, help='fusion or concat.')
    common.add_argument('--top_k', dest='top_k', required=False, default=None, type=int,
                        help='Keywords kept by the filter.')
    common.add_argument('--weighting', dest='weighting', required=False, default=None,
                        help='Fusion weighting method.')
    common.add_argument('--beta', dest='beta', required=False, default=None, type=float,
                        help='Coefficient of the original-query list in the fusion.')
    common.add_argument('--smoothing_c', dest='smoothing_c', required=False, default=None, type=float,
                        help='Smoothing constant of the reciprocal-rank weight.')
    common.add_argument('--candidate_depth', dest='candidate_depth', required=False, default=None, type=int,
                        help='BM25 candidates per query.')
    common.add_argument('--workers', dest='workers', required=False, default=None, type=int,
                        help='Queries processed concurrently.')
    common.add_argument('--cache_dir', dest='cache_dir', required=False, default=None,
                        help='Directory for cached candidates, transcripts and reranked lists.')
    common.add_argument('--output', dest='output', required=False, default=None, help='Output path.')
    common.add_argument('--report', dest='report', required=False, default=None,
                        help='Append the nDCG@10 summary row to this TSV file.')
    common.add_argument('--debug', dest='debug', required=False, default=False, help='Enable verbose logging.',
                        action='store_true')
    common.add_argument('--no-ssl', dest='ssl_disabled', required=False, default=False,
                        help='Disable SSL verification.', action="store_true")

    parser = argparse.ArgumentParser(description='Generate, filter and fuse query expansions for reranking.')
    subparsers = parser.add_subparsers(dest='command', required=True)
    subparsers.add_parser('index', parents=[common], help='Build and save the BM25 index.')
    retrieve = subparsers.add_parser('retrieve', parents=[common], help='Write the BM25 candidate run.')
    retrieve.add_argument('--index', dest='index', required=False, default=None, help='Saved index path.')
    rerank = subparsers.add_parser('rerank', parents=[common], help='Rerank candidates with the cross-encoder.')
    rerank.add_argument('--index', dest='index', required=False, default=None, help='Saved index path.')
    rerank.add_argument('--candidates', dest='candidates', required=False, default=None,
                        help='Candidate run file. Defaults to BM25 retrieval.')
    rerank.add_argument('--expansion', dest='expansion', required=False, default=None,
                        help='Expansion text appended to every question.')
    subparsers.add_parser('expand', parents=[common], help='Generate and filter keywords per query.')
    fuse = subparsers.add_parser('fuse', parents=[common], help='Fuse an original run with expansion runs.')
    fuse.add_argument('--original', dest='original', required=True, help='Original-query rerank run.')
    fuse.add_argument('--expansion_runs', dest='expansion_runs', required=True, nargs='+',
                      help='Per-expansion rerank runs.')
    evaluate = subparsers.add_parser('eval', parents=[common], help='Mean nDCG@10 of a run file.')
    evaluate.add_argument('--run', dest='run', required=False, default=None, help='Run file.')
    evaluate.add_argument('--qrels', dest='qrels', required=False, default=None, help='Qrels file.')
    subparsers.add_parser('pipeline', parents=[common], help='Run the full pipeline.')
    sweep = subparsers.add_parser('sweep', parents=[common], help='Fusion and concat nDCG@10 per keyword count.')
    sweep.add_argument('--k_values', dest='k_values', required=False, default=[1, 2, 3, 5, 10], nargs='+',
                       type=int, help='Keyword counts.')
    sweep.add_argument('--table', dest='table', required=False, default=None, help='Sweep TSV output path.')
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    PipelineConfig.SSL_VERIFY = not args.ssl_disabled
    if not PipelineConfig.SSL_VERIFY:
        logger.warning("SSL certificate verification disabled.")

    if args.debug:
        logger.setLevel(logging.DEBUG)

    logger.info("Parsing configuration file: {}".format(args.config))
    config = apply_overrides(load_config(args.config), args)
    config.validate(check_paths=args.command not in ('fuse', 'eval'))

    start_time_ms = round(time.time() * 1000)
    COMMANDS[args.command](config, args)
    end_time_ms = round(time.time() * 1000)
    logger.info("Command {} took {}s.".format(args.command, (end_time_ms - start_time_ms) / 1000))


if __name__ == '__main__':
    main()
