import os

import pytest

from endpoints.generator import ScriptedGenerator
from endpoints.reranker import LexicalStandinReranker
from evaluation import Run, read_run
from fusion import FusionConfig, FusionInput, fuse
from models import Keyword, RankedList
from pipeline import (GffPipeline, REPORT_HEADER, RunReport, SweepRow, fuse_runs, run_baseline_concat, run_pipeline,
                      sweep_keyword_count, write_sweep)

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
TOY_SCRIPT = os.path.join(ROOT, 'data', 'toy', 'generator_script.yml')
SYNONYM_SCRIPT = os.path.join(ROOT, 'tests', 'fixtures', 'synonym', 'generator_script.yml')


class RecordingReranker(LexicalStandinReranker):
    def __init__(self, corpus=None, fail_on=None):
        super().__init__(corpus)
        self.inputs = []
        self.fail_on = fail_on

    def score(self, concatenated_input):
        self.inputs.append(concatenated_input)
        if self.fail_on and self.fail_on in concatenated_input.split('Document:')[0]:
            raise ValueError('reranker unavailable')
        return super().score(concatenated_input)


def test_none_strategy_equals_plain_rerank(synonym_config):
    synonym_config.strategy = 'none'
    pipeline = GffPipeline(synonym_config)
    assert pipeline.generator is None
    run, report = pipeline.run()
    query = pipeline.queries[0]
    assert run.get('q1') == pipeline.plain(query)
    assert run.get('q1').doc_ids() == ['d1', 'd2', 'd3', 'd4', 'd5', 'd6']
    assert report.ndcg == pytest.approx(0.888037, abs=1e-5)
    assert report.weighting == 'none'


def test_toy_run_is_byte_identical(toy_config, tmp_path):
    outputs = []
    for cache_dir in ['first', 'first', 'second']:
        toy_config.cacheDir = str(tmp_path / cache_dir)
        run_pipeline(toy_config)
        with open(toy_config.outputPath, 'rb') as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1] == outputs[2]
    assert outputs[0].split(b'\n')[0].endswith(b' gff.q2d2k.fusion')


def test_changed_seed_is_not_served_from_warm_cache(toy_config, tmp_path):
    GffPipeline(toy_config).run()
    toy_config.seed = 1
    warm, _ = GffPipeline(toy_config).run()
    toy_config.cacheDir = str(tmp_path / 'cold')
    cold, _ = GffPipeline(toy_config).run()
    assert warm == cold


def test_toy_run_covers_every_query(toy_config):
    run, report = run_pipeline(toy_config)
    assert len(run) == 10
    assert report.failures == {}
    assert report.flagged == []
    assert 0.0 < report.ndcg <= 1.0
    assert read_run(toy_config.outputPath) == Run({q: r.with_tag('gff.q2d2k.fusion') for q, r in run.lists.items()})


def test_workers_do_not_change_the_run(toy_config, tmp_path):
    sequential, _ = GffPipeline(toy_config).run()
    toy_config.workers = 4
    toy_config.cacheDir = str(tmp_path / 'parallel')
    parallel, _ = GffPipeline(toy_config).run()
    assert parallel == sequential


@pytest.mark.parametrize('strategy', ['rm3', 'q2k', 'q2d', 'prf_d2k'])
def test_toy_strategies_run_without_failures(toy_config, strategy):
    toy_config.strategy = strategy
    run, report = GffPipeline(toy_config).run()
    assert len(run) == 10
    assert report.failures == {}
    assert report.strategy == strategy


def test_rm3_expansions(toy_config):
    toy_config.strategy = 'rm3'
    pipeline = GffPipeline(toy_config)
    expansion = pipeline.expansions(pipeline.queries[0], 'rm3', 2)
    assert len(expansion.keywords) == 2
    assert expansion.source_strategy == 'RM3'


def test_q2d_expansions_are_passages(toy_config):
    pipeline = GffPipeline(toy_config)
    expansion = pipeline.expansions(pipeline.queries[0], 'q2d', 2)
    assert 1 <= len(expansion.keywords) <= 2
    assert all(len(k.surface.split()) > 3 for k in expansion.keywords)


def test_synonym_fusion_beats_plain_and_concat(synonym_config):
    pipeline = GffPipeline(synonym_config)
    _, plain = pipeline.run(strategy='none')
    rows = sweep_keyword_count(synonym_config, [1, 3, 10], pipeline=pipeline)
    by_k = {row.k: row for row in rows}
    assert by_k[3].fusion_ndcg > plain.ndcg
    assert by_k[10].concat_ndcg < by_k[10].fusion_ndcg
    assert by_k[10].concat_ndcg < by_k[1].concat_ndcg
    assert by_k[3].fusion_ndcg == pytest.approx(1.0)


def test_synonym_fused_order(synonym_config):
    run, _ = GffPipeline(synonym_config).run(top_k=3)
    assert run.get('q1').doc_ids()[:3] == ['d1', 'd5', 'd6']


def test_concat_rendering_appends_keywords(synonym_config):
    reranker = RecordingReranker()
    run_baseline_concat(synonym_config, reranker=reranker)
    assert any(i.startswith('Question: automobile fix car repair mechanic garage car mechanic Document:')
               for i in reranker.inputs)


def test_concat_topk_strategy_uses_concat_mode(synonym_config):
    synonym_config.strategy = 'concat_topk'
    synonym_config.concatSource = 'q2k'
    run, report = run_pipeline(synonym_config)
    assert report.weighting == 'concat'
    assert report.strategy == 'concat_topk'
    assert run.get('q1').doc_ids()[:3] == ['d5', 'd6', 'd1']
    with open(synonym_config.outputPath) as f:
        assert f.readline().split()[-1] == 'gff.concat_topk.concat'


def test_warm_sweep_skips_generator(synonym_config):
    sweep_keyword_count(synonym_config, [1, 3], generator=ScriptedGenerator.from_file(SYNONYM_SCRIPT))
    warm = ScriptedGenerator.from_file(SYNONYM_SCRIPT)
    rows = sweep_keyword_count(synonym_config, [1, 3], generator=warm)
    assert warm.calls == 0
    assert len(rows) == 2


def test_sweep_arguments(synonym_config):
    assert [row.k for row in sweep_keyword_count(synonym_config, [1])] == [1]
    with pytest.raises(ValueError):
        sweep_keyword_count(synonym_config, [])
    with pytest.raises(ValueError):
        sweep_keyword_count(synonym_config, [0])
    synonym_config.qrelsPath = None
    with pytest.raises(ValueError):
        sweep_keyword_count(synonym_config, [1])


def test_failed_expansion_falls_back_to_plain(synonym_config):
    reranker = RecordingReranker(fail_on='car repair')
    pipeline = GffPipeline(synonym_config, reranker=reranker)
    run, report = pipeline.run(top_k=3)
    assert run.get('q1') == pipeline.plain(pipeline.queries[0])
    assert 'reranker unavailable' in report.failures['q1']


def test_failed_rerank_falls_back_to_candidates(synonym_config):
    reranker = RecordingReranker(fail_on='automobile')
    pipeline = GffPipeline(synonym_config, reranker=reranker)
    run, report = pipeline.run()
    assert run.get('q1') == pipeline.candidates(pipeline.queries[0])
    assert 'q1' in report.failures


def test_generator_failure_is_isolated(synonym_config):
    class BrokenGenerator(ScriptedGenerator):
        def generate(self, prompt, sample_seed):
            raise ValueError('generator down')

    synonym_config.keygen.maxRetries = 0
    pipeline = GffPipeline(synonym_config, generator=BrokenGenerator({}))
    run, report = pipeline.run()
    assert run.get('q1') == pipeline.plain(pipeline.queries[0])
    assert 'generator down' in report.failures['q1']


def test_fuse_runs_matches_fuse():
    original = RankedList('q1', [('d1', 3.0), ('d2', 2.0), ('d3', 1.0)], tag='rerank')
    first = RankedList('q1', [('d3', 5.0), ('d2', 1.0), ('d1', 0.0)], tag='rerank:alpha')
    second = RankedList('q1', [('d2', 4.0), ('d1', 2.0), ('d3', 1.0)], tag='rerank:beta')
    fused = fuse_runs(Run({'q1': original}), [Run({'q1': first}), Run({'q1': second})], FusionConfig())
    expected = fuse(FusionInput(original, [(Keyword('rerank:alpha'), first), (Keyword('rerank:beta'), second)]))
    assert fused.get('q1') == expected


def test_fuse_runs_without_expansions_keeps_original():
    original = RankedList('q1', [('d1', 3.0), ('d2', 2.0)], tag='rerank')
    assert fuse_runs(Run({'q1': original}), [Run()]).get('q1') == original


def test_report_rows_append(tmp_path):
    path = str(tmp_path / 'report.tsv')
    RunReport('toy', 'q2d2k', 'reciprocal_rank', 3, ndcg=0.51234).write(path)
    RunReport('toy', 'none', 'none', 3, ndcg=0.4).write(path)
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines == ['\t'.join(REPORT_HEADER), 'toy\tq2d2k\treciprocal_rank\t0.5123', 'toy\tnone\tnone\t0.4000']


def test_run_pipeline_writes_report(toy_config, tmp_path):
    toy_config.reportPath = str(tmp_path / 'report.tsv')
    _, report = run_pipeline(toy_config)
    assert os.path.exists(toy_config.reportPath)
    with open(toy_config.reportPath) as f:
        assert f.read().splitlines()[1] == '\t'.join(report.row())


def test_write_sweep(tmp_path):
    path = str(tmp_path / 'sweep.tsv')
    write_sweep([SweepRow(1, 1.0, 1.0), SweepRow(10, 0.942195, 0.529218)], path)
    with open(path) as f:
        assert f.read() == 'k\tfusion\tconcat\n1\t1.0000\t1.0000\n10\t0.9422\t0.5292\n'


def test_scripted_toy_generator_loads():
    assert ScriptedGenerator.from_file(TOY_SCRIPT).script['Q2K']
