import json
import logging
import os

import pytest
import yaml

import main
from corpus import Corpus
from evaluation import Run, read_run, write_run
from models import RankedList

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
TOY_DIR = os.path.join(ROOT, 'data', 'toy')


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / 'config.yml'
    path.write_text(yaml.dump(dict(
        dataset='toy',
        corpusPath=os.path.join(TOY_DIR, 'corpus.jsonl'),
        queriesPath=os.path.join(TOY_DIR, 'queries.tsv'),
        qrelsPath=os.path.join(TOY_DIR, 'qrels.txt'),
        outputPath=str(tmp_path / 'run.txt'),
        cacheDir=str(tmp_path / 'cache'),
        strategy='q2k',
        generator=dict(type='scripted', scriptPath=os.path.join(TOY_DIR, 'generator_script.yml')),
    )))
    return str(path)


def test_index_then_retrieve(config_path, tmp_path):
    index = str(tmp_path / 'index.json')
    main.main(['index', '--config', config_path, '--output', index])
    assert Corpus.load(index).doc_count == 30
    output = str(tmp_path / 'bm25.txt')
    main.main(['retrieve', '--config', config_path, '--index', index, '--output', output])
    run = read_run(output)
    assert len(run) == 10
    assert all(ranked.tag == 'bm25' for ranked in run.lists.values())


def test_pipeline_then_eval(config_path, tmp_path, caplog):
    output = str(tmp_path / 'gff.txt')
    report = str(tmp_path / 'report.tsv')
    main.main(['pipeline', '--config', config_path, '--output', output, '--report', report, '--top_k', '2'])
    with open(output) as f:
        assert f.readline().split()[-1] == 'gff.q2k.fusion'
    with open(report) as f:
        assert f.read().splitlines()[0] == 'dataset\tstrategy\tweighting\tndcg@10'
    with caplog.at_level(logging.INFO):
        main.main(['eval', '--config', config_path, '--run', output])
    assert 'Mean nDCG@10' in caplog.text


def test_rerank_with_expansion(config_path, tmp_path):
    output = str(tmp_path / 'rerank.txt')
    main.main(['rerank', '--config', config_path, '--output', output, '--expansion', 'nectar hive'])
    run = read_run(output)
    assert all(ranked.tag == 'rerank:nectar_hive' for ranked in run.lists.values())


def test_expand_writes_one_line_per_query(config_path, tmp_path):
    output = str(tmp_path / 'expansions.jsonl')
    main.main(['expand', '--config', config_path, '--output', output, '--top_k', '2'])
    with open(output) as f:
        lines = [json.loads(line) for line in f]
    assert len(lines) == 10
    assert all(len(line['keywords']) <= 2 for line in lines)
    assert lines[0]['source_strategy'] == 'Q2K'


def test_fuse_run_files(config_path, tmp_path):
    original = str(tmp_path / 'original.txt')
    expansion = str(tmp_path / 'expansion.txt')
    write_run(Run({'q1': RankedList('q1', [('d01', 2.0), ('d02', 1.0)], tag='rerank')}), original)
    write_run(Run({'q1': RankedList('q1', [('d02', 5.0), ('d01', 1.0)], tag='rerank:hive')}), expansion)
    output = str(tmp_path / 'fused.txt')
    main.main(['fuse', '--config', config_path, '--original', original, '--expansion_runs', expansion,
               '--output', output, '--beta', '1.0'])
    fused = read_run(output)
    assert fused.get('q1').doc_ids() == ['d01', 'd02']
    assert fused.get('q1').tag == 'gff'


def test_sweep_table(config_path, tmp_path):
    table = str(tmp_path / 'sweep.tsv')
    main.main(['sweep', '--config', config_path, '--k_values', '1', '2', '--table', table])
    with open(table) as f:
        lines = f.read().splitlines()
    assert lines[0] == 'k\tfusion\tconcat'
    assert [line.split('\t')[0] for line in lines[1:]] == ['1', '2']


def test_invalid_override_aborts(config_path):
    with pytest.raises(AssertionError):
        main.main(['pipeline', '--config', config_path, '--strategy', 'hyde'])
