import os

import hypothesis
import pytest

from config import GeneratorConfig, KeygenConfig, PipelineConfig, RerankerConfig

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("debugger", report_multiple_bugs=False, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
TOY_DIR = os.path.join(ROOT, 'data', 'toy')
SYNONYM_DIR = os.path.join(ROOT, 'tests', 'fixtures', 'synonym')


@pytest.fixture
def toy_config(tmp_path):
    return PipelineConfig(
        corpusPath=os.path.join(TOY_DIR, 'corpus.jsonl'),
        queriesPath=os.path.join(TOY_DIR, 'queries.tsv'),
        qrelsPath=os.path.join(TOY_DIR, 'qrels.txt'),
        outputPath=str(tmp_path / 'run.txt'),
        cacheDir=str(tmp_path / 'cache'),
        dataset='toy',
        strategy='q2d2k',
        generator=GeneratorConfig(scriptPath=os.path.join(TOY_DIR, 'generator_script.yml')),
    )


@pytest.fixture
def synonym_config(tmp_path):
    return PipelineConfig(
        corpusPath=os.path.join(SYNONYM_DIR, 'corpus.jsonl'),
        queriesPath=os.path.join(SYNONYM_DIR, 'queries.tsv'),
        qrelsPath=os.path.join(SYNONYM_DIR, 'qrels.txt'),
        outputPath=str(tmp_path / 'run.txt'),
        cacheDir=str(tmp_path / 'cache'),
        dataset='synonym',
        strategy='q2k',
        candidateDepth=100,
        keygen=KeygenConfig(rounds=10),
        generator=GeneratorConfig(scriptPath=os.path.join(SYNONYM_DIR, 'generator_script.yml')),
        reranker=RerankerConfig(idf='uniform'),
    )
