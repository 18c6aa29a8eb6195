import logging
import os
import re

import urllib3.util
import yaml

from fusion import FusionConfig

STRATEGIES = ['none', 'rm3', 'q2k', 'q2d', 'q2d2k', 'prf_d2k', 'concat_topk']
CONCAT_SOURCES = ['rm3', 'q2k', 'q2d', 'q2d2k', 'prf_d2k']
MODES = ['fusion', 'concat']


class Bm25Config:
    def __init__(self, k1: float = 0.9, b: float = 0.4):
        self.k1 = k1
        self.b = b


class PrfConfig:
    def __init__(self, fbDocs: int = 10, fbTerms: int = 10, fbLambda: float = 0.5):
        self.fbDocs = fbDocs
        self.fbTerms = fbTerms
        self.fbLambda = fbLambda


class KeygenConfig:
    def __init__(self, docsPerRound: int = 2, keywordsPerDoc: int = 5, rounds: int = 3, templatesDir: str = None,
                 maxRetries: int = 2):
        self.docsPerRound = docsPerRound
        self.keywordsPerDoc = keywordsPerDoc
        self.rounds = rounds
        self.templatesDir = templatesDir
        self.maxRetries = maxRetries


class GeneratorConfig:
    def __init__(self, type: str = 'scripted', scriptPath: str = None, selection: str = 'cycle', url: str = None,
                 tokenEnv: str = 'GFF_GENERATOR_TOKEN', maxTokens: int = 256, temperature: float = 0.7,
                 maxInFlight: int = 4, timeout: float = 60):
        self.type = type
        self.scriptPath = scriptPath
        self.selection = selection
        self.url = url
        self.tokenEnv = tokenEnv
        self.maxTokens = maxTokens
        self.temperature = temperature
        self.maxInFlight = maxInFlight
        self.timeout = timeout


class RerankerConfig:
    def __init__(self, type: str = 'standin', idf: str = 'corpus', maxDocTokens: int = 512, url: str = None,
                 tokenEnv: str = 'GFF_RERANKER_TOKEN', batchSize: int = 512, maxInFlight: int = 4,
                 timeout: float = 60):
        self.type = type
        self.idf = idf
        self.maxDocTokens = maxDocTokens
        self.url = url
        self.tokenEnv = tokenEnv
        self.batchSize = batchSize
        self.maxInFlight = maxInFlight
        self.timeout = timeout


class PipelineConfig:
    logger = logging.getLogger('config')

    SSL_VERIFY = True  # Global SSL verification configuration. Enabled by default.

    def __init__(self, corpusPath: str, queriesPath: str, qrelsPath: str = None, outputPath: str = 'run.gff.txt',
                 reportPath: str = None, cacheDir: str = '.gff_cache', dataset: str = 'dataset',
                 candidateDepth: int = 1000, runDepth: int = 1000, strategy: str = 'q2d2k', mode: str = 'fusion',
                 concatSource: str = 'q2d2k', topK: int = 3, workers: int = 1, seed: int = 0,
                 bm25: Bm25Config = None, prf: PrfConfig = None, keygen: KeygenConfig = None,
                 fusion: FusionConfig = None, generator: GeneratorConfig = None, reranker: RerankerConfig = None,
                 filename: str = None):
        self.corpusPath = corpusPath
        self.queriesPath = queriesPath
        self.qrelsPath = qrelsPath
        self.outputPath = outputPath
        self.reportPath = reportPath
        self.cacheDir = cacheDir
        self.dataset = dataset
        self.candidateDepth = candidateDepth
        self.runDepth = runDepth
        self.strategy = strategy
        self.mode = mode
        self.concatSource = concatSource
        self.topK = topK
        self.workers = workers
        self.seed = seed
        self.bm25 = bm25 or Bm25Config()
        self.prf = prf or PrfConfig()
        self.keygen = keygen or KeygenConfig()
        self.fusion = fusion or FusionConfig()
        self.generator = generator or GeneratorConfig()
        self.reranker = reranker or RerankerConfig()
        self.filename = filename

    def validate(self, check_paths: bool = True):
        self.logger.info("Validating pipeline configuration.")

        if self.strategy not in STRATEGIES:
            raise AssertionError("ABORT: Unknown strategy: {}. Available: {}".format(self.strategy,
                                                                                      ', '.join(STRATEGIES)))
        if self.concatSource not in CONCAT_SOURCES:
            raise AssertionError("ABORT: Unknown concatSource: {}. Available: {}"
                                 .format(self.concatSource, ', '.join(CONCAT_SOURCES)))
        if self.mode not in MODES:
            raise AssertionError("ABORT: Unknown mode: {}. Available: {}".format(self.mode, ', '.join(MODES)))

        # Ensure counts are positive.
        counts = dict(candidateDepth=self.candidateDepth, runDepth=self.runDepth, topK=self.topK,
                      workers=self.workers, fbDocs=self.prf.fbDocs, fbTerms=self.prf.fbTerms,
                      docsPerRound=self.keygen.docsPerRound, keywordsPerDoc=self.keygen.keywordsPerDoc,
                      rounds=self.keygen.rounds, maxDocTokens=self.reranker.maxDocTokens,
                      batchSize=self.reranker.batchSize)
        invalid = {k: v for k, v in counts.items() if v is None or v < 1}
        if invalid:
            self.logger.error("Invalid: {}".format(invalid))
            raise AssertionError("ABORT: Counts and depths must be >= 1. invalid={}".format(invalid))
        if self.keygen.maxRetries < 0:
            raise AssertionError("ABORT: keygen.maxRetries must be >= 0.")
        if not 0 <= self.prf.fbLambda <= 1:
            raise AssertionError("ABORT: prf.lambda must be in [0, 1]. lambda={}".format(self.prf.fbLambda))
        self.fusion.validate()

        if self.generator.type not in ('scripted', 'remote'):
            raise AssertionError("ABORT: Unknown generator type: {}".format(self.generator.type))
        if self.generator.selection not in ('cycle', 'random'):
            raise AssertionError("ABORT: Unknown generator selection: {}".format(self.generator.selection))
        if self.reranker.type not in ('standin', 'remote'):
            raise AssertionError("ABORT: Unknown reranker type: {}".format(self.reranker.type))
        if self.reranker.idf not in ('corpus', 'uniform'):
            raise AssertionError("ABORT: Unknown reranker idf source: {}".format(self.reranker.idf))

        # Ensure remote endpoint URLs contain a valid hostname.
        endpoints = []
        if self.generator.type == 'remote' and self.uses_generator():
            endpoints.append(('generator', self.generator.url))
        if self.reranker.type == 'remote':
            endpoints.append(('reranker', self.reranker.url))
        for name, url in endpoints:
            if not url:
                raise AssertionError("ABORT: {}.url must be set for a remote {}.".format(name, name))
            parsed = urllib3.util.parse_url(url)
            hostname = (parsed.netloc or '').split(':')[0]
            if parsed.scheme not in ('http', 'https') or not self._is_fqdn(hostname):
                raise AssertionError("ABORT: {}.url does not contain a valid hostname. url={}".format(name, url))

        if check_paths:
            paths = dict(corpusPath=self.corpusPath, queriesPath=self.queriesPath, qrelsPath=self.qrelsPath)
            if self.generator.type == 'scripted' and self.uses_generator():
                paths['generator.scriptPath'] = self.generator.scriptPath
            if self.keygen.templatesDir:
                paths['keygen.templatesDir'] = self.keygen.templatesDir
            missing = {k: v for k, v in paths.items()
                       if (v is None and k != 'qrelsPath') or (v is not None and not os.path.exists(v))}
            if missing:
                raise AssertionError("ABORT: Referenced paths do not exist. missing={}".format(missing))

    def keyword_strategy(self) -> str:
        return self.concatSource if self.strategy == 'concat_topk' else self.strategy

    def uses_generator(self) -> bool:
        return self.keyword_strategy() in ('q2k', 'q2d', 'q2d2k', 'prf_d2k')

    # Validate hostname
    @staticmethod
    def _is_fqdn(hostname):
        return re.match("^(([a-zA-Z0-9]|[a-zA-Z0-9][a-zA-Z0-9\\-]*[a-zA-Z0-9])\\.)*([A-Za-z0-9]|[A-Za-z0-9]["
                        "A-Za-z0-9\\-]*[A-Za-z0-9])$", hostname)


def _section(c: dict, name: str) -> dict:
    if name in c and c[name]:
        return c[name]
    return {}


def parse_config(c: dict) -> PipelineConfig:
    prf = _section(c, 'prf')
    keygen = _section(c, 'keygen')
    fusion = _section(c, 'fusion')
    return PipelineConfig(
        corpusPath=c['corpusPath'],
        queriesPath=c['queriesPath'],
        qrelsPath=c['qrelsPath'] if 'qrelsPath' in c else None,
        outputPath=c['outputPath'] if 'outputPath' in c else 'run.gff.txt',
        reportPath=c['reportPath'] if 'reportPath' in c else None,
        cacheDir=c['cacheDir'] if 'cacheDir' in c else '.gff_cache',
        dataset=c['dataset'] if 'dataset' in c else 'dataset',
        candidateDepth=int(c['candidateDepth']) if 'candidateDepth' in c else 1000,
        runDepth=int(c['runDepth']) if 'runDepth' in c else 1000,
        strategy=c['strategy'] if 'strategy' in c else 'q2d2k',
        mode=c['mode'] if 'mode' in c else 'fusion',
        concatSource=c['concatSource'] if 'concatSource' in c else 'q2d2k',
        topK=int(c['topK']) if 'topK' in c else 3,
        workers=int(c['workers']) if 'workers' in c else 1,
        seed=int(c['seed']) if 'seed' in c else 0,
        bm25=Bm25Config(**_section(c, 'bm25')),
        prf=PrfConfig(fbDocs=prf['fbDocs'] if 'fbDocs' in prf else 10,
                      fbTerms=prf['fbTerms'] if 'fbTerms' in prf else 10,
                      fbLambda=prf['lambda'] if 'lambda' in prf else 0.5),
        keygen=KeygenConfig(**keygen),
        fusion=FusionConfig(**fusion),
        generator=GeneratorConfig(**_section(c, 'generator')),
        reranker=RerankerConfig(**_section(c, 'reranker')),
    )


def load_config(path: str) -> PipelineConfig:
    with open(path, 'r') as f:
        loaded_config = yaml.load(f.read(), Loader=yaml.FullLoader)
    if not loaded_config:
        raise ValueError('Invalid config: {}'.format(path))
    config = parse_config(loaded_config)
    config.filename = path
    return config


def apply_overrides(config: PipelineConfig, args) -> PipelineConfig:
    """
    Command-line flags take precedence over the config file when given.
    """
    overrides = dict(strategy='strategy', mode='mode', top_k='topK', candidate_depth='candidateDepth',
                     workers='workers', cache_dir='cacheDir', output='outputPath', report='reportPath',
                     seed='seed')
    for flag, attribute in overrides.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config, attribute, value)
    fusion_overrides = dict(weighting='weighting', beta='originalCoefficient', smoothing_c='smoothingC')
    for flag, attribute in fusion_overrides.items():
        value = getattr(args, flag, None)
        if value is not None:
            setattr(config.fusion, attribute, value)
    return config
