from __future__ import annotations

import hashlib
import logging
import random
import threading
from abc import abstractmethod
from typing import Dict, List, Tuple

import yaml

from endpoints.endpoint import Endpoint, HTTPEndpoint

SEPARATOR = '========'
QUESTION_TAG = '<QUESTION>'
QUESTION_MARKER = QUESTION_TAG + ':'
PASSAGE_MARKER = '<PASSAGE>:'
KEYWORDS_MARKER = '<KEYWORDS>:'

CYCLE = 'cycle'
RANDOM = 'random'


class GeneratorEndpoint(Endpoint):
    @abstractmethod
    def generate(self, prompt: str, sample_seed: int) -> str:
        pass

    @property
    def cache_identity(self) -> str:
        """
        Everything besides the prompt and sample seed that decides the output. Part of the transcript cache key.
        """
        return self.name


class RemoteGenerator(HTTPEndpoint, GeneratorEndpoint):
    logger = logging.getLogger('generator')

    def __init__(self, url: str, token: str = None, max_tokens: int = 256, temperature: float = 0.7, **kwargs):
        super().__init__(url, token=token, **kwargs)
        self.max_tokens = max_tokens
        self.temperature = temperature

    def generate(self, prompt: str, sample_seed: int) -> str:
        body = self.post(dict(prompt=prompt, max_tokens=self.max_tokens, temperature=self.temperature,
                              seed=sample_seed))
        if 'text' not in body:
            raise ValueError('Generator response has no text field. url={}, keys={}'.format(self.url, list(body)))
        return body['text']

    @property
    def cache_identity(self) -> str:
        return 'remote:url={}:temperature={}:max_tokens={}'.format(self.url, self.temperature, self.max_tokens)


def inspect_prompt(prompt: str) -> Tuple[str, str]:
    """
    Identifies the template (Q2K, Q2D or D2K) and the question of a rendered prompt from its last example block.
    """
    tail = prompt.rsplit(SEPARATOR, 1)[-1]
    if KEYWORDS_MARKER in tail and PASSAGE_MARKER in tail:
        template = 'D2K'
    elif KEYWORDS_MARKER in tail:
        template = 'Q2K'
    else:
        template = 'Q2D'
    question = ''
    if QUESTION_MARKER in tail:
        question = tail.split(QUESTION_MARKER, 1)[1].split('\n', 1)[0].strip()
    return template, question


class ScriptedGenerator(GeneratorEndpoint):
    """
    Deterministic generator answering from a script of canned outputs keyed by template and question text.
    A 'default' entry under a template answers unknown questions; otherwise the output is empty.
    """
    logger = logging.getLogger('generator')

    def __init__(self, script: Dict[str, Dict[str, List[str]]], seed: int = 0, selection: str = CYCLE):
        if selection not in (CYCLE, RANDOM):
            raise ValueError('Unknown scripted selection: {}'.format(selection))
        self.script = script
        self.seed = seed
        self.selection = selection
        self.script_hash = hashlib.sha256(repr(script).encode('utf-8')).hexdigest()
        self.calls = 0
        self._calls_lock = threading.Lock()

    @staticmethod
    def from_file(path: str, seed: int = 0, selection: str = CYCLE) -> ScriptedGenerator:
        with open(path, 'r', encoding='utf-8') as f:
            script = yaml.load(f.read(), Loader=yaml.FullLoader)
        if not script:
            raise ValueError('Invalid generator script: {}'.format(path))
        return ScriptedGenerator(script, seed=seed, selection=selection)

    @property
    def name(self) -> str:
        return 'scripted'

    @property
    def cache_identity(self) -> str:
        return 'scripted:seed={}:selection={}:script={}'.format(self.seed, self.selection, self.script_hash[:16])

    def generate(self, prompt: str, sample_seed: int) -> str:
        with self._calls_lock:
            self.calls += 1
        template, question = inspect_prompt(prompt)
        responses = self.script.get(template) or {}
        options = responses.get(question) or responses.get('default') or []
        if not options:
            self.logger.debug("No scripted output. template={}, question={}".format(template, question))
            return ''
        if self.selection == RANDOM:
            index = random.Random(self.seed * 1000003 + sample_seed).randrange(len(options))
        else:
            index = (self.seed + sample_seed) % len(options)
        return options[index]
