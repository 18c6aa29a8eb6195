import hashlib
import json
import logging
import os
import re
import threading
from typing import Optional

logger = logging.getLogger('cache')

UNSAFE_CHARACTERS = re.compile(r'[^A-Za-z0-9._-]+')


def digest(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(str(part).encode('utf-8'))
        h.update(b'\x00')
    return h.hexdigest()


def safe_name(value: str) -> str:
    return UNSAFE_CHARACTERS.sub('_', str(value))


class ArtifactCache:
    """
    One JSON file per key under a directory. Writes for the same key are serialized and atomic.
    """

    def __init__(self, directory: Optional[str]):
        self.directory = directory
        self._locks = {}
        self._locks_guard = threading.Lock()
        if directory:
            os.makedirs(directory, exist_ok=True)

    @property
    def enabled(self) -> bool:
        return bool(self.directory)

    def _lock(self, key: str) -> threading.Lock:
        with self._locks_guard:
            if key not in self._locks:
                self._locks[key] = threading.Lock()
            return self._locks[key]

    def path(self, key: str) -> str:
        return os.path.join(self.directory, safe_name(key) + '.json')

    def get(self, key: str) -> Optional[dict]:
        if not self.enabled:
            return None
        with self._lock(key):
            path = self.path(key)
            if not os.path.exists(path):
                return None
            with open(path, 'r', encoding='utf-8') as f:
                logger.debug("Cache hit. key={}".format(key))
                return json.load(f)

    def put(self, key: str, value: dict):
        if not self.enabled:
            return
        with self._lock(key):
            path = self.path(key)
            tmp_path = '{}.{}.tmp'.format(path, threading.get_ident())
            with open(tmp_path, 'w', encoding='utf-8') as f:
                json.dump(value, f, sort_keys=True, indent=1)
            os.replace(tmp_path, path)
