import logging
import threading
from abc import abstractmethod

import requests
from requests.adapters import HTTPAdapter
from urllib3.util import Retry

from config import PipelineConfig


class Endpoint:
    logger = logging.getLogger('endpoint')

    @property
    @abstractmethod
    def name(self) -> str:
        pass


class HTTPEndpoint(Endpoint):
    """
    JSON-over-HTTP endpoint with transport retries and a cap on in-flight requests.
    """

    def __init__(self, url: str, token: str = None, timeout: float = 60, max_in_flight: int = 4,
                 max_retries: int = 3, session: requests.Session = None):
        if not url:
            raise ValueError('Endpoint URL must be specified.')
        self.url = url
        self.token = token
        self.timeout = timeout
        self._in_flight = threading.BoundedSemaphore(max_in_flight)
        if session is None:
            session = requests.Session()
            retry = Retry(total=max_retries, backoff_factor=0.5, status_forcelist=[429, 500, 502, 503, 504],
                          allowed_methods=['POST'])
            session.mount('http://', HTTPAdapter(max_retries=retry))
            session.mount('https://', HTTPAdapter(max_retries=retry))
        self.session = session

    @property
    def name(self) -> str:
        return self.url

    def post(self, payload: dict) -> dict:
        headers = {'Authorization': 'Bearer {}'.format(self.token)} if self.token else {}
        with self._in_flight:
            response = self.session.post(self.url, json=payload, headers=headers, timeout=self.timeout,
                                         verify=PipelineConfig.SSL_VERIFY)
        self.logger.debug(response.text)
        if not response.ok:
            raise ValueError('Error calling endpoint: url={}, code={}, error={}'
                             .format(self.url, response.status_code, response.text))
        return response.json()
