"""Minimal JSON-over-HTTP client for an external text-completion judge.

The endpoint speaks {model, prompt, max_tokens} -> {text}. Entirely
optional: evaluation runs without it and simply leaves llm_accuracy empty.
"""

from __future__ import annotations

import os
import time

import requests

ENV_URL = "STREAMCOACH_JUDGE_URL"
ENV_MODEL = "STREAMCOACH_JUDGE_MODEL"
ENV_KEY = "STREAMCOACH_JUDGE_KEY"


class HttpJudge:
    def __init__(
        self,
        url,
        model="default",
        api_key=None,
        max_tokens=16,
        retries=3,
        timeout=30.0,
        backoff=1.0,
    ):
        self.url = url
        self.model = model
        self.api_key = api_key
        self.max_tokens = max_tokens
        self.retries = retries
        self.timeout = timeout
        self.backoff = backoff

    def __call__(self, prompt):
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": self.max_tokens,
        }
        last_err = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout
                )
                resp.raise_for_status()
                return resp.json()["text"]
            except (requests.RequestException, KeyError, ValueError) as err:
                last_err = err
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
        raise RuntimeError(f"judge endpoint failed after {self.retries} attempts: {last_err}")


def judge_from_env():
    """HttpJudge configured from environment, or None when not configured."""
    url = os.environ.get(ENV_URL)
    if not url:
        return None
    return HttpJudge(
        url,
        model=os.environ.get(ENV_MODEL, "default"),
        api_key=os.environ.get(ENV_KEY),
    )
