import pytest

from streamcoach import judge as judge_mod
from streamcoach.judge import ENV_MODEL, ENV_URL, HttpJudge, judge_from_env


class _FakeResponse:
    def __init__(self, payload):
        self._payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self._payload


def test_http_judge_posts_prompt(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(url=url, json=json, headers=headers)
        return _FakeResponse({"text": '{"score": 4}'})

    monkeypatch.setattr(judge_mod.requests, "post", fake_post)
    judge = HttpJudge("http://example.test/v1", model="m", api_key="k")
    assert judge("hello") == '{"score": 4}'
    assert seen["url"] == "http://example.test/v1"
    assert seen["json"]["prompt"] == "hello"
    assert seen["json"]["model"] == "m"
    assert seen["headers"]["Authorization"] == "Bearer k"


def test_http_judge_retries_then_fails(monkeypatch):
    calls = []

    def fake_post(url, json=None, headers=None, timeout=None):
        calls.append(1)
        raise judge_mod.requests.ConnectionError("boom")

    monkeypatch.setattr(judge_mod.requests, "post", fake_post)
    monkeypatch.setattr(judge_mod.time, "sleep", lambda s: None)
    judge = HttpJudge("http://example.test", retries=3)
    with pytest.raises(RuntimeError, match="after 3 attempts"):
        judge("p")
    assert len(calls) == 3


def test_judge_from_env(monkeypatch):
    monkeypatch.delenv(ENV_URL, raising=False)
    assert judge_from_env() is None
    monkeypatch.setenv(ENV_URL, "http://example.test")
    monkeypatch.setenv(ENV_MODEL, "mini")
    judge = judge_from_env()
    assert isinstance(judge, HttpJudge)
    assert judge.model == "mini"
