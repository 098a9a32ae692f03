from __future__ import annotations

import pytest

from teamroom.config import SessionConfig
from teamroom.gateway import Gateway, ManualClock
from teamroom.provider import MockProvider


@pytest.fixture
def clock() -> ManualClock:
    return ManualClock()


@pytest.fixture
def gateway(tmp_path, clock) -> Gateway:
    gw = Gateway(tmp_path, provider=MockProvider(), clock=clock, durable=False)
    yield gw
    gw.close()


@pytest.fixture
def session(gateway):
    """A default orchestrated session on the gateway fixture."""
    sid = gateway.create_session(SessionConfig("s1", task_prompt="build a bridge"))
    return sid
