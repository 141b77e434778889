import pytest
from fastapi.testclient import TestClient

from services.decode_service.main import app
from services.decode_service.src.models import TableModel
from services.decode_service.src.schemas import Distribution


@pytest.fixture
def client():
    with TestClient(app) as c:
        yield c


@pytest.fixture
def byte_cycle_model():
    # "a" -> "b" -> "c" -> "a" over a byte vocabulary
    a, b, c = (ord(ch) for ch in "abc")
    rows = {(a,): Distribution.one_hot(b, 256), (b,): Distribution.one_hot(c, 256), (c,): Distribution.one_hot(a, 256)}
    return TableModel(256, 1, rows)


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_decode_without_model_is_503(client):
    client.app.state.model = None
    r = client.post("/api/v1/decode", json={"prompt": [1, 2, 3]})
    assert r.status_code == 503


def test_decode_text_prompt(client, byte_cycle_model):
    client.app.state.model = byte_cycle_model
    r = client.post(
        "/api/v1/decode",
        json={"prompt": "abcabca", "mode": "strict", "max_new_tokens": 8},
        headers={"X-Correlation-ID": "t-1"},
    )
    assert r.status_code == 200
    body = r.json()
    assert body["text"] == "bcabcabc"
    assert len(body["tokens"]) == 8
    assert body["steps"] == len(body["accepted_per_step"])
    assert body["mal"] == pytest.approx(8 / body["steps"])


def test_decode_token_prompt_has_no_text(client, byte_cycle_model):
    client.app.state.model = byte_cycle_model
    r = client.post("/api/v1/decode", json={"prompt": [97, 98], "max_new_tokens": 2})
    assert r.status_code == 200
    assert r.json()["tokens"] == [99, 97]
    assert r.json()["text"] is None


@pytest.mark.parametrize(
    "payload",
    [
        {"prompt": [], "max_new_tokens": 2},
        {"prompt": [1, 999]},
        {"prompt": [1, 2], "mode": "bogus"},
        {"prompt": [1, 2], "beta": 3.0},
    ],
)
def test_decode_bad_input_is_422(client, byte_cycle_model, payload):
    client.app.state.model = byte_cycle_model
    r = client.post("/api/v1/decode", json=payload)
    assert r.status_code == 422
