from __future__ import annotations

import json
import math

from fastapi.testclient import TestClient

from embed_service.app import create_app
from embed_service.manifest import ModelSpec


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    return dot / (math.sqrt(sum(x * x for x in a)) * math.sqrt(sum(y * y for y in b)))


# --- health ------------------------------------------------------------------

def test_health_ok_when_loaded(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_health_503_while_loading():
    # a checkpoint that never loads keeps the service in its loading state
    app = create_app([ModelSpec("ghost", "encoder", "/nonexistent/checkpoint")])
    with TestClient(app) as test_client:
        response = test_client.get("/health")
        assert response.status_code == 503


# --- model catalogue ---------------------------------------------------------

def test_models_advertises_checkpoint_dimension(client, checkpoints):
    config = json.loads((checkpoints["roberta"] / "config.json").read_text())
    response = client.get("/models")
    assert response.status_code == 200
    entries = {m["name"]: m for m in response.json()}
    assert entries["roberta"]["kind"] == "encoder"
    assert entries["roberta"]["dimension"] == config["hidden_size"]
    assert entries["bart"]["kind"] == "summarizer"
    assert "dimension" not in entries["bart"]
    assert all(m["kind"] in ("encoder", "summarizer") for m in entries.values())
    assert all(m["max_tokens"] > 0 for m in entries.values())


# --- /embed ------------------------------------------------------------------

def test_embed_tokens_mode_shapes(client):
    response = client.post(
        "/embed", json={"model": "roberta", "texts": ["hello world"], "mode": "tokens"}
    )
    assert response.status_code == 200
    payload = response.json()
    (result,) = payload["results"]
    assert len(result["tokens"]) == len(result["vectors"]) >= 1
    assert all(len(v) == payload["dim"] for v in result["vectors"])
    assert result["truncated"] is False


def test_embed_dim_matches_models_catalogue(client):
    advertised = {m["name"]: m for m in client.get("/models").json()}
    payload = client.post(
        "/embed", json={"model": "roberta", "texts": ["check the dim"]}
    ).json()
    assert payload["dim"] == advertised["roberta"]["dimension"]


def test_embed_same_text_twice_in_batch_identical(client):
    payload = client.post(
        "/embed",
        json={"model": "roberta", "texts": ["same text", "same text"], "mode": "tokens"},
    ).json()
    first, second = payload["results"]
    assert first["vectors"] == second["vectors"]


def test_embed_double_request_equality(client):
    body = {"model": "roberta", "texts": ["deterministic embedding"], "mode": "tokens"}
    assert client.post("/embed", json=body).json() == client.post("/embed", json=body).json()


def test_embed_mean_of_single_token_equals_tokens_vector(client):
    # find a text the checkpoint's tokenizer keeps as one subword
    single = None
    for candidate in ("the", "meeting", "budget", "was", "to", "a"):
        payload = client.post(
            "/embed", json={"model": "roberta", "texts": [candidate], "mode": "tokens"}
        ).json()
        if len(payload["results"][0]["vectors"]) == 1:
            single = candidate, payload["results"][0]["vectors"][0]
            break
    assert single is not None, "no single-subword candidate found"
    text, tokens_vec = single
    mean_payload = client.post(
        "/embed", json={"model": "roberta", "texts": [text], "mode": "mean"}
    ).json()
    mean_vec = mean_payload["results"][0]["vectors"][0]
    assert all(abs(a - b) < 1e-6 for a, b in zip(tokens_vec, mean_vec))


def test_embed_mean_identical_texts_cosine_one(client):
    payload = client.post(
        "/embed",
        json={
            "model": "roberta",
            "texts": ["the budget was capped", "the budget was capped"],
            "mode": "mean",
        },
    ).json()
    a = payload["results"][0]["vectors"][0]
    b = payload["results"][1]["vectors"][0]
    assert abs(cosine(a, b) - 1.0) <= 1e-6


def test_embed_unknown_model_404(client):
    response = client.post("/embed", json={"model": "electra", "texts": ["x"]})
    assert response.status_code == 404


def test_embed_summarizer_is_not_an_encoder(client):
    response = client.post("/embed", json={"model": "bart", "texts": ["x"]})
    assert response.status_code == 404


def test_embed_malformed_body_400(client):
    response = client.post("/embed", json={"texts": "not-a-list"})
    assert response.status_code == 400


def test_embed_empty_text_400(client):
    response = client.post("/embed", json={"model": "roberta", "texts": ["  "]})
    assert response.status_code == 400


def test_embed_batch_limit_413(client):
    response = client.post(
        "/embed", json={"model": "roberta", "texts": ["x"] * 65}
    )
    assert response.status_code == 413


def test_embed_truncates_overlong_text(client):
    advertised = {m["name"]: m for m in client.get("/models").json()}
    words = " ".join(["petitions"] * (advertised["roberta"]["max_tokens"] + 50))
    payload = client.post(
        "/embed", json={"model": "roberta", "texts": [words], "mode": "tokens"}
    ).json()
    result = payload["results"][0]
    assert result["truncated"] is True
    assert len(result["vectors"]) <= advertised["roberta"]["max_tokens"]


# --- /summarize --------------------------------------------------------------

def test_summarize_returns_nonempty_summary(client):
    response = client.post(
        "/summarize",
        json={"model": "bart", "text": "<s> what was decided </s> the budget was capped </s>"},
    )
    assert response.status_code == 200
    payload = response.json()
    assert payload["summary"].strip()
    assert payload["truncated"] is False


def test_summarize_double_request_equality(client):
    body = {"model": "bart", "text": "<s> q </s> petitions were presented </s>"}
    assert (
        client.post("/summarize", json=body).json()
        == client.post("/summarize", json=body).json()
    )


def test_summarize_unknown_model_404(client):
    response = client.post("/summarize", json={"model": "pegasus", "text": "x"})
    assert response.status_code == 404


def test_summarize_empty_text_422(client):
    response = client.post("/summarize", json={"model": "bart", "text": "   "})
    assert response.status_code == 422


def test_summarize_flags_overlong_input(client):
    words = " ".join(["schedule"] * 1200)
    response = client.post("/summarize", json={"model": "bart", "text": words})
    assert response.status_code == 200
    assert response.json()["truncated"] is True
