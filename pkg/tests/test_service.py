from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

import helpers
from iacforge.service import MAX_BATCH, create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def _policy(k=2, n=2):
    return helpers.k_of_n_policy(k, n).to_dict()


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200 and r.text == "ok"


def test_reward_matches_library(client):
    r = client.post("/v1/reward", json={"config": helpers.DEPLOYABLE, "policy": _policy(3, 4)})
    assert r.status_code == 200 and r.json()["reward"] == 1.75


@pytest.mark.parametrize("body", [{}, {"config": 3}, {"config": "x"}, {"config": "x", "policy": {"rules": "no"}}])
def test_malformed_requests(client, body):
    assert client.post("/v1/reward", json=body).status_code == 400


def test_empty_policy_is_422(client):
    r = client.post("/v1/reward", json={"config": "x", "policy": {"id": "p", "rules": []}})
    assert r.status_code == 422


def test_verify_parse_failure(client):
    r = client.post("/v1/verify", json={"config": 'resource "a" {\n', "stage": "FV2"})
    body = r.json()
    assert r.status_code == 200 and body["stage"] == "FV1" and not body["passed"] and body["code"] == "PARSE"


def test_verify_fv3(client):
    r = client.post("/v1/verify", json={"config": helpers.DEPLOYABLE, "stage": "FV3", "policy": _policy(1, 2)})
    body = r.json()
    assert body["stage"] == "FV3" and body["passed"] is False and body["code"] == "POLICY_FAILED"
    assert client.post("/v1/verify", json={"config": helpers.DEPLOYABLE, "stage": "FV3"}).status_code == 400


def test_batch_group_advantages(client):
    items = [
        {"config": helpers.DEPLOYABLE, "policy": _policy(1, 1)},
        {"config": helpers.DEPLOYABLE, "policy": _policy(0, 1)},
        {"config": helpers.UNCOMPILABLE, "policy": _policy(1, 1)},
    ]
    body = client.post("/v1/reward/batch", json={"items": items, "group": True}).json()
    assert [r["reward"] for r in body["results"]] == [2.0, 1.0, 0.0]
    assert body["group"]["advantages"] == [1.0, 0.0, -1.0]


def test_batch_limits(client):
    item = {"config": "x", "policy": _policy()}
    assert client.post("/v1/reward/batch", json={"items": [item] * (MAX_BATCH + 1)}).status_code == 413
    assert client.post("/v1/reward/batch", json={"items": []}).status_code == 400


def test_bearer_token():
    secured = TestClient(create_app(token="s3cret"))
    assert secured.get("/healthz").status_code == 200
    body = {"config": helpers.DEPLOYABLE, "policy": _policy()}
    assert secured.post("/v1/reward", json=body).status_code == 401
    ok = secured.post("/v1/reward", json=body, headers={"Authorization": "Bearer s3cret"})
    assert ok.status_code == 200
