from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from agora.service import create_app

ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def client():
    return TestClient(create_app())


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200 and r.json()["status"] == "ok"


def test_prove_endpoint(client):
    r = client.post("/prove", json={
        "formula": "(b0 # b1 # b2)^u -> (b0 # b1 # b2)^w", "verify": True})
    body = r.json()
    assert body["status"] == "provable"
    assert body["rules"] == {"wait": 3, "switch": 2}
    assert body["verified"] is True
    assert body["proof"].startswith("wait ")

    assert client.post("/prove", json={"formula": "P + ~P"}).json()["status"] == "unprovable"
    assert client.post("/prove", json={"formula": "p -> ("}).json()["status"] == "parse-error"
    assert client.post("/prove", json={
        "formula": "(b0 # b1)^u -> (b0 # b1)^w", "budget": 1}).json()["status"] == "timeout"


def _scenario_files(name):
    d = ROOT / "scenarios" / name
    return [{"name": p.name, "text": p.read_text()}
            for p in sorted(d.glob("*.agent")) + sorted(d.glob("*.cfg"))]


def test_check_endpoint(client):
    r = client.post("/check", json={"files": _scenario_files("atm")})
    assert r.json()["ok"] is True
    assert r.json()["agents"] == ["credit", "db", "kim", "m", "user"]

    bad = [{"name": "x.agent", "text": "agent db. agent db."}]
    r = client.post("/check", json={"files": bad})
    assert r.json()["ok"] is False
    assert "duplicate" in r.json()["diagnostics"][0]["message"]


def test_run_endpoint(client):
    r = client.post("/scenarios/run", json={
        "files": _scenario_files("habitat"),
        "assertions": ["a internal answer user:0 habitat_i3_senegal"]})
    body = r.json()
    assert body["ok"] is True
    assert any("habitat_i3_senegal" in line for line in body["trace"])

    r = client.post("/scenarios/run", json={
        "files": _scenario_files("habitat"), "assertions": ["no such event"]})
    assert r.json()["ok"] is False
    assert r.json()["failed_assertion"] == "no such event"


def test_play_endpoints(client):
    r = client.post("/play", json={
        "formula": "(b0 # b1)^u -> (b0 # b1)^w", "valuation": {"b1": True}})
    body = r.json()
    assert body["ok"] is True
    sid = body["play"]["session_id"]

    r = client.post(f"/play/{sid}/moves", json={"command": "switch 1"})
    body = r.json()
    assert body["ok"] is True
    assert body["play"]["machine_moves"] == ["⊤ 1 switch", "⊤ 0 switch"]

    r = client.post(f"/play/{sid}/moves", json={"command": "switch 1"})
    assert r.json()["ok"] is False  # chain exhausted

    r = client.get(f"/play/{sid}")
    assert "[~b1]" in r.json()["play"]["view"]

    r = client.post(f"/play/{sid}/quit")
    assert r.json()["winner"] == "⊤"
    assert client.get(f"/play/{sid}").status_code == 404


def test_play_rejects_unprovable(client):
    r = client.post("/play", json={"formula": "P + ~P"})
    assert r.json()["ok"] is False
