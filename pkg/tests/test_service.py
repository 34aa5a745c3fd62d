"""HTTP service: live sessions, tuning, reports, and thin-client data."""

import json

import pytest
from fastapi.testclient import TestClient

from tapreward.canonical import canonical_bytes
from tapreward.envelope import config_from_doc, config_hash, config_to_doc, preset
from tapreward.harness import run_paired
from tapreward.reporting import report_to_doc
from tapreward.rng import derive_seed
from tapreward.service import create_app
from tapreward.traces import validate_trace

SERVICE_SEED = 777


@pytest.fixture()
def api(tmp_path):
    app = create_app(tmp_path / "data", service_seed=SERVICE_SEED)
    with TestClient(app) as client:
        client.data_dir = tmp_path / "data"
        yield client


def taps_payload():
    lanes = [0, 1, 2, 3, 4, 3, 2, 1] * 3
    taps = []
    for i, lane in enumerate(lanes):
        taps.append(
            {
                "timestamp_ms": 400 + i * 600,
                "lane": lane,
                "intensity": 0.55 if i % 5 else 0.85,
                "outcome": "hit",
            }
        )
    return {"taps": taps}


def finalize_session(api, payload=None):
    created = api.post("/sessions", json={"duration_ms": 60000}).json()
    sid = created["session_id"]
    r = api.post(f"/sessions/{sid}/taps", json=payload or taps_payload())
    assert r.status_code == 200
    final = api.post(f"/sessions/{sid}/finalize")
    assert final.status_code == 200
    return sid, final.json()


def test_info_endpoint(api):
    doc = api.get("/").json()
    assert doc["service"] == "tapreward"
    assert doc["active_config"] == "Default"
    assert len(doc["config_hash"]) == 64


def test_session_flow_produces_full_report(api):
    sid, out = finalize_session(api)
    report = out["report"]
    assert report["trace_id"] == sid
    assert report["config_name"] == "Default"
    assert len(report["clamp_records"]) == 3
    assert report["metrics_constrained"]["integrated_lufs"] is not None
    assert out["audio_url"] == f"/reports/{sid}/audio"


def test_finalized_report_matches_headless_run(api):
    # the keystone thin-client property: the service stores a trace and
    # a report that the offline pipeline reproduces bit for bit
    sid, out = finalize_session(api)
    stored_trace = validate_trace((api.data_dir / "traces" / f"{sid}.json").read_bytes())
    seed = derive_seed(SERVICE_SEED, "session", sid)
    offline = run_paired(stored_trace, preset("Default"), seed, include_audio=True)
    assert canonical_bytes(out["report"]) == canonical_bytes(report_to_doc(offline.report))
    stored_report = (api.data_dir / "reports" / f"{sid}.json").read_bytes()
    assert stored_report == canonical_bytes(report_to_doc(offline.report))


def test_tap_rejection_names_the_defect(api):
    created = api.post("/sessions", json={}).json()
    sid = created["session_id"]
    bad = {"taps": [{"timestamp_ms": 100, "lane": 9, "intensity": 0.5, "outcome": "hit"}]}
    r = api.post(f"/sessions/{sid}/taps", json=bad)
    assert r.status_code == 400
    assert "lane" in r.json()["detail"]


def test_tap_after_finalize_rejected(api):
    sid, _ = finalize_session(api)
    r = api.post(f"/sessions/{sid}/taps", json=taps_payload())
    assert r.status_code == 400
    assert "finalized" in r.json()["detail"]


def test_finalize_requires_taps(api):
    sid = api.post("/sessions", json={}).json()["session_id"]
    r = api.post(f"/sessions/{sid}/finalize")
    assert r.status_code == 400


def test_unknown_session_404(api):
    assert api.post("/sessions/live-9999/taps", json=taps_payload()).status_code == 404
    assert api.post("/sessions/live-9999/finalize").status_code == 404


def test_malformed_tap_body_422(api):
    sid = api.post("/sessions", json={}).json()["session_id"]
    r = api.post(f"/sessions/{sid}/taps", json={"taps": [{"lane": "left"}]})
    assert r.status_code == 422


def test_get_config_shape(api):
    doc = api.get("/config").json()
    assert doc["config"]["name"] == "Default"
    assert doc["meta"]["name"] == "Relaxed"
    assert doc["config_hash"] == config_hash(config_from_doc(doc["config"]))


def test_put_config_accepts_nested(api):
    proposal = config_to_doc(preset("Default"))
    proposal["name"] = "Studio"
    proposal["gain_db"]["lower"] = -12.0
    r = api.put("/config", json=proposal)
    assert r.status_code == 200
    body = r.json()
    assert body["accepted"] is True
    assert body["config"]["meta"] == "Relaxed"
    stored = api.data_dir / "configs" / f"{body['config_hash']}.json"
    assert stored.is_file()
    assert api.get("/").json()["active_config"] == "Studio"


def test_put_config_rejects_out_of_meta(api):
    before = api.get("/config").json()["config_hash"]
    proposal = config_to_doc(preset("Default"))
    proposal["name"] = "TooLoud"
    proposal["gain_db"]["upper"] = 2.5
    r = api.put("/config", json=proposal)
    assert r.status_code == 422
    body = r.json()
    assert body["accepted"] is False
    assert body["violations"] == [
        {"parameter": "gain_db", "side": "upper", "excess": 2.5}
    ]
    assert "gain_db.upper" in body["detail"]
    # active config untouched
    assert api.get("/config").json()["config_hash"] == before


def test_tuning_events_recorded_in_next_report(api):
    sid = api.post("/sessions", json={}).json()["session_id"]

    rejected = config_to_doc(preset("Default"))
    rejected["name"] = "Over"
    rejected["tempo_bpm"]["upper"] = 500.0
    assert api.put("/config", json=rejected).status_code == 422

    accepted = config_to_doc(preset("Default"))
    accepted["name"] = "Trim"
    accepted["accent_ratio"]["upper"] = 0.4
    assert api.put("/config", json=accepted).status_code == 200

    api.post(f"/sessions/{sid}/taps", json=taps_payload())
    report = api.post(f"/sessions/{sid}/finalize").json()["report"]
    events = report["tuning_events"]
    assert [e["status"] for e in events] == ["rejected", "accepted"]
    assert events[0]["config_hash"] is None
    assert events[1]["config_name"] == "Trim"
    # the session runs under the config accepted before finalize
    assert report["config_name"] == "Trim"


def test_reports_listing_and_fetch(api):
    sid, out = finalize_session(api)
    listing = api.get("/reports").json()["reports"]
    assert any(row["trace_id"] == sid for row in listing)
    fetched = api.get(f"/reports/{sid}").json()
    assert canonical_bytes(fetched) == canonical_bytes(out["report"])
    assert api.get("/reports/nope").status_code == 404


def test_audio_endpoint_serves_wav(api):
    sid, _ = finalize_session(api)
    r = api.get(f"/reports/{sid}/audio")
    assert r.status_code == 200
    assert r.headers["content-type"] == "audio/wav"
    assert r.content[:4] == b"RIFF"
    assert api.get("/reports/nope/audio").status_code == 404


def test_loudness_endpoint_shape(api):
    sid, _ = finalize_session(api)
    doc = api.get(f"/reports/{sid}/loudness").json()
    assert set(doc) == {"baseline", "constrained"}
    for arm in doc.values():
        assert set(arm) == {"momentary", "short_term"}
        for series in arm.values():
            assert len(series["time_s"]) == len(series["lufs"]) > 0
    assert api.get("/reports/nope/loudness").status_code == 404


def test_restart_preserves_state(api, tmp_path):
    sid, out = finalize_session(api)
    proposal = config_to_doc(preset("Default"))
    proposal["name"] = "Kept"
    proposal["tempo_bpm"]["lower"] = 110.0
    assert api.put("/config", json=proposal).status_code == 200

    fresh = TestClient(create_app(tmp_path / "data", service_seed=SERVICE_SEED))
    assert fresh.get("/").json()["active_config"] == "Kept"
    again = fresh.get(f"/reports/{sid}").json()
    assert canonical_bytes(again) == canonical_bytes(out["report"])
    assert fresh.get(f"/reports/{sid}/loudness").status_code == 200


def test_session_ids_are_sequential(api):
    a = api.post("/sessions", json={}).json()["session_id"]
    b = api.post("/sessions", json={}).json()["session_id"]
    assert (a, b) == ("live-0001", "live-0002")


def test_clamp_badges_match_enforcement(api):
    from tapreward.envelope import EngineParams, enforce

    _, out = finalize_session(api)
    report = out["report"]
    requested = EngineParams.from_doc(report["requested"])
    effective, records = enforce(requested, preset("Default"))
    # HTTP JSON carries full precision; canonicalize both sides to compare
    assert canonical_bytes(report["effective"]) == canonical_bytes(effective.to_doc())
    got = {r["parameter"]: (r["clamped"], r["bound_hit"]) for r in report["clamp_records"]}
    want = {r.parameter: (r.clamped, r.bound_hit) for r in records}
    assert got == want
