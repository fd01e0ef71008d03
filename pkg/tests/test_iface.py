import json
import threading
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor

import pytest

from presence_forecast import api, cli
from presence_forecast.config import EngineConfig
from presence_forecast.engine import Snapshot
from presence_forecast.errors import InsufficientHistory, MalformedQuery, NotFound
from presence_forecast.service import SnapshotHolder, make_server
from presence_forecast.store import Store

AT = "2024-02-20T10:15:00Z"  # a Tuesday inside the 60-day store


def run(capsysbinary, *argv):
    code = cli.main(list(argv))
    out, err = capsysbinary.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def snapshot(sim_store):
    return Snapshot.from_store(Store(sim_store), EngineConfig())


@pytest.fixture(scope="module")
def service(sim_store, snapshot):
    loads = []

    def loader():
        loads.append(1)
        return Snapshot.from_store(Store(sim_store), EngineConfig(), retrain=True)

    holder = SnapshotHolder(snapshot, loader)
    server = make_server(holder, port=0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}", holder, loads
    server.shutdown()
    server.server_close()


def post(base, path, body):
    data = body if isinstance(body, bytes) else json.dumps(body).encode()
    req = urllib.request.Request(base + path, data=data, method="POST", headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as e:
        return e.code, e.read()


BLOCK_QUERY = {"user": "u1", "kind": "time_until_return", "at": AT, "params": {"min_stay": 900, "away": 1500}}


class TestApi:
    def test_forecast_wire_shape(self, snapshot):
        status, body = api.handle(snapshot, "forecast", BLOCK_QUERY)
        assert status == 200
        assert body["kind"] == "time_until_return"
        probs = [p for _, p in body["cdf"]]
        assert probs == sorted(probs) and all(isinstance(t, int) for t, _ in body["cdf"])
        assert set(body["quantiles"]) == {"0.5", "0.8", "0.9"}
        assert "0.8" in body["summary"]

    def test_error_mapping(self, snapshot):
        cases = [
            ({**BLOCK_QUERY, "kind": "time_until_lunch"}, 400, "MalformedQuery"),
            ({**BLOCK_QUERY, "extra": 1}, 400, "MalformedQuery"),
            ({**BLOCK_QUERY, "params": {"min_absence": 60}}, 400, "MalformedQuery"),
            ({**BLOCK_QUERY, "params": {"away": -5}}, 400, "MalformedQuery"),
            ({**BLOCK_QUERY, "at": "yesterday"}, 400, "MalformedQuery"),
            ({**BLOCK_QUERY, "user": "ghost"}, 404, "NotFound"),
            ({**BLOCK_QUERY, "at": "2023-06-01T10:00:00Z"}, 422, "InsufficientHistory"),
        ]
        for payload, status, code in cases:
            got_status, body = api.handle(snapshot, "forecast", payload)
            assert (got_status, body["error"]["code"]) == (status, code)
        assert api.handle(snapshot, "nope", {})[0] == 404
        assert api.status_for(MalformedQuery("x")) == 400
        assert api.status_for(NotFound("x")) == 404
        assert api.status_for(InsufficientHistory("x")) == 422

    def test_meeting_endpoints(self, snapshot):
        appt = snapshot.users["u1"].calendar[0]
        status, body = api.handle(snapshot, "attendance", {"user": "u1", "appointment_id": appt.id})
        assert status == 200 and body["p_attend"] in (0.0, 1.0)
        status, body = api.handle(snapshot, "interruptability", {"user": "u1", "appointment_id": appt.id})
        assert status == 200 and sum(body["dist"].values()) == pytest.approx(1.0)
        status, body = api.handle(
            snapshot, "eci", {"p_attend": 0.64, "interrupt_dist": [0.5, 0.4, 0.1], "period_key": "morning/weekday"}
        )
        assert status == 200 and body["eci"] == 5.008
        assert api.handle(snapshot, "eci", {"p_attend": True, "period_key": "x"})[0] == 400

    def test_canonical_encoding(self):
        assert api.encode({"b": 1, "a": [1.5, "é"]}) == '{"a":[1.5,"é"],"b":1}\n'.encode()


class TestCli:
    def test_forecast_table_and_summary(self, capsysbinary, sim_store):
        code, out, _ = run(capsysbinary, "forecast", "--store", str(sim_store), "--user", "u1",
                           "--kind", "time_until_return", "--min-stay", "15m", "--away", "25m", "--at", AT)
        text = out.decode()
        assert code == 0
        assert "minutes  P(event by then)" in text and "0.8" in text.splitlines()[-1]

    def test_forecast_json_matches_api(self, capsysbinary, sim_store, snapshot):
        code, out, _ = run(capsysbinary, "forecast", "--store", str(sim_store), "--user", "u1",
                           "--kind", "time_until_return", "--min-stay", "900", "--away", "1500", "--at", AT, "--json")
        assert code == 0
        assert out == api.encode(api.handle(snapshot, "forecast", BLOCK_QUERY)[1])

    def test_eci(self, capsysbinary, sim_store):
        code, out, _ = run(capsysbinary, "eci", "--p-attend", "0.64", "--dist", "0.5,0.4,0.1", "--period-key", "morning/weekday")
        assert (code, out) == (0, b"5.008\n")
        code, out, _ = run(capsysbinary, "eci", "--store", str(sim_store), "--user", "u1", "--at", "2024-02-20T03:00:00Z")
        assert (code, out) == (0, b"2.0\n")

    def test_exit_codes(self, capsysbinary, sim_store):
        code, _, err = run(capsysbinary, "forecast", "--bogus")
        assert code == 2 and b"usage" in err
        code, _, err = run(capsysbinary, "forecast", "--store", str(sim_store), "--user", "ghost",
                           "--kind", "time_until_return", "--at", AT)
        assert code == 1 and err.startswith(b"NotFound")
        code, _, err = run(capsysbinary, "eci")
        assert code == 1 and err.startswith(b"InvalidInput")

    def test_simulate_is_deterministic(self, capsysbinary, tmp_path):
        for name in ("a", "b"):
            code, _, _ = run(capsysbinary, "simulate", "--out", str(tmp_path / name), "--days", "10", "--seed", "7")
            assert code == 0
        files = sorted(p.name for p in (tmp_path / "a").iterdir() if p.is_file())
        assert "events.jsonl" in files
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        assert run(capsysbinary, "simulate", "--out", str(tmp_path / "a"), "--days", "10")[0] == 1

    def test_store_workflow(self, capsysbinary, tmp_path):
        src = tmp_path / "sim"
        assert run(capsysbinary, "simulate", "--out", str(src), "--days", "40", "--no-annotations")[0] == 0
        store = tmp_path / "store"
        code, out, _ = run(capsysbinary, "ingest", "--store", str(store), "--user", "u1",
                           "--events", str(src / "events.jsonl"), "--devices", str(src / "devices.jsonl"),
                           "--directory", str(src / "directory.jsonl"), "--calendar", str(src / "calendars" / "u1.jsonl"))
        assert code == 0 and json.loads(out)["events"] > 0 and json.loads(out)["appointments"] > 0
        code, _, err = run(capsysbinary, "ingest", "--store", str(store), "--events", str(src / "missing.jsonl"))
        assert code == 1 and err.startswith(b"InvalidInput")

        code, out, _ = run(capsysbinary, "coalesce", "--store", str(store), "--user", "u1")
        segments = [json.loads(line) for line in out.decode().splitlines()]
        assert code == 0 and len(segments) > 10

        form = tmp_path / "form.jsonl"
        code, out, _ = run(capsysbinary, "annotate-form", "--store", str(store), "--user", "u1", "--out", str(form))
        report = json.loads(out)
        assert code == 0 and report["meetings"] > 0 and report["drafts"] > 0
        code, out, _ = run(capsysbinary, "ingest", "--store", str(store), "--user", "u1", "--annotation-form", str(form))
        assert code == 0 and json.loads(out)["annotations"] == report["drafts"]

        code, out, err = run(capsysbinary, "evaluate", "--store", str(store), "--user", "u1", "--holdout", "5")
        report = json.loads(out)
        assert code == 0 and report["calibration"]["status"] == "skipped"
        assert "accuracy" in report["attendance"] or "error" in report["attendance"]


class TestService:
    def test_health_and_errors(self, service):
        base, holder, _ = service
        with urllib.request.urlopen(base + "/v1/health", timeout=10) as resp:
            assert json.loads(resp.read())["ok"] is True
        status, body = post(base, "/v1/forecast", b"{not json")
        assert status == 400 and json.loads(body)["error"]["code"] == "MalformedQuery"
        status, body = post(base, "/v1/forecast", {**BLOCK_QUERY, "user": "ghost"})
        assert status == 404
        status, body = post(base, "/v2/forecast", BLOCK_QUERY)
        assert status == 404

    def test_matches_in_process_answer(self, service, snapshot):
        base, _, _ = service
        status, body = post(base, "/v1/forecast", BLOCK_QUERY)
        assert status == 200 and body == api.encode(api.handle(snapshot, "forecast", BLOCK_QUERY)[1])
        status, body = post(base, "/v1/eci", {"p_attend": 0.64, "interrupt_dist": [0.5, 0.4, 0.1], "period_key": "morning/weekday"})
        assert json.loads(body)["eci"] == 5.008

    def test_burst_of_identical_queries(self, service):
        base, _, _ = service
        with ThreadPoolExecutor(max_workers=16) as pool:
            results = list(pool.map(lambda _: post(base, "/v1/forecast", BLOCK_QUERY), range(100)))
        assert {s for s, _ in results} == {200}
        assert len({b for _, b in results}) == 1

    def test_reload_swaps_snapshot(self, service):
        base, holder, loads = service
        before = holder.snapshot
        status, body = post(base, "/v1/reload", {})
        assert status == 200 and json.loads(body)["generation"] == 1 and loads == [1]
        assert holder.snapshot is not before
        assert post(base, "/v1/forecast", BLOCK_QUERY)[0] == 200
