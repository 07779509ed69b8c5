import json
import queue
import threading
from contextlib import contextmanager

import pytest
from fastapi.testclient import TestClient

from smartbin.classify import make_item_image
from smartbin.gateway import build_components, create_app
from smartbin.ledger import make_qr_payload

BLUE_ITEM = make_item_image(1, __import__("smartbin.model", fromlist=["BinColor"]).BinColor.BLUE)


@pytest.fixture()
def components():
    return build_components(start_time=1000.0)


@pytest.fixture()
def client(components):
    app = create_app(components, simulation=True, heartbeat_seconds=0.2)
    with TestClient(app) as test_client:
        yield test_client


def _post_stimulus(client, channel, payload=None):
    response = client.post("/stimulus", json={"channel": channel, "payload": payload or {}})
    assert response.status_code == 202, response.text
    return response.json()


def _advance(client, seconds):
    return _post_stimulus(client, "advance_clock", {"seconds": seconds})


def _start_blue_session(client):
    _post_stimulus(client, "main_proximity")
    _post_stimulus(client, "camera", {"image_b64": BLUE_ITEM})


def test_state_endpoint_reports_idle(client):
    body = client.get("/state").json()
    assert body["state"] == "Idle"
    assert body["led"] == "ready"
    assert body["time"] == 1000.0


def test_stimulus_leaves_idle(client):
    body = _post_stimulus(client, "main_proximity")
    assert body["accepted"] is True
    assert body["state"] == "Capturing"


def test_unknown_channel_is_422(client):
    response = client.post("/stimulus", json={"channel": "microwave"})
    assert response.status_code == 422


def test_stimulus_rejected_when_simulation_disabled(components):
    app = create_app(components, simulation=False)
    with TestClient(app) as client:
        response = client.post("/stimulus", json={"channel": "main_proximity"})
        assert response.status_code == 403


def test_full_session_over_http_with_qr_reward(client):
    _start_blue_session(client)
    assert client.get("/state").json()["state"] == "AwaitDisposal"
    assert client.get("/state").json()["detail"]["predicted"] == "blue"
    _post_stimulus(client, "bin_proximity", {"bin": "blue"})
    assert client.get("/state").json()["state"] == "RewardPrompt"
    address = client.get("/wallet").json()["address"]
    response = client.post("/qr", json={"payload": make_qr_payload(address)})
    assert response.status_code == 202
    assert response.json()["state"] == "Finalizing"
    _advance(client, 0.1)
    assert client.get("/state").json()["state"] == "Idle"
    wallets = {w["label"]: w["balance"] for w in client.get("/ledger/wallets").json()}
    assert wallets["user"] == "0.01"
    assert wallets["itrash"] == "99.99"
    records = client.get("/records").json()
    assert len(records) == 1
    assert records[0]["outcome"] == "correct_rewarded"


def test_wrong_bin_session_over_http(client):
    _start_blue_session(client)
    _post_stimulus(client, "bin_proximity", {"bin": "brown"})
    state = client.get("/state").json()
    assert state["state"] == "Finalizing"
    assert state["led"] == "error"
    _advance(client, 0.1)
    records = client.get("/records").json()
    assert records[0]["outcome"] == "incorrect_bin"


def test_donation_endpoint_during_menu(client):
    _start_blue_session(client)
    _post_stimulus(client, "bin_proximity", {"bin": "blue"})
    _advance(client, 10.0)  # reward prompt expires into the NGO menu
    assert client.get("/state").json()["state"] == "DonateMenu"
    response = client.get("/donate/3")
    assert response.status_code == 200
    assert response.text == "Reward sent!"
    wallets = {w["label"]: w["balance"] for w in client.get("/ledger/wallets").json()}
    assert wallets["ngo_3"] == "0.01"
    transfers = [
        json.loads(line)
        for line in client.get("/ledger/transfers").text.splitlines()
        if line
    ]
    assert len(transfers) == 1
    assert transfers[0]["amount"] == "0.01"


def test_donation_without_active_session_is_409(client):
    assert client.get("/donate/1").status_code == 409


def test_donation_with_invalid_ngo_is_404(client):
    _start_blue_session(client)
    _post_stimulus(client, "bin_proximity", {"bin": "blue"})
    _advance(client, 10.0)
    assert client.get("/donate/5").status_code == 404


def test_reward_prompt_timeout_then_menu_timeout_is_unclaimed(client):
    _start_blue_session(client)
    _post_stimulus(client, "bin_proximity", {"bin": "blue"})
    _advance(client, 10.0)
    _advance(client, 30.0)
    _advance(client, 0.1)
    assert client.get("/state").json()["state"] == "Idle"
    records = client.get("/records").json()
    assert records[0]["outcome"] == "correct_unclaimed"


def test_malformed_qr_leaves_prompt_open(client):
    _start_blue_session(client)
    _post_stimulus(client, "bin_proximity", {"bin": "blue"})
    response = client.post("/qr", json={"payload": "http://evil"})
    assert response.json()["state"] == "RewardPrompt"


@contextmanager
def _live_server(components, heartbeat_seconds=0.5):
    """Serve the gateway on a loopback port; TestClient cannot stream SSE."""
    import socket
    import time

    import uvicorn

    app = create_app(components, simulation=True, heartbeat_seconds=heartbeat_seconds)
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("gateway did not start")
        time.sleep(0.01)
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5)


def _read_sse(base_url, collected, stop, n_wanted):
    import httpx

    try:
        with httpx.Client(timeout=10.0) as client:
            with client.stream("GET", f"{base_url}/events") as response:
                event_type = None
                for line in response.iter_lines():
                    if line.startswith("event: "):
                        event_type = line.split(": ", 1)[1]
                    elif line.startswith("data: "):
                        collected.put((event_type, json.loads(line.split(": ", 1)[1])))
                        if collected.qsize() >= n_wanted:
                            return
                    if stop.is_set():
                        return
    except httpx.HTTPError:
        pass


def _collect_states(components, n_wanted, action, timeout=8.0, heartbeat_seconds=0.5):
    """Open an SSE stream, run `action` against the live server, collect."""
    collected: queue.Queue = queue.Queue()
    stop = threading.Event()
    with _live_server(components, heartbeat_seconds) as base_url:
        reader = threading.Thread(
            target=_read_sse, args=(base_url, collected, stop, n_wanted), daemon=True
        )
        reader.start()
        import httpx

        with httpx.Client(base_url=base_url, timeout=10.0) as client:
            action(client)
        reader.join(timeout)
        stop.set()
    messages = []
    while not collected.empty():
        messages.append(collected.get())
    return messages


def test_push_stream_reports_happy_path_sequence(components):
    def run_session(client):
        import time

        time.sleep(0.3)  # let the subscriber receive its snapshot first
        client.post("/stimulus", json={"channel": "main_proximity", "payload": {}})
        client.post("/stimulus", json={"channel": "camera", "payload": {"image_b64": BLUE_ITEM}})
        client.post("/stimulus", json={"channel": "bin_proximity", "payload": {"bin": "blue"}})
        address = client.get("/wallet").json()["address"]
        client.post("/qr", json={"payload": make_qr_payload(address)})
        client.post("/stimulus", json={"channel": "advance_clock", "payload": {"seconds": 0.1}})
        time.sleep(0.5)  # give the push channel time to drain

    messages = _collect_states(components, n_wanted=15, action=run_session,
                               heartbeat_seconds=5.0)
    states = [
        body["state"]
        for kind, body in messages
        if kind == "state" and body.get("cause") in ("snapshot", "state")
    ]
    assert states == [
        "Idle", "Capturing", "Classifying", "AwaitDisposal",
        "RewardPrompt", "Finalizing", "Idle",
    ]


def test_two_subscribers_see_identical_sequences(components):
    from smartbin.gateway import _Broadcast

    broadcast = _Broadcast(components.runtime)
    first, second = broadcast.subscribe(), broadcast.subscribe()
    app = create_app(components, simulation=True)
    with TestClient(app) as client:
        _start_blue_session(client)
        _post_stimulus(client, "bin_proximity", {"bin": "brown"})
        _advance(client, 0.1)

    def drain(q):
        items = []
        while not q.empty():
            items.append(q.get())
        return items

    seq_a, seq_b = drain(first), drain(second)
    assert seq_a == seq_b
    assert [m["state"] for m in seq_a if m["cause"] == "state"] == [
        "Capturing", "Classifying", "AwaitDisposal", "Finalizing", "Idle",
    ]


def test_heartbeat_when_nothing_happens(components):
    def wait(client):
        import time

        time.sleep(1.2)

    messages = _collect_states(
        components, n_wanted=3, action=wait, timeout=4.0, heartbeat_seconds=0.3
    )
    kinds = [kind for kind, _ in messages]
    assert len(kinds) >= 3
    assert kinds[0] == "state"  # initial snapshot
    assert all(kind == "heartbeat" for kind in kinds[1:])


def test_led_and_lcd_effects_are_pushed_in_order(components):
    app = create_app(components, simulation=True)
    from smartbin.gateway import _Broadcast

    broadcast = _Broadcast(components.runtime)
    subscriber = broadcast.subscribe()
    with TestClient(app) as client:
        _start_blue_session(client)
        _post_stimulus(client, "bin_proximity", {"bin": "blue"})
    events = []
    while not subscriber.empty():
        message = subscriber.get()
        if message["cause"] == "led":
            events.append(("led", message["led"]))
        elif message["cause"] == "lcd":
            events.append(("lcd", message["lcd"]))
    assert events == [
        ("led", "processing"),
        ("led", "solid_blue"),
        ("lcd", "show_qr_prompt"),
    ]


def test_records_endpoint_lists_store_content(client):
    assert client.get("/records").json() == []
    _start_blue_session(client)
    _advance(client, 11.0)  # disposal window expires
    _advance(client, 0.1)
    records = client.get("/records").json()
    assert len(records) == 1
    assert records[0]["outcome"] == "timeout"
