"""Service boundary for the kiosk UI and external clients.

Exposes the live controller state, stimulus injection (simulation mode
only), the four NGO donation endpoints, ledger and record queries, and a
server-sent-events stream that pushes every state change and LED/LCD
effect in order. All mutating requests funnel through one lock, so
nothing bypasses the controller's single-consumer queue.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from .devices import DeviceSimulator, Stimulus
from .fsm import QrScanned, SetLed, ShowLcd
from .ledger import Ledger, RewardService, bootstrap_ledger
from .model import record_to_dict
from .runtime import ControllerRuntime, InvalidNgoError, NoActiveSessionError, Transition
from .store import EventStore

logger = logging.getLogger(__name__)

DEFAULT_HEARTBEAT_SECONDS = 10.0

# Virtual channel accepted by POST /stimulus in simulation mode to move the
# clock (and fire due timeouts) without waiting on wall time.
CHANNEL_ADVANCE_CLOCK = "advance_clock"


class StimulusIn(BaseModel):
    channel: str
    payload: dict = {}
    at: float | None = None


class QrIn(BaseModel):
    payload: str


@dataclass
class GatewayComponents:
    runtime: ControllerRuntime
    simulator: DeviceSimulator
    ledger: Ledger
    store: EventStore
    rewards: RewardService
    user_wallet: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


def build_components(
    store: EventStore | None = None,
    tick_interval: float = 0.1,
    start_time: float = 0.0,
    system_funds=None,
    classifier=None,
) -> GatewayComponents:
    """Wire a fresh controller, simulator, ledger and store for serving.

    The default classifier reads the true label embedded in the kiosk's
    item-gallery images, so live demo sessions light the matching bin.
    """
    from decimal import Decimal

    from .classify import TableClassifier, identity_table
    from .devices import VirtualClock

    clock = VirtualClock(start_time)
    simulator = DeviceSimulator(clock, tick_interval=tick_interval)
    ledger, system_address, ngo_addresses = bootstrap_ledger(
        system_funds if system_funds is not None else Decimal("100.0")
    )
    user_wallet = ledger.create_wallet("user", 0)
    rewards = RewardService(ledger, system_address, ngo_addresses)
    store = store if store is not None else EventStore()
    runtime = ControllerRuntime(
        clock=clock,
        config=None,
        classifier=classifier if classifier is not None else TableClassifier(identity_table()),
        store=store,
        rewards=rewards,
        led=simulator.led,
        lcd=simulator.lcd,
    )
    return GatewayComponents(
        runtime=runtime,
        simulator=simulator,
        ledger=ledger,
        store=store,
        rewards=rewards,
        user_wallet=user_wallet.address,
    )


class _Broadcast:
    """Fan-out of controller transitions to SSE subscriber queues."""

    def __init__(self, runtime: ControllerRuntime):
        self.runtime = runtime
        self._subscribers: list[queue.Queue] = []
        self._lock = threading.Lock()
        runtime.add_listener(self._on_transition)

    def _snapshot_message(self, cause: str, at: float | None = None) -> dict:
        message = self.runtime.snapshot()
        message["cause"] = cause
        if at is not None:
            message["time"] = at
        return message

    def _on_transition(self, transition: Transition) -> None:
        messages = []
        if type(transition.after) is not type(transition.before):
            messages.append(self._snapshot_message("state", transition.at))
        for effect in transition.effects:
            if isinstance(effect, SetLed):
                msg = self._snapshot_message("led", transition.at)
                msg["led"] = effect.pattern.value
                messages.append(msg)
            elif isinstance(effect, ShowLcd):
                msg = self._snapshot_message("lcd", transition.at)
                msg["lcd"] = effect.screen.value
                messages.append(msg)
        with self._lock:
            for subscriber in self._subscribers:
                for message in messages:
                    subscriber.put(message)

    def subscribe(self) -> queue.Queue:
        subscriber: queue.Queue = queue.Queue()
        with self._lock:
            self._subscribers.append(subscriber)
        return subscriber

    def unsubscribe(self, subscriber: queue.Queue) -> None:
        with self._lock:
            if subscriber in self._subscribers:
                self._subscribers.remove(subscriber)


def create_app(
    components: GatewayComponents,
    simulation: bool = True,
    heartbeat_seconds: float = DEFAULT_HEARTBEAT_SECONDS,
) -> FastAPI:
    app = FastAPI(title="smartbin gateway", docs_url=None, redoc_url=None)
    runtime = components.runtime
    simulator = components.simulator
    broadcast = _Broadcast(runtime)
    app.state.components = components

    @app.get("/state")
    def get_state() -> dict:
        return runtime.snapshot()

    @app.post("/stimulus", status_code=202)
    def post_stimulus(stimulus: StimulusIn) -> dict:
        if not simulation:
            raise HTTPException(status_code=403, detail="simulation mode is disabled")
        with components.lock:
            if stimulus.channel == CHANNEL_ADVANCE_CLOCK:
                seconds = float(stimulus.payload.get("seconds", 0.0))
                if seconds < 0:
                    raise HTTPException(status_code=422, detail="seconds must be >= 0")
                runtime.pump(simulator.advance(seconds))
            else:
                at = stimulus.at if stimulus.at is not None else runtime.clock.now
                try:
                    simulator.inject(Stimulus(at=at, channel=stimulus.channel,
                                              payload=stimulus.payload))
                except (ValueError, KeyError) as exc:
                    raise HTTPException(status_code=422, detail=str(exc)) from exc
                runtime.pump(simulator.advance(0))
            return {"accepted": True, "state": runtime.snapshot()["state"]}

    @app.post("/qr", status_code=202)
    def post_qr(body: QrIn) -> dict:
        with components.lock:
            runtime.submit(runtime.clock.now, QrScanned(body.payload))
            return {"accepted": True, "state": runtime.snapshot()["state"]}

    @app.get("/donate/{ngo_id}", response_class=PlainTextResponse)
    def donate(ngo_id: int) -> str:
        with components.lock:
            try:
                return runtime.donate(ngo_id)
            except InvalidNgoError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except NoActiveSessionError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc

    @app.get("/ledger/wallets")
    def ledger_wallets() -> JSONResponse:
        wallets = [
            {"address": w.address, "label": w.label, "balance": str(w.balance)}
            for w in components.ledger.wallets()
        ]
        return JSONResponse(wallets)

    @app.get("/ledger/transfers")
    def ledger_transfers() -> PlainTextResponse:
        lines = [
            json.dumps(tx.to_dict(), sort_keys=True)
            for tx in components.ledger.transfers()
        ]
        return PlainTextResponse(
            "\n".join(lines) + ("\n" if lines else ""),
            media_type="application/x-ndjson",
        )

    @app.get("/records")
    def records() -> JSONResponse:
        return JSONResponse([record_to_dict(r) for r in components.store.records()])

    @app.get("/wallet")
    def wallet() -> dict:
        return {"address": components.user_wallet}

    @app.get("/events")
    def events() -> StreamingResponse:
        subscriber = broadcast.subscribe()

        def stream():
            try:
                yield _sse("state", broadcast._snapshot_message("snapshot"))
                while True:
                    try:
                        message = subscriber.get(timeout=heartbeat_seconds)
                    except queue.Empty:
                        yield _sse("heartbeat", {"time": runtime.clock.now})
                        continue
                    yield _sse("state", message)
            finally:
                broadcast.unsubscribe(subscriber)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app


def _sse(event: str, data: dict) -> str:
    return f"event: {event}\ndata: {json.dumps(data)}\n\n"


def serve(
    host: str = "127.0.0.1",
    port: int = 8000,
    simulation: bool = True,
    tick_interval: float = 0.1,
    store_path: str | None = None,
    auto_tick: bool = True,
) -> None:
    """Run the gateway under uvicorn, following wall time when auto_tick."""
    import time

    import uvicorn

    components = build_components(
        store=EventStore(store_path) if store_path else None,
        tick_interval=tick_interval,
        start_time=time.time(),
    )
    app = create_app(components, simulation=simulation)

    if auto_tick:
        def ticker() -> None:
            while True:
                time.sleep(tick_interval)
                with components.lock:
                    components.runtime.pump(components.simulator.advance(tick_interval))

        threading.Thread(target=ticker, daemon=True, name="clock-ticker").start()

    uvicorn.run(app, host=host, port=port, log_level="warning")
