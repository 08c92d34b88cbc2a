"""Live paired-device sessions over WebSocket.

One asyncio task owns each session and processes commands and timer ticks
in a total order; client connections feed commands in through a queue and
receive frames through per-connection outbound queues, so session state is
never held across client I/O. The engine underneath is the same simulated
network + protocol stack the offline harness uses, with wall-clock time;
every accepted command is recorded so a session can be replayed offline
through run_scenario.
"""

from __future__ import annotations

import asyncio
import json
import time
from contextlib import asynccontextmanager
from dataclasses import asdict, replace

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import audio
from .audio import Level, audible_to_wire
from .catalog import Catalog, Miss, catalog_to_document, load_catalog_file, resolve_tap
from .engine import is_continuation
from .errors import NotPlaying, OutOfBounds
from .protocol import ProtocolConfig, due_announce, on_receive
from .scenario import DEVICE_IDS
from .simnet import NetworkConfig, SimNet

DEFAULT_TICK_MS = 50


class Session:
    """A live pair of virtual guidebooks sharing one catalog."""

    def __init__(self, session_id: str, catalog: Catalog, catalog_ref: str,
                 network: NetworkConfig, protocol: ProtocolConfig,
                 tick_ms: int = DEFAULT_TICK_MS,
                 quiet_gain: float = audio.DEFAULT_QUIET_GAIN):
        self.session_id = session_id
        self.catalog = catalog
        self.catalog_ref = catalog_ref
        self.network_config = network
        self.protocol = protocol
        self.tick_ms = tick_ms
        self.quiet_gain = quiet_gain
        self.origin = time.monotonic()
        self.net = SimNet(network)
        self.devices = {d: audio.initial_state(d, peer, catalog)
                        for d, peer in zip(DEVICE_IDS, reversed(DEVICE_IDS))}
        self.clients: dict[str, asyncio.Queue | None] = {d: None for d in DEVICE_IDS}
        self.queue: asyncio.Queue = asyncio.Queue()
        self.recorded: list[dict] = []
        # last pushed change point per device: (t_ms, state)
        self.last_pushed: dict[str, tuple[int, audio.AudibleState]] = {
            d: (0, audio.SILENCE) for d in DEVICE_IDS}
        self._tips_cleared = {d: True for d in DEVICE_IDS}
        self._task: asyncio.Task | None = None

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        if self._task is None:
            self._task = asyncio.create_task(self._run())

    def close(self) -> None:
        if self._task is not None:
            self._task.cancel()
            self._task = None

    def now_ms(self) -> int:
        return int((time.monotonic() - self.origin) * 1000)

    # -- client binding -----------------------------------------------------

    def bind(self, slot: str, outbound: asyncio.Queue) -> tuple[bool, str]:
        if slot not in DEVICE_IDS:
            return False, "unknown_slot"
        if self.clients[slot] is not None:
            return False, "slot_taken"
        self.clients[slot] = outbound
        return True, ""

    def unbind(self, slot: str, outbound: asyncio.Queue) -> None:
        if self.clients.get(slot) is outbound:
            self.clients[slot] = None  # slot frees; the peer keeps playing

    def _emit(self, slot: str, frame: dict) -> None:
        outbound = self.clients.get(slot)
        if outbound is not None:
            outbound.put_nowait(frame)

    def enqueue_welcome(self, slot: str) -> None:
        now = self.now_ms()
        self._emit(slot, {
            "type": "catalog",
            "session": self.session_id,
            "slot": slot,
            "checksum": self.catalog.checksum,
            "tick_ms": self.tick_ms,
            "catalog": catalog_to_document(self.catalog),
            "device": {
                "current_wall_id": self.devices[slot].current_wall_id,
                "level": self.devices[slot].level.value,
            },
        })
        state = audio.render(self.devices[slot], self.catalog, now, self.quiet_gain)
        self._emit(slot, {"type": "audible", "t_ms": now, "state": audible_to_wire(state)})
        self.last_pushed[slot] = (now, state)

    # -- the owning loop ----------------------------------------------------

    async def _run(self) -> None:
        while True:
            self.step(self.now_ms())
            try:
                slot, command = await asyncio.wait_for(
                    self.queue.get(), timeout=self.tick_ms / 1000)
            except asyncio.TimeoutError:
                continue
            self.handle_command(slot, command)
            self.step(self.now_ms())

    def step(self, now: int) -> None:
        """Deliveries, announce timers, render change points, tip expiries."""
        for delivery in self.net.drain_due(now):
            self.devices[delivery.recipient] = on_receive(
                self.devices[delivery.recipient], delivery.msg, now,
                self.catalog, self.protocol)
        for device_id in DEVICE_IDS:
            state, msg = due_announce(self.devices[device_id], now,
                                      self.protocol, self.catalog)
            self.devices[device_id] = state
            if msg is not None:
                self.net.send(msg, now, state.peer_id)
        for delivery in self.net.drain_due(now):
            self.devices[delivery.recipient] = on_receive(
                self.devices[delivery.recipient], delivery.msg, now,
                self.catalog, self.protocol)
        for device_id in DEVICE_IDS:
            rendered = audio.render(self.devices[device_id], self.catalog, now,
                                    self.quiet_gain)
            basis_t, basis_state = self.last_pushed[device_id]
            if not is_continuation(basis_state, rendered, now - basis_t):
                self.last_pushed[device_id] = (now, rendered)
                self._emit(device_id, {"type": "audible", "t_ms": now,
                                       "state": audible_to_wire(rendered)})
            state = self.devices[device_id]
            if (state.tap_tip_expiry_ms is not None
                    and state.tap_tip_expiry_ms <= now
                    and not self._tips_cleared[device_id]):
                self._tips_cleared[device_id] = True
                self._emit(device_id, {"type": "tips", "outlines": [],
                                       "expires_ms": now})

    # -- commands -----------------------------------------------------------

    def handle_command(self, slot: str, command) -> None:
        if not isinstance(command, dict) or "cmd" not in command:
            self._emit(slot, {"type": "error", "reason": "malformed_command"})
            return
        now = self.now_ms()
        cmd = command.get("cmd")
        try:
            if cmd == "tap":
                self._handle_tap(slot, command, now)
            elif cmd == "set_level":
                self._handle_set_level(slot, command, now)
            elif cmd == "switch_wall":
                self._handle_switch_wall(slot, command, now)
            elif cmd == "stop":
                self._handle_stop(slot, now)
            else:
                self._emit(slot, {"type": "error", "reason": f"unknown_cmd:{cmd}"})
        except (KeyError, TypeError, ValueError):
            self._emit(slot, {"type": "error", "reason": "malformed_command"})

    def _record(self, slot: str, now: int, action: dict) -> None:
        self.recorded.append({"at_ms": now, "device": slot, "action": action})

    def _handle_tap(self, slot: str, command: dict, now: int) -> None:
        wall = self.catalog.wall(str(command["wall_id"]))
        if wall is None:
            self._emit(slot, {"type": "error", "reason": "unknown_wall"})
            return
        x, y = float(command["x"]), float(command["y"])
        try:
            outcome = resolve_tap(wall, (x, y), now)
        except OutOfBounds:
            self._emit(slot, {"type": "error", "reason": "out_of_bounds"})
            return
        self._record(slot, now, {"kind": "tap", "wall_id": wall.wall_id, "x": x, "y": y})
        if isinstance(outcome, Miss):
            outlines = [[list(p) for p in poly] for poly in outcome.tip_outlines]
            self.devices[slot] = replace(self.devices[slot],
                                         tap_tip_expiry_ms=outcome.tip_expiry_ms)
            self._tips_cleared[slot] = False
            self._emit(slot, {"type": "ack", "cmd": "tap", "t_ms": now,
                              "outcome": "miss", "outlines": outlines,
                              "expires_ms": outcome.tip_expiry_ms})
            self._emit(slot, {"type": "tips", "outlines": outlines,
                              "expires_ms": outcome.tip_expiry_ms})
            return
        state, msg = audio.start_personal(self.devices[slot], self.catalog,
                                          outcome.clip_id, now)
        self.devices[slot] = state
        self.net.send(msg, now, state.peer_id)
        self._emit(slot, {"type": "ack", "cmd": "tap", "t_ms": now,
                          "outcome": "hit", "target_id": outcome.target_id,
                          "clip_id": outcome.clip_id})

    def _handle_set_level(self, slot: str, command: dict, now: int) -> None:
        try:
            level = Level(command["level"])
        except ValueError:
            self._emit(slot, {"type": "error", "reason": "unknown_level"})
            return
        self._record(slot, now, {"kind": "set_level", "level": level.value})
        self.devices[slot] = audio.set_level(self.devices[slot], level)
        self._emit(slot, {"type": "ack", "cmd": "set_level", "t_ms": now,
                          "level": level.value})

    def _handle_switch_wall(self, slot: str, command: dict, now: int) -> None:
        wall = self.catalog.wall(str(command["wall_id"]))
        if wall is None:
            self._emit(slot, {"type": "error", "reason": "unknown_wall"})
            return
        self._record(slot, now, {"kind": "switch_wall", "wall_id": wall.wall_id})
        self.devices[slot] = replace(self.devices[slot], current_wall_id=wall.wall_id)
        self._emit(slot, {"type": "ack", "cmd": "switch_wall", "t_ms": now,
                          "wall_id": wall.wall_id})

    def _handle_stop(self, slot: str, now: int) -> None:
        try:
            state, msg = audio.stop_personal(self.devices[slot], self.catalog, now)
        except NotPlaying:
            self._emit(slot, {"type": "error", "reason": "not_playing"})
            return
        self._record(slot, now, {"kind": "stop"})
        self.devices[slot] = state
        self.net.send(msg, now, state.peer_id)
        self._emit(slot, {"type": "ack", "cmd": "stop", "t_ms": now})

    def recording(self) -> dict:
        return {
            "catalog_ref": self.catalog_ref,
            "network": asdict(self.network_config),
            "protocol": asdict(self.protocol),
            "mode": "eavesdrop",
            "end_ms": self.now_ms(),
            "events": list(self.recorded),
        }


class SessionManager:
    def __init__(self, catalog: Catalog, catalog_ref: str, network: NetworkConfig,
                 protocol: ProtocolConfig, tick_ms: int):
        self.catalog = catalog
        self.catalog_ref = catalog_ref
        self.network = network
        self.protocol = protocol
        self.tick_ms = tick_ms
        self.sessions: dict[str, Session] = {}

    def get_or_create(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            session = Session(session_id, self.catalog, self.catalog_ref,
                              self.network, self.protocol, self.tick_ms)
            session.start()
            self.sessions[session_id] = session
        return session

    def close_all(self) -> None:
        for session in self.sessions.values():
            session.close()


async def _pump(ws: WebSocket, outbound: asyncio.Queue) -> None:
    while True:
        frame = await outbound.get()
        await ws.send_text(json.dumps(frame))


def create_app(catalog_path, network: NetworkConfig = NetworkConfig(),
               protocol: ProtocolConfig = ProtocolConfig(),
               tick_ms: int = DEFAULT_TICK_MS,
               static_dir: str | None = None) -> FastAPI:
    catalog = load_catalog_file(catalog_path)
    manager = SessionManager(catalog, str(catalog_path), network, protocol, tick_ms)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        manager.close_all()

    app = FastAPI(lifespan=lifespan)
    app.state.manager = manager

    @app.get("/healthz")
    async def healthz():
        return {"ok": True}

    @app.get("/sessions/{session_id}/recording")
    async def recording(session_id: str):
        session = manager.sessions.get(session_id)
        if session is None:
            return JSONResponse({"error": "unknown_session"}, status_code=404)
        return JSONResponse(session.recording())

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session: Session | None = None
        slot = ""
        outbound: asyncio.Queue | None = None
        sender: asyncio.Task | None = None
        try:
            join = json.loads(await ws.receive_text())
            if not isinstance(join, dict) or join.get("cmd") != "join":
                await ws.send_text(json.dumps(
                    {"type": "error", "reason": "expected_join"}))
                await ws.close()
                return
            session = manager.get_or_create(str(join.get("session", "default")))
            slot = str(join.get("slot", ""))
            outbound = asyncio.Queue()
            ok, reason = session.bind(slot, outbound)
            if not ok:
                await ws.send_text(json.dumps({"type": "error", "reason": reason}))
                await ws.close()
                return
            sender = asyncio.create_task(_pump(ws, outbound))
            session.enqueue_welcome(slot)
            while True:
                raw = await ws.receive_text()
                try:
                    command = json.loads(raw)
                except json.JSONDecodeError:
                    outbound.put_nowait({"type": "error", "reason": "bad_json"})
                    continue
                await session.queue.put((slot, command))
        except WebSocketDisconnect:
            pass
        finally:
            if sender is not None:
                sender.cancel()
            if session is not None and outbound is not None:
                session.unbind(slot, outbound)

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
