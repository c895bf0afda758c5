"""Telemetry gateway: WebSocket broadcast out, operator commands in.

Stands in for the cloud leg of the architecture: every telemetry line
fans out to all connected clients (browser console included), and
inbound command lines are validated into a bounded queue that the
simulation drains at autonomy tick boundaries.  A slow client's send
queue fills up and the client is disconnected; the loop never blocks on
the network.
"""

import json
import math
import queue
import threading
import time
from dataclasses import dataclass

from websockets.sync.server import serve

TELEMETRY_VERSION = 1
COMMAND_KINDS = ("ESTOP", "RESUME", "GOAL", "LOCK", "UNLOCK")

# Per-client send buffer; overflow disconnects the client.
CLIENT_QUEUE_SIZE = 256
COMMAND_QUEUE_SIZE = 64


class CommandRejected(ValueError):
    pass


@dataclass(frozen=True)
class OperatorCommand:
    kind: str
    x: float = None
    y: float = None
    client_id: int = -1
    issued_at: float = 0.0

    def to_json(self) -> dict:
        d = {"cmd": self.kind}
        if self.kind == "GOAL":
            d["x"] = self.x
            d["y"] = self.y
        return d


def parse_command(line: str, client_id: int = -1, issued_at: float = 0.0) -> OperatorCommand:
    """Strict command schema; anything else raises CommandRejected."""
    try:
        data = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CommandRejected(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise CommandRejected("command must be a JSON object")
    kind = data.get("cmd")
    if kind not in COMMAND_KINDS:
        raise CommandRejected(f"unknown command kind: {kind!r}")
    extra = set(data) - {"cmd", "x", "y"}
    if extra:
        raise CommandRejected(f"unknown field(s): {sorted(extra)}")
    x = y = None
    if kind == "GOAL":
        try:
            x = float(data["x"])
            y = float(data["y"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CommandRejected("GOAL requires numeric x and y") from exc
        if not (math.isfinite(x) and math.isfinite(y)):
            raise CommandRejected("GOAL coordinates must be finite")
    elif "x" in data or "y" in data:
        raise CommandRejected(f"{kind} takes no coordinates")
    return OperatorCommand(kind=kind, x=x, y=y, client_id=client_id, issued_at=issued_at)


def encode_telemetry(record: dict) -> str:
    """One newline-terminated JSON line, keys in schema order."""
    return json.dumps(record, separators=(",", ":")) + "\n"


class TelemetryPublisher:
    """Wraps encode_telemetry with the stream-order self-check."""

    def __init__(self):
        self._last_t = None
        self.order_violations = 0

    def encode(self, record: dict) -> str:
        t = record.get("t")
        if self._last_t is not None and t < self._last_t:
            self.order_violations += 1
        self._last_t = t
        return encode_telemetry(record)


class Gateway:
    """WebSocket fan-out plus the single-consumer command queue."""

    def __init__(self, host: str = "127.0.0.1", port: int = 8080):
        self.host = host
        self.port = port
        self.commands = queue.Queue(maxsize=COMMAND_QUEUE_SIZE)
        self._clients = {}  # id -> (connection, queue)
        self._lock = threading.Lock()
        self._next_id = 0
        self._server = None
        self._thread = None
        self.rejected = 0

    # -- lifecycle ----------------------------------------------------

    def start(self):
        self._server = serve(self._handle, self.host, self.port)
        self.port = self._server.socket.getsockname()[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="gateway-accept", daemon=True)
        self._thread.start()
        return self

    def stop(self):
        if self._server is not None:
            self._server.shutdown()
            self._server = None
        with self._lock:
            clients = list(self._clients.values())
            self._clients.clear()
        for conn, _ in clients:
            try:
                conn.close()
            except OSError:
                pass

    @property
    def client_count(self) -> int:
        with self._lock:
            return len(self._clients)

    # -- simulation-facing surface -------------------------------------

    def publish(self, line: str):
        """Enqueue one telemetry line to every client without blocking;
        clients that cannot keep up are dropped."""
        with self._lock:
            clients = list(self._clients.items())
        for cid, (conn, q) in clients:
            try:
                q.put_nowait(line)
            except queue.Full:
                self._drop(cid)

    def pop_commands(self) -> list:
        out = []
        while True:
            try:
                out.append(self.commands.get_nowait())
            except queue.Empty:
                return out

    # -- connection handling -------------------------------------------

    def _drop(self, cid: int):
        with self._lock:
            entry = self._clients.pop(cid, None)
        if entry is not None:
            try:
                entry[0].close()
            except OSError:
                pass

    def _handle(self, conn):
        with self._lock:
            cid = self._next_id
            self._next_id += 1
            q = queue.Queue(maxsize=CLIENT_QUEUE_SIZE)
            self._clients[cid] = (conn, q)
        sender = threading.Thread(target=self._send_loop, args=(conn, q),
                                  name=f"gateway-send-{cid}", daemon=True)
        sender.start()
        try:
            for message in conn:
                try:
                    cmd = parse_command(message, client_id=cid, issued_at=time.time())
                except CommandRejected as exc:
                    self.rejected += 1
                    try:
                        conn.send(json.dumps({"type": "reject", "reason": str(exc)}) + "\n")
                    except OSError:
                        break
                    continue
                try:
                    self.commands.put_nowait(cmd)
                except queue.Full:
                    try:
                        conn.send(json.dumps({"type": "reject",
                                              "reason": "command queue full"}) + "\n")
                    except OSError:
                        break
        except Exception:
            pass
        finally:
            self._drop(cid)
            q.put(None)  # stop the sender

    def _send_loop(self, conn, q):
        while True:
            line = q.get()
            if line is None:
                return
            try:
                conn.send(line)
            except Exception:
                return
