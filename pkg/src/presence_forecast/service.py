"""HTTP query service over an atomically swappable snapshot."""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

from .api import encode, error_payload, handle
from .engine import Snapshot
from .errors import EngineError, MalformedQuery

log = logging.getLogger(__name__)

MAX_BODY = 1 << 20


class SnapshotHolder:
    """Readers take the current snapshot; reload replaces it in one assignment."""

    def __init__(self, snapshot: Snapshot, loader: Callable[[], Snapshot] | None = None):
        self._snapshot = snapshot
        self._loader = loader
        self._reload_lock = threading.Lock()
        self.generation = 0

    @property
    def snapshot(self) -> Snapshot:
        return self._snapshot

    def reload(self) -> int:
        if self._loader is None:
            raise EngineError("this service has no snapshot loader")
        with self._reload_lock:
            fresh = self._loader()
            self._snapshot = fresh
            self.generation += 1
            return self.generation


def make_handler(holder: SnapshotHolder):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route access logs through logging
            log.debug("%s " + fmt, self.address_string(), *args)

        def _send(self, status: int, body: dict) -> None:
            data = encode(body)
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self):
            path = self.path.rstrip("/")
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_BODY:
                self._send(413, error_payload(MalformedQuery("request body too large")))
                return
            raw = self.rfile.read(length) if length else b""
            if path == "/v1/reload":
                try:
                    gen = holder.reload()
                except EngineError as e:
                    self._send(500, error_payload(e))
                    return
                self._send(200, {"reloaded": True, "generation": gen})
                return
            if not path.startswith("/v1/"):
                self._send(404, {"error": {"code": "NotFound", "message": f"no endpoint {path}"}})
                return
            try:
                payload = json.loads(raw or b"{}")
            except (json.JSONDecodeError, UnicodeDecodeError) as e:
                self._send(400, error_payload(MalformedQuery(f"body is not JSON: {e}")))
                return
            status, body = handle(holder.snapshot, path[len("/v1/"):], payload)
            self._send(status, body)

        def do_GET(self):
            if self.path.rstrip("/") == "/v1/health":
                self._send(200, {"ok": True, "generation": holder.generation})
            else:
                self._send(405, {"error": {"code": "MethodNotAllowed", "message": "use POST"}})

    return Handler


def make_server(holder: SnapshotHolder, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_handler(holder))
    server.daemon_threads = True
    return server


def serve(holder: SnapshotHolder, host: str = "127.0.0.1", port: int = 8080) -> None:
    server = make_server(holder, host, port)
    log.info("serving on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    finally:
        server.server_close()
