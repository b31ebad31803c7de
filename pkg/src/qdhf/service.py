"""HTTP bridge between a running optimizer and an external annotator.

Exposes the judgment queue under /api/v1 and serves the static labeling UI.
The optimizer thread blocks inside the judge; browser or script POSTs
resolve its requests one by one.
"""
from __future__ import annotations

import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, Optional

from .feedback import AlreadyResolved, JudgmentQueue, UnknownRequest


class StatusBoard:
    """Read-only run snapshot shared with the service, one write per iteration."""

    def __init__(self, **initial):
        self._lock = threading.Lock()
        self._data: Dict[str, object] = dict(initial)

    def update(self, **kw) -> None:
        with self._lock:
            self._data.update(kw)

    def snapshot(self) -> Dict[str, object]:
        with self._lock:
            return dict(self._data)


def _triplet_payload(request) -> dict:
    return {
        "request_id": request.request_id,
        "triplet": {
            "ref": request.triplet.ref,
            "a": request.triplet.a,
            "b": request.triplet.b,
        },
        "payloads": request.payloads,
    }


def make_handler(queue: JudgmentQueue, board: StatusBoard, ui_dir: Optional[Path]):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            pass

        def _send_json(self, code: int, payload: dict) -> None:
            body = json.dumps(payload).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_empty(self, code: int) -> None:
            self.send_response(code)
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            path = self.path.split("?", 1)[0]
            if path == "/api/v1/status":
                status = board.snapshot()
                status["pending"] = queue.pending_count
                self._send_json(200, status)
            elif path == "/api/v1/triplets/next":
                request = queue.next_pending()
                if request is None:
                    self._send_empty(204)
                else:
                    payload = _triplet_payload(request)
                    payload["budget"] = board.snapshot().get("budget")
                    self._send_json(200, payload)
            elif path.startswith("/api/"):
                self._send_json(404, {"error": "not found"})
            else:
                self._serve_static(path)

        def do_POST(self):
            path = self.path.split("?", 1)[0]
            parts = path.strip("/").split("/")
            if len(parts) == 4 and parts[:3] == ["api", "v1", "triplets"]:
                try:
                    request_id = int(parts[3])
                except ValueError:
                    self._send_json(404, {"error": "not found"})
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                    choice = body["choice"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    self._send_json(400, {"error": "body must be JSON with a 'choice' field"})
                    return
                try:
                    queue.resolve(request_id, choice)
                except ValueError as exc:
                    self._send_json(400, {"error": str(exc)})
                except UnknownRequest:
                    self._send_json(404, {"error": f"no request {request_id}"})
                except AlreadyResolved:
                    self._send_json(409, {"error": f"request {request_id} already resolved"})
                else:
                    self._send_json(200, {"status": "ok", "request_id": request_id})
            else:
                self._send_json(404, {"error": "not found"})

        def _serve_static(self, path: str) -> None:
            if ui_dir is None:
                self._send_json(404, {"error": "no UI bundled; use the /api/v1 endpoints"})
                return
            rel = path.lstrip("/") or "index.html"
            target = (ui_dir / rel).resolve()
            if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
                self._send_json(404, {"error": "not found"})
                return
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            data = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler


class FeedbackService:
    """Threaded HTTP server wrapping a judgment queue and status board."""

    def __init__(
        self,
        queue: JudgmentQueue,
        board: StatusBoard,
        ui_dir=None,
        host: str = "127.0.0.1",
        port: int = 8765,
    ):
        self.queue = queue
        self.board = board
        handler = make_handler(queue, board, Path(ui_dir) if ui_dir else None)
        self._server = ThreadingHTTPServer((host, port), handler)
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    def shutdown(self) -> None:
        # BaseServer.shutdown blocks until serve_forever acknowledges, so it
        # must only run when the serving thread was actually started
        if self._thread is not None:
            self._server.shutdown()
            self._thread.join(timeout=5)
            self._thread = None
        self._server.server_close()
