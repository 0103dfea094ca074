"""Instrumented local embeddings endpoint for exercising the HTTP client.

Serves POST /embeddings with a deterministic vector derived from the
input text. Behaviors are scriptable per text (a queue of status codes to
serve before succeeding), and the server can enforce its own sliding
window rate limit, answering 429 when the client sends too fast. All
requests are recorded with timestamps from an injectable clock.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


def stub_vector(text: str, dimension: int) -> list[float]:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return [(digest[i % len(digest)] - 128) / 128.0 for i in range(dimension)]


class StubEmbedServer:
    def __init__(
        self,
        dimension: int = 8,
        script: dict[str, list[int]] | None = None,
        enforce_rate_limit: int | None = None,
        clock=time.monotonic,
    ):
        self.dimension = dimension
        self.script = {k: deque(v) for k, v in (script or {}).items()}
        self.enforce_rate_limit = enforce_rate_limit
        self.clock = clock
        self.lock = threading.Lock()
        self.request_times: list[float] = []
        self.request_texts: list[str] = []
        self.statuses_served: list[int] = []
        self._window: deque[float] = deque()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    # -- lifecycle -----------------------------------------------------

    def start(self) -> str:
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                if not self.path.endswith("/embeddings"):
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                text = payload.get("input", "")
                status, body = stub._respond(text)
                data = json.dumps(body).encode() if body is not None else b""
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                if data:
                    self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> str:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- behavior --------------------------------------------------------

    def _respond(self, text: str):
        with self.lock:
            now = self.clock()
            self.request_times.append(now)
            self.request_texts.append(text)
            if self.enforce_rate_limit is not None:
                while self._window and now - self._window[0] >= 60.0:
                    self._window.popleft()
                if len(self._window) >= self.enforce_rate_limit:
                    self.statuses_served.append(429)
                    return 429, {"error": "rate limit exceeded"}
                self._window.append(now)
            queue = self.script.get(text)
            if queue:
                status = queue.popleft()
                if status != 200:
                    self.statuses_served.append(status)
                    return status, {"error": f"scripted {status}"}
            self.statuses_served.append(200)
            return 200, {"data": [{"embedding": stub_vector(text, self.dimension)}]}

    # -- assertions -------------------------------------------------------

    @property
    def total_requests(self) -> int:
        with self.lock:
            return len(self.request_times)

    def count_429(self) -> int:
        with self.lock:
            return sum(1 for s in self.statuses_served if s == 429)

    def max_requests_in_window(self, window_seconds: float = 60.0) -> int:
        """Largest number of requests falling inside any sliding window."""
        with self.lock:
            times = sorted(self.request_times)
        best = 0
        lo = 0
        for hi in range(len(times)):
            while times[hi] - times[lo] >= window_seconds:
                lo += 1
            best = max(best, hi - lo + 1)
        return best
