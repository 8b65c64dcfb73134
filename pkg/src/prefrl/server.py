"""Embedded HTTP service for human labeling.

Three JSON endpoints under /api/ (documented in docs/api.md): the oldest
pending query, label submission, and a read-only run-status snapshot.
Runs on a daemon thread with the stdlib threading server, so it never
blocks the training loop; all shared state lives in the HumanLabelInbox
and the RunStatus snapshot.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import ConflictError, ContractError, UnknownQueryError

API_VERSION = 1


class _Handler(BaseHTTPRequestHandler):
    # set by the server factory
    inbox = None
    status_fn = None

    def log_message(self, fmt, *args):  # keep the training console quiet
        pass

    def _send(self, code, payload=None):
        body = b"" if payload is None else json.dumps(payload).encode()
        self.send_response(code)
        if body:
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        if body:
            self.wfile.write(body)

    def do_GET(self):
        if self.path == "/api/queries/next":
            item = self.inbox.next_pending()
            if item is None:
                self._send(204)
                return
            qid, payload = item
            self._send(200, payload)
        elif self.path == "/api/status":
            snapshot = self.status_fn()
            snapshot["pending_queries"] = self.inbox.pending_count()
            self._send(200, snapshot)
        else:
            self._send(404, {"error": "unknown endpoint"})

    def do_POST(self):
        if self.path != "/api/labels":
            self._send(404, {"error": "unknown endpoint"})
            return
        try:
            length = int(self.headers.get("Content-Length", 0))
            submission = json.loads(self.rfile.read(length) or b"{}")
            qid = submission["id"]
            choice = submission["choice"]
        except (ValueError, KeyError):
            self._send(400, {"error": "body must be JSON with 'id' and 'choice'"})
            return
        try:
            self.inbox.answer(qid, choice)
        except UnknownQueryError:
            self._send(404, {"error": f"unknown query id {qid!r}"})
        except ConflictError:
            self._send(409, {"error": f"query {qid!r} already answered"})
        except ContractError as exc:
            self._send(400, {"error": str(exc)})
        else:
            self._send(200, {"status": "accepted", "id": qid})


class FeedbackApiServer:
    """Owns the listening socket and its serving thread."""

    def __init__(self, inbox, status, host="127.0.0.1", port=0):
        handler = type(
            "BoundHandler",
            (_Handler,),
            {"inbox": inbox, "status_fn": status.snapshot},
        )
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._httpd.daemon_threads = True
        self._thread = None

    @property
    def address(self):
        host, port = self._httpd.server_address[:2]
        return f"{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self.address

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


def parse_bind_address(text):
    """'host:port' or ':port' or 'port' -> (host, port)."""
    host, _, port = text.rpartition(":")
    if not host:
        host = "127.0.0.1"
    try:
        return host, int(port)
    except ValueError:
        raise ContractError(f"invalid bind address {text!r}; use host:port") from None
