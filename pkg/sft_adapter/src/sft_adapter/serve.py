"""HTTP predictor: POST /predict with {task, system, user, case_id},
reply {"label": ..., "raw": ...}.

The reply label is the extracted answer token when the greedy completion
contains one after the anchor; otherwise the raw completion is returned in
the label field as-is, which the caller's label parser will reject on its
side without retrying.

Weights are read-only at serving time; the threaded server only ever reads
them, so concurrent requests are safe.
"""

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from sft_adapter.train import Adapter

AUTH_ENV = "SFT_ADAPTER_TOKEN"


def make_server(adapter: Adapter, port: int, host: str = "127.0.0.1",
                auth_token: str | None = None) -> ThreadingHTTPServer:
    adapter.model.eval()

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def _reply(self, status: int, payload: dict):
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            if self.path != "/predict":
                self._reply(404, {"error": "unknown path"})
                return
            if auth_token is not None:
                supplied = self.headers.get("Authorization", "")
                if supplied != f"Bearer {auth_token}":
                    self._reply(401, {"error": "bad or missing bearer token"})
                    return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length))
            except (ValueError, json.JSONDecodeError):
                self._reply(400, {"error": "body must be a JSON object"})
                return
            if not isinstance(payload, dict):
                self._reply(400, {"error": "body must be a JSON object"})
                return
            user_text = payload.get("user")
            if not isinstance(user_text, str) or not user_text.strip():
                self._reply(400, {"error": "user must be a non-empty string"})
                return
            task = payload.get("task")
            if task is not None and task != adapter.config.task:
                self._reply(400, {
                    "error": f"this adapter serves {adapter.config.task!r}, "
                             f"not {task!r}"})
                return
            system_text = payload.get("system")
            if not isinstance(system_text, str):
                system_text = ""
            token, raw = adapter.predict_token(system_text, user_text)
            self._reply(200, {"label": token if token is not None else raw,
                              "raw": raw})

    return ThreadingHTTPServer((host, port), Handler)
