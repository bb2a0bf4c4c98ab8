"""In-process HTTP stub implementing the model wire protocol for tests.

Wraps any in-process predictor; quirks simulate misbehaving servers
(transient 503s, lying about normalization, truncated confidence rows).
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from revex.errors import ProtocolError
from revex.predictors import decode_predict_request


class WireStub:

    def __init__(self, predictor, max_batch=8, fail_503_times=0,
                 declare_normalized=None, truncate_rows=False):
        self.predictor = predictor
        self.max_batch = max_batch
        self.fail_503_times = fail_503_times
        self.declare_normalized = (predictor.normalized
                                   if declare_normalized is None
                                   else declare_normalized)
        self.truncate_rows = truncate_rows
        self.request_count = 0
        stub = self

        class Handler(BaseHTTPRequestHandler):

            def log_message(self, *args):
                pass

            def _send(self, code, payload):
                body = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path != "/info":
                    self._send(400, {"error": f"unknown path {self.path}"})
                    return
                self._send(200, {"class_count": stub.predictor.class_count,
                                 "max_batch": stub.max_batch,
                                 "normalized": stub.declare_normalized})

            def do_POST(self):
                stub.request_count += 1
                if self.path != "/predict":
                    self._send(400, {"error": f"unknown path {self.path}"})
                    return
                if stub.fail_503_times > 0:
                    stub.fail_503_times -= 1
                    self._send(503, {"error": "overloaded"})
                    return
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    body = json.loads(self.rfile.read(length).decode("utf-8"))
                    batch = decode_predict_request(body)
                except (ProtocolError, json.JSONDecodeError, ValueError) as exc:
                    self._send(400, {"error": str(exc)})
                    return
                if batch.shape[0] > stub.max_batch:
                    self._send(400, {"error": "batch exceeds max_batch"})
                    return
                conf = stub.predictor.predict(batch)
                rows = [[float(v) for v in row] for row in np.asarray(conf)]
                if stub.truncate_rows:
                    rows = [row[:-1] for row in rows]
                self._send(200, {"confidences": rows,
                                 "normalized": stub.declare_normalized})

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever,
                                       daemon=True)

    @property
    def url(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        return False
