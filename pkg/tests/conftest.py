import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from diffusionx.core import Tier
from diffusionx.backends import MockAlignmentScorer, MockBackend
from diffusionx.embedding import hash_provider


@pytest.fixture
def edge_embedder():
    return hash_provider(384, seed=7)


@pytest.fixture
def mock_backend(edge_embedder):
    return MockBackend(edge_embedder, Tier.EDGE)


@pytest.fixture
def mock_scorer(edge_embedder):
    return MockAlignmentScorer(edge_embedder, beta=0.5)


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):
        behavior = self.server.behavior
        length = int(self.headers.get("Content-Length", 0))
        request = json.loads(self.rfile.read(length)) if length else {}
        if behavior == "hang":
            import time

            time.sleep(self.server.hang_s)
        if behavior == "malformed":
            body = b"this is not json {"
            self.send_response(200)
        elif behavior == "error":
            body = b"{}"
            self.send_response(500)
        else:
            body = json.dumps(self.server.respond(request)).encode()
            self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    """Factory for a local generation-server stub; yields (url, server)."""
    servers = []

    def start(respond, behavior="ok", hang_s=0.0):
        server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        server.respond = respond
        server.behavior = behavior
        server.hang_s = hang_s
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        servers.append(server)
        return f"http://127.0.0.1:{server.server_address[1]}"

    yield start
    for server in servers:
        server.shutdown()
        server.server_close()
