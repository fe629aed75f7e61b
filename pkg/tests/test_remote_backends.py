"""The remote HTTP protocols, exercised against an in-process stub server."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from trailbot.embeddings import RemoteEmbedder
from trailbot.errors import BackendError, GatewayError
from trailbot.gateway import PromptBundle, RemoteLlm


class StubHandler(BaseHTTPRequestHandler):
    # class-level knobs the tests flip
    fail_first = False
    wrong_dim = False
    empty_content = False
    seen: list[dict] = []
    failures_left = 0

    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers["content-length"])
        payload = json.loads(self.rfile.read(length))
        type(self).seen.append({"path": self.path, "payload": payload})
        if type(self).failures_left > 0:
            type(self).failures_left -= 1
            self.send_response(500)
            self.end_headers()
            return
        if self.path == "/embed":
            texts = payload["texts"]
            dim = 3 if type(self).wrong_dim else 4
            # unnormalized on purpose: the client must normalize
            vectors = [[float(len(t)), 1.0, 0.0, 0.0][:dim] for t in texts]
            body = {"dim": dim, "vectors": vectors}
        elif self.path == "/chat":
            content = "" if type(self).empty_content else f"echo:{payload['messages'][-1]['content']}"
            body = {"content": content}
        else:
            self.send_response(404)
            self.end_headers()
            return
        raw = json.dumps(body).encode()
        self.send_response(200)
        self.send_header("content-type", "application/json")
        self.send_header("content-length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    StubHandler.seen = []
    StubHandler.wrong_dim = False
    StubHandler.empty_content = False
    StubHandler.failures_left = 0
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


def test_remote_embedder_normalizes_and_counts(stub_server):
    embedder = RemoteEmbedder(stub_server, model_name="stub", dim=4)
    vec = embedder.embed("hello")
    assert vec.shape == (4,)
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-6)
    assert embedder.call_counter == 1
    assert StubHandler.seen[-1]["payload"] == {"model": "stub", "texts": ["hello"]}


def test_remote_embedder_batch_single_post(stub_server):
    embedder = RemoteEmbedder(stub_server, model_name="stub", dim=4)
    vectors = embedder.embed_batch(["a", "bb", "ccc"])
    assert len(vectors) == 3
    assert embedder.call_counter == 3
    assert len(StubHandler.seen) == 1
    assert StubHandler.seen[0]["payload"]["texts"] == ["a", "bb", "ccc"]


def test_remote_embedder_retries_once(stub_server):
    StubHandler.failures_left = 1
    embedder = RemoteEmbedder(stub_server, model_name="stub", dim=4)
    vec = embedder.embed("hello")
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-6)
    assert len(StubHandler.seen) == 2  # failed once, succeeded on retry


def test_remote_embedder_gives_up_after_retry(stub_server):
    StubHandler.failures_left = 2
    embedder = RemoteEmbedder(stub_server, model_name="stub", dim=4)
    with pytest.raises(BackendError) as excinfo:
        embedder.embed("hello")
    assert excinfo.value.backend == "embedder"


def test_remote_embedder_rejects_dim_mismatch(stub_server):
    StubHandler.wrong_dim = True
    embedder = RemoteEmbedder(stub_server, model_name="stub", dim=4)
    with pytest.raises(BackendError, match="dim 3"):
        embedder.embed("hello")


def test_remote_llm_round_trip(stub_server):
    llm = RemoteLlm(stub_server, model="m")
    bundle = PromptBundle("be brief", "ctx here", "what gives?", history=(("user", "hi"),))
    reply = llm.complete(bundle)
    assert reply == "echo:ctx here\n\nQuestion: what gives?"
    messages = StubHandler.seen[-1]["payload"]["messages"]
    assert messages[0] == {"role": "system", "content": "be brief"}
    assert messages[1] == {"role": "user", "content": "hi"}


def test_remote_llm_empty_output_is_gateway_error(stub_server):
    StubHandler.empty_content = True
    llm = RemoteLlm(stub_server, model="m")
    with pytest.raises(GatewayError):
        llm.complete(PromptBundle("s", "", "q"))
