"""RLE codec, request/response contracts, and all three segmenter backends."""

import base64
import io
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from PIL import Image

from partlift import (GatewayConnectionError, GatewayError, GatewayHTTPError,
                      GatewayProtocolError, MaskNotFoundError, OracleBackend,
                      PointCloud, RemoteBackend, RemoteConfig, ReplayBackend,
                      SegmentRequest, SegmentResponse, make_camera_rig,
                      oracle_segment, render_view, rle_decode, rle_encode)
from partlift.gateway import encode_png

from .conftest import random_cloud


def make_request(rng, width=8, height=8, **overrides):
    fields = dict(
        image=rng.integers(0, 256, (height, width, 3), np.int64).astype(np.uint8),
        instruction="segment the thing",
        query_id="obj-q000",
        view_index=0,
    )
    fields.update(overrides)
    return SegmentRequest(**fields)


class TestRle:
    def test_hand_vectors(self):
        assert rle_encode(np.zeros((2, 3), dtype=bool)) == [6]
        assert rle_encode(np.ones((2, 3), dtype=bool)) == [0, 6]
        mask = np.array([[True, True, False], [False, True, False]])
        assert rle_encode(mask) == [0, 2, 2, 1, 1]

    def test_row_major_order(self):
        mask = np.array([[False, True], [True, False]])
        # flattened row-major: F T T F
        assert rle_encode(mask) == [1, 2, 1]

    def test_round_trip_fuzz(self, rng):
        for _ in range(200):
            h = int(rng.integers(1, 20))
            w = int(rng.integers(1, 20))
            mask = rng.random((h, w)) < rng.random()
            runs = rle_encode(mask)
            assert sum(runs) == h * w
            assert all(isinstance(r, int) for r in runs)
            assert all(r > 0 for r in runs[1:])
            back = rle_decode(runs, width=w, height=h)
            assert back.dtype == bool
            assert np.array_equal(back, mask)

    def test_decode_errors(self):
        with pytest.raises(ValueError, match="length mismatch"):
            rle_decode([3], width=2, height=2)
        with pytest.raises(ValueError, match="negative"):
            rle_decode([-1, 5], width=2, height=2)
        with pytest.raises(ValueError, match="integer"):
            rle_decode([1.5, 2.5], width=2, height=2)
        with pytest.raises(ValueError, match="integer"):
            rle_decode([True, False, True, False], width=2, height=2)


class TestContracts:
    def test_request_validation(self, rng):
        with pytest.raises(ValueError, match="image"):
            make_request(rng, image=np.zeros((8, 8), dtype=np.uint8))
        with pytest.raises(ValueError, match="instruction"):
            make_request(rng, instruction="")
        with pytest.raises(ValueError, match="query_id"):
            make_request(rng, query_id="")
        with pytest.raises(ValueError, match="view_index"):
            make_request(rng, view_index=-1)

    def test_response_validation(self):
        mask = np.array([[True, False]])
        ok = SegmentResponse(mask=mask, explanation="x", has_segmentation=True)
        assert ok.mask.dtype == bool
        with pytest.raises(ValueError, match="has_segmentation"):
            SegmentResponse(mask=mask, explanation="x", has_segmentation=False)
        with pytest.raises(ValueError, match="mask"):
            SegmentResponse(mask=np.zeros(4, dtype=bool), explanation="x",
                            has_segmentation=False)

    def test_png_round_trip(self, rng):
        image = rng.integers(0, 256, (5, 7, 3), np.int64).astype(np.uint8)
        data = encode_png(image)
        back = np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))
        assert np.array_equal(back, image)


class TestOracle:
    def setup_scene(self):
        # a strip along z, viewed from the side so every point is visible
        pos = np.array([[0.0, 0.0, z] for z in np.linspace(-1, 1, 9)])
        colors = np.zeros((9, 3), dtype=np.uint8)
        labels = np.array([0] * 5 + [1] * 4, dtype=np.int32)
        cloud = PointCloud(pos, colors, labels=labels)
        pose = make_camera_rig(cloud, 1, image_size=(64, 64))[0]
        render = render_view(cloud, pose, splat_radius_px=1)
        return cloud, render

    def test_oracle_segment_matches_labels(self):
        cloud, render = self.setup_scene()
        resp = oracle_segment(cloud, render, category=0)
        owned = render.point_index >= 0
        expected = np.zeros_like(owned)
        expected[owned] = cloud.labels[render.point_index[owned]] == 0
        assert np.array_equal(resp.mask, expected)
        assert resp.has_segmentation
        assert "0" in resp.explanation

    def test_oracle_segment_absent_category(self):
        cloud, render = self.setup_scene()
        resp = oracle_segment(cloud, render, category=9)
        assert not resp.has_segmentation
        assert not resp.mask.any()

    def test_oracle_backend_routing(self, rng):
        cloud, render = self.setup_scene()
        backend = OracleBackend(cloud, [render], {"obj-q000": 1})
        req = make_request(rng, width=64, height=64, query_id="obj-q000")
        resp = backend.segment(req)
        assert resp.mask.shape == (64, 64)
        with pytest.raises(GatewayError, match="query"):
            backend.segment(make_request(rng, query_id="unknown-q"))
        with pytest.raises(GatewayError, match="view"):
            backend.segment(make_request(rng, query_id="obj-q000",
                                         view_index=5))

    def test_requires_labels(self, rng):
        cloud = random_cloud(rng, 5)
        pose = make_camera_rig(cloud, 1, image_size=(16, 16))[0]
        render = render_view(cloud, pose)
        with pytest.raises(ValueError, match="labels"):
            oracle_segment(cloud, render, category=0)


class TestReplay:
    def write_mask(self, directory, query_id, view, mask, text=None):
        img = Image.fromarray((mask.astype(np.uint8)) * 255)
        img.save(directory / f"{query_id}_view{view}.png")
        if text is not None:
            (directory / f"{query_id}_view{view}.txt").write_text(text)

    def test_reads_masks_and_explanations(self, rng, tmp_path):
        mask = rng.random((8, 8)) < 0.5
        self.write_mask(tmp_path, "obj-q000", 0, mask, text="because")
        backend = ReplayBackend(tmp_path)
        resp = backend.segment(make_request(rng))
        assert np.array_equal(resp.mask, mask)
        assert resp.explanation == "because"
        assert resp.has_segmentation == mask.any()

    def test_missing_file(self, rng, tmp_path):
        backend = ReplayBackend(tmp_path)
        with pytest.raises(MaskNotFoundError):
            backend.segment(make_request(rng))

    def test_shape_mismatch(self, rng, tmp_path):
        self.write_mask(tmp_path, "obj-q000", 0, np.ones((4, 4), dtype=bool))
        backend = ReplayBackend(tmp_path)
        with pytest.raises(GatewayProtocolError, match="shape"):
            backend.segment(make_request(rng))  # request image is 8x8


class _StubHandler(BaseHTTPRequestHandler):
    """Scriptable responder; the owning server records each request body."""

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length)
        self.server.seen.append((self.path, body))
        action = self.server.script[min(len(self.server.seen) - 1,
                                        len(self.server.script) - 1)]
        if action == "drop":
            self.connection.close()
            return
        if isinstance(action, int):
            self.send_response(action)
            payload = json.dumps({"error": "scripted failure"}).encode()
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)
            return
        if callable(action):
            payload = action(json.loads(body))
        else:
            payload = action
        if not isinstance(payload, bytes):
            payload = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):
        pass


@pytest.fixture
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.seen = []
    server.script = []
    thread = threading.Thread(
        target=lambda: server.serve_forever(poll_interval=0.02), daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()


def echo_mask(request_body):
    """Decode the request image and segment its pure-red pixels."""
    png = base64.b64decode(request_body["image_png"])
    image = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"))
    mask = np.all(image == (255, 0, 0), axis=-1)
    return {
        "rle": rle_encode(mask),
        "width": image.shape[1],
        "height": image.shape[0],
        "explanation": "red region",
        "has_segmentation": bool(mask.any()),
    }


class TestRemote:
    def client(self, server, **config):
        endpoint = f"http://127.0.0.1:{server.server_address[1]}"
        return RemoteBackend(endpoint, RemoteConfig(**config))

    def red_request(self, width=6, height=4):
        image = np.zeros((height, width, 3), dtype=np.uint8)
        image[:, : width // 2] = (255, 0, 0)
        return SegmentRequest(image=image, instruction="find the red part",
                              query_id="q", view_index=0), image

    def test_round_trip(self, stub_server):
        stub_server.script = [echo_mask]
        backend = self.client(stub_server)
        request, image = self.red_request()
        resp = backend.segment(request)
        expected = np.all(image == (255, 0, 0), axis=-1)
        assert np.array_equal(resp.mask, expected)
        assert resp.explanation == "red region"
        # the endpoint had no path: /segment is appended
        assert stub_server.seen[0][0] == "/segment"

    def test_request_body_fields(self, stub_server, rng):
        stub_server.script = [echo_mask]
        backend = self.client(stub_server)
        backend.segment(make_request(rng, query_id="obj-q003", view_index=2,
                                     instruction="the lid"))
        body = json.loads(stub_server.seen[0][1])
        assert set(body) == {"image_png", "instruction", "query_id",
                             "view_index"}
        assert body["query_id"] == "obj-q003"
        assert body["view_index"] == 2
        assert body["instruction"] == "the lid"
        base64.b64decode(body["image_png"], validate=True)

    def test_http_error_is_not_retried(self, stub_server, rng):
        stub_server.script = [500]
        backend = self.client(stub_server, retries=3)
        with pytest.raises(GatewayHTTPError) as info:
            backend.segment(make_request(rng))
        assert info.value.status_code == 500
        assert len(stub_server.seen) == 1

    def test_http_400(self, stub_server, rng):
        stub_server.script = [400]
        backend = self.client(stub_server)
        with pytest.raises(GatewayHTTPError) as info:
            backend.segment(make_request(rng))
        assert info.value.status_code == 400

    def test_retry_then_success(self, stub_server, rng, monkeypatch):
        sleeps = []
        monkeypatch.setattr("partlift.gateway.time.sleep", sleeps.append)
        stub_server.script = ["drop", "drop", echo_mask]
        backend = self.client(stub_server, retries=2, backoff=0.5)
        resp = backend.segment(make_request(rng))
        assert resp.mask.shape == (8, 8)
        assert len(stub_server.seen) == 3
        assert sleeps == [0.5, 1.0]  # doubling backoff

    def test_retries_exhausted(self, rng, monkeypatch):
        monkeypatch.setattr("partlift.gateway.time.sleep", lambda s: None)
        backend = RemoteBackend("http://127.0.0.1:9",  # discard port, refused
                                RemoteConfig(retries=1, timeout=2.0))
        with pytest.raises(GatewayConnectionError) as info:
            backend.segment(make_request(rng, query_id="obj-q007",
                                         view_index=3))
        assert info.value.query_id == "obj-q007"
        assert info.value.view_index == 3

    @pytest.mark.parametrize("mutate,match", [
        (lambda p: {**p, "rle": [999, 1]}, "mismatch|decode"),
        (lambda p: {k: v for k, v in p.items() if k != "rle"}, "missing"),
        (lambda p: {**p, "width": 999}, "request was"),
        (lambda p: {**p, "has_segmentation": False}, "has_segmentation"),
        (lambda p: b"not json at all", "JSON"),
        (lambda p: b'["array"]', "object"),
        (lambda p: {**p, "rle": "12,3"}, "array"),
    ])
    def test_protocol_violations(self, stub_server, mutate, match):
        def respond(body):
            png = base64.b64decode(body["image_png"])
            image = np.asarray(Image.open(io.BytesIO(png)).convert("RGB"))
            mask = np.all(image == (255, 0, 0), axis=-1)
            good = {
                "rle": rle_encode(mask),
                "width": image.shape[1],
                "height": image.shape[0],
                "explanation": "ok",
                "has_segmentation": bool(mask.any()),
            }
            return mutate(good)

        stub_server.script = [respond]
        backend = self.client(stub_server)
        request, _ = self.red_request()
        with pytest.raises(GatewayProtocolError, match=match):
            backend.segment(request)

    def test_error_carries_query_context(self, stub_server):
        stub_server.script = [500]
        backend = self.client(stub_server)
        request, _ = self.red_request()
        with pytest.raises(GatewayHTTPError) as info:
            backend.segment(request)
        assert info.value.query_id == "q"
        assert info.value.view_index == 0
