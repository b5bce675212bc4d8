"""Segmenter gateway: request/response types, RLE codec, and backends.

The engine never talks to a segmentation model directly. Each view is shipped
through a backend that returns a binary mask plus a free-text explanation:

  * OracleBackend answers from ground-truth labels (testing and calibration).
  * ReplayBackend answers from recorded mask files on disk.
  * RemoteBackend POSTs to an HTTP service implementing the wire protocol.
"""

from __future__ import annotations

import base64
import io
import logging
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests
from PIL import Image

from .geometry import PointCloud
from .render import ViewRender

logger = logging.getLogger(__name__)


class GatewayError(Exception):
    """Base class for backend failures; carries the query context."""

    def __init__(self, message: str, query_id: str = "", view_index: int = -1):
        super().__init__(message)
        self.query_id = query_id
        self.view_index = view_index


class GatewayConnectionError(GatewayError):
    """Transport failure (refused, reset, timeout) after exhausting retries."""


class GatewayProtocolError(GatewayError):
    """The remote answered, but the payload violates the wire protocol."""


class GatewayHTTPError(GatewayError):
    """Non-success HTTP status from the remote service."""

    def __init__(self, message, query_id="", view_index=-1, status_code=0):
        super().__init__(message, query_id, view_index)
        self.status_code = status_code


class MaskNotFoundError(GatewayError):
    """Replay directory has no recorded mask for this query/view."""


@dataclass(frozen=True)
class SegmentRequest:
    """One view sent for segmentation: (H, W, 3) uint8 image plus the query."""

    image: np.ndarray
    instruction: str
    query_id: str
    view_index: int

    def __post_init__(self):
        img = np.asarray(self.image)
        if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
            raise ValueError("image must be (H, W, 3) uint8")
        if not self.instruction:
            raise ValueError("instruction must be nonempty")
        if not self.query_id:
            raise ValueError("query_id must be nonempty")
        if self.view_index < 0:
            raise ValueError("view_index must be nonnegative")
        object.__setattr__(self, "image", img)


@dataclass(frozen=True)
class SegmentResponse:
    """Binary mask matching the request image, plus the model's explanation."""

    mask: np.ndarray
    explanation: str
    has_segmentation: bool

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 2 or mask.dtype != np.bool_:
            raise ValueError("mask must be a 2D bool array")
        if not self.has_segmentation and mask.any():
            raise ValueError("has_segmentation=False requires an all-false mask")
        object.__setattr__(self, "mask", mask)


def rle_encode(mask: np.ndarray) -> list[int]:
    """Row-major run lengths, alternating false/true and starting with false.

    The first run counts leading false pixels and may be zero; all runs after
    it are positive and the total always equals the pixel count.
    """
    mask = np.asarray(mask, dtype=bool)
    flat = mask.ravel()
    if flat.size == 0:
        return []
    breaks = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], breaks, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_decode(runs: list[int], width: int, height: int) -> np.ndarray:
    """Inverse of rle_encode; validates run values and total length."""
    total = 0
    for r in runs:
        if not isinstance(r, (int, np.integer)) or isinstance(r, bool) or r < 0:
            raise ValueError("RLE runs must be nonnegative integers")
        total += int(r)
    if total != width * height:
        raise ValueError(
            f"RLE length mismatch: runs sum to {total}, expected {width * height}")
    values = np.arange(len(runs)) % 2 == 1
    flat = np.repeat(values, np.asarray(runs, dtype=np.int64))
    return flat.reshape(height, width)


def encode_png(image: np.ndarray) -> bytes:
    """Lossless PNG bytes for an (H, W, 3) uint8 image."""
    buf = io.BytesIO()
    Image.fromarray(image, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


class SegmenterBackend:
    """Interface: turn a SegmentRequest into a SegmentResponse."""

    def segment(self, request: SegmentRequest) -> SegmentResponse:
        raise NotImplementedError


def oracle_segment(cloud: PointCloud, render: ViewRender,
                   category: int) -> SegmentResponse:
    """Perfect mask for one category, read off the render's pixel-to-point map."""
    if cloud.labels is None:
        raise ValueError("oracle segmentation requires ground-truth labels")
    if category < 0:
        raise ValueError("category must be nonnegative")
    owned = render.point_index >= 0
    mask = np.zeros(render.point_index.shape, dtype=bool)
    mask[owned] = cloud.labels[render.point_index[owned]] == category
    text = f"The highlighted pixels show the points labeled as part {category}."
    return SegmentResponse(mask=mask, explanation=text,
                           has_segmentation=bool(mask.any()))


class OracleBackend(SegmenterBackend):
    """Answers from ground-truth labels; maps query ids to category ids."""

    def __init__(self, cloud: PointCloud, renders: list[ViewRender],
                 category_by_query: dict[str, int]):
        if cloud.labels is None:
            raise ValueError("OracleBackend requires a labeled cloud")
        self._cloud = cloud
        self._renders = {r.view_index: r for r in renders}
        self._category_by_query = dict(category_by_query)

    def segment(self, request: SegmentRequest) -> SegmentResponse:
        render = self._renders.get(request.view_index)
        if render is None:
            raise GatewayError(f"no render for view {request.view_index}",
                               request.query_id, request.view_index)
        category = self._category_by_query.get(request.query_id)
        if category is None:
            raise GatewayError(f"unknown query id {request.query_id!r}",
                               request.query_id, request.view_index)
        return oracle_segment(self._cloud, render, category)


class ReplayBackend(SegmenterBackend):
    """Serves masks recorded as <query_id>_view<k>.png grayscale images.

    Pixels above 127 are true. A sibling .txt file, when present, supplies the
    explanation text; otherwise the explanation is empty.
    """

    def __init__(self, directory):
        from pathlib import Path
        self._dir = Path(directory)

    def segment(self, request: SegmentRequest) -> SegmentResponse:
        stem = f"{request.query_id}_view{request.view_index}"
        png = self._dir / f"{stem}.png"
        if not png.is_file():
            raise MaskNotFoundError(f"no recorded mask at {png}",
                                    request.query_id, request.view_index)
        arr = np.asarray(Image.open(png).convert("L"))
        if arr.shape != request.image.shape[:2]:
            raise GatewayProtocolError(
                f"recorded mask {png} is {arr.shape[1]}x{arr.shape[0]}, "
                f"request is {request.image.shape[1]}x{request.image.shape[0]}",
                request.query_id, request.view_index)
        mask = arr > 127
        txt = self._dir / f"{stem}.txt"
        explanation = txt.read_text(encoding="utf-8") if txt.is_file() else ""
        return SegmentResponse(mask=mask, explanation=explanation,
                               has_segmentation=bool(mask.any()))


@dataclass
class RemoteConfig:
    """Transport knobs for RemoteBackend; backoff doubles per retry."""

    timeout: float = 120.0
    retries: int = 2
    backoff: float = 1.0
    max_inflight: int = 4

    def __post_init__(self):
        if self.timeout <= 0 or self.retries < 0 or self.backoff < 0:
            raise ValueError("invalid remote transport configuration")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be positive")


class RemoteBackend(SegmenterBackend):
    """HTTP client for the segmentation wire protocol.

    POSTs JSON {image_png, instruction, query_id, view_index} to
    <endpoint>/segment and expects {rle, width, height, explanation,
    has_segmentation}. Transport failures retry with exponential backoff; a
    semaphore caps concurrent in-flight requests across threads.
    """

    def __init__(self, endpoint: str, config: RemoteConfig | None = None,
                 session: requests.Session | None = None):
        self.config = config or RemoteConfig()
        endpoint = endpoint.rstrip("/")
        if not endpoint.endswith("/segment"):
            endpoint = endpoint + "/segment"
        self._url = endpoint
        self._session = session or requests.Session()
        self._gate = threading.Semaphore(self.config.max_inflight)

    def segment(self, request: SegmentRequest) -> SegmentResponse:
        body = {
            "image_png": base64.b64encode(encode_png(request.image)).decode("ascii"),
            "instruction": request.instruction,
            "query_id": request.query_id,
            "view_index": request.view_index,
        }
        attempts = self.config.retries + 1
        delay = self.config.backoff
        last_exc = None
        with self._gate:
            for attempt in range(attempts):
                try:
                    resp = self._session.post(self._url, json=body,
                                              timeout=self.config.timeout)
                    break
                except (requests.ConnectionError, requests.Timeout) as exc:
                    last_exc = exc
                    if attempt + 1 < attempts:
                        logger.warning("segment %s view %d: %s (retry %d/%d)",
                                       request.query_id, request.view_index,
                                       exc, attempt + 1, self.config.retries)
                        time.sleep(delay)
                        delay *= 2.0
            else:
                raise GatewayConnectionError(
                    f"gave up after {attempts} attempts: {last_exc}",
                    request.query_id, request.view_index) from last_exc
        if not 200 <= resp.status_code < 300:
            raise GatewayHTTPError(
                f"segment service returned HTTP {resp.status_code}",
                request.query_id, request.view_index, resp.status_code)
        return self._parse(resp, request)

    def _parse(self, resp, request: SegmentRequest) -> SegmentResponse:
        try:
            payload = resp.json()
        except ValueError as exc:
            raise GatewayProtocolError(f"response is not JSON: {exc}",
                                       request.query_id,
                                       request.view_index) from exc
        if not isinstance(payload, dict):
            raise GatewayProtocolError("response must be a JSON object",
                                       request.query_id, request.view_index)
        missing = [k for k in ("rle", "width", "height", "explanation",
                               "has_segmentation") if k not in payload]
        if missing:
            raise GatewayProtocolError(f"response missing fields: {missing}",
                                       request.query_id, request.view_index)
        h, w = request.image.shape[:2]
        if payload["width"] != w or payload["height"] != h:
            raise GatewayProtocolError(
                f"mask is {payload['width']}x{payload['height']}, "
                f"request was {w}x{h}", request.query_id, request.view_index)
        if not isinstance(payload["rle"], list):
            raise GatewayProtocolError("rle must be an array",
                                       request.query_id, request.view_index)
        try:
            mask = rle_decode(payload["rle"], w, h)
        except ValueError as exc:
            raise GatewayProtocolError(str(exc), request.query_id,
                                       request.view_index) from exc
        has_seg = bool(payload["has_segmentation"])
        if not has_seg and mask.any():
            raise GatewayProtocolError(
                "has_segmentation=false with a nonempty mask",
                request.query_id, request.view_index)
        return SegmentResponse(mask=mask,
                               explanation=str(payload["explanation"]),
                               has_segmentation=has_seg)
