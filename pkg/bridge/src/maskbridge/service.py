"""HTTP service speaking the mask wire protocol.

POST /segment takes {image_png, instruction, query_id, view_index} and
returns {rle, width, height, explanation, has_segmentation}; GET /health
reports the mounted segmenter. Request parsing is done by hand so every
malformed input maps to HTTP 400 with an error JSON rather than a framework
validation response.

To mount a real model instead of the color heuristic, pass `create_app` any
callable with the signature
    segmenter(image: np.ndarray, instruction: str) -> (mask, explanation, has_segmentation)
where image is (H, W, 3) uint8 and mask is (H, W) bool. The heuristic is the
reference implementation of that contract.
"""

from __future__ import annotations

import base64
import binascii
import io
import json
import logging

import numpy as np
import uvicorn
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError

from .rules import DEFAULT_RULE, HeuristicRule, rle_encode

logger = logging.getLogger(__name__)

DEFAULT_MAX_PIXELS = 4096 * 4096


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _decode_image(image_b64: str) -> np.ndarray:
    try:
        raw = base64.b64decode(image_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ValueError(f"image_png is not valid base64: {exc}") from exc
    try:
        with Image.open(io.BytesIO(raw)) as img:
            return np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise ValueError(f"image_png does not decode as an image: {exc}") from exc


def create_app(segmenter=None, max_pixels: int = DEFAULT_MAX_PIXELS) -> FastAPI:
    """Build the service around a segmenter callable (heuristic by default)."""
    if segmenter is None:
        segmenter = DEFAULT_RULE.apply
    if max_pixels < 1:
        raise ValueError("max_pixels must be positive")
    app = FastAPI(title="maskbridge", docs_url=None, redoc_url=None)

    @app.get("/health")
    def health():
        return {"status": "ok", "segmenter": getattr(
            segmenter, "__qualname__", type(segmenter).__name__)}

    @app.post("/segment")
    async def segment(request: Request):
        body = await request.body()
        try:
            payload = json.loads(body)
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            return _error(400, f"request body is not JSON: {exc}")
        if not isinstance(payload, dict):
            return _error(400, "request body must be a JSON object")
        missing = [k for k in ("image_png", "instruction", "query_id",
                               "view_index") if k not in payload]
        if missing:
            return _error(400, f"request missing fields: {missing}")
        if not isinstance(payload["image_png"], str):
            return _error(400, "image_png must be a base64 string")
        if not isinstance(payload["instruction"], str):
            return _error(400, "instruction must be a string")
        if not isinstance(payload["query_id"], str):
            return _error(400, "query_id must be a string")
        if not isinstance(payload["view_index"], int) \
                or isinstance(payload["view_index"], bool) \
                or payload["view_index"] < 0:
            return _error(400, "view_index must be a nonnegative integer")

        try:
            image = _decode_image(payload["image_png"])
        except ValueError as exc:
            return _error(400, str(exc))
        height, width = image.shape[:2]
        if width * height > max_pixels:
            return _error(413, f"image has {width * height} pixels, "
                               f"limit is {max_pixels}")

        mask, explanation, has_segmentation = segmenter(
            image, payload["instruction"])
        logger.info("segment %s view %d: %dx%d, %d true pixels",
                    payload["query_id"], payload["view_index"],
                    width, height, int(np.count_nonzero(mask)))
        return JSONResponse({
            "rle": rle_encode(mask),
            "width": width,
            "height": height,
            "explanation": explanation,
            "has_segmentation": bool(has_segmentation),
        })

    return app


def serve(port: int, rules: HeuristicRule = DEFAULT_RULE,
          host: str = "127.0.0.1",
          max_pixels: int = DEFAULT_MAX_PIXELS) -> None:
    """Run the service until interrupted."""
    app = create_app(segmenter=rules.apply, max_pixels=max_pixels)
    uvicorn.run(app, host=host, port=port, log_level="info")
