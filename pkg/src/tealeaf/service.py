"""HTTP inference service: image in, prediction + confidence + Grad-CAM
overlay out.

The model is loaded once at startup and shared read-only between requests.
Plain inference runs concurrently; Grad-CAM needs gradient access, so
explanation work is serialized through a single lock (correctness over
latency for the explain path).
"""
from __future__ import annotations

import base64
import io
import logging
import threading
import time

import numpy as np
from fastapi import FastAPI, Query, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image

from . import __version__
from .explain import grad_cam, overlay, to_uint8
from .models import load_checkpoint, predict_probabilities
from .preprocess import to_unit_tensor

logger = logging.getLogger(__name__)

DEFAULT_MAX_PAYLOAD = 10 * 1024 * 1024  # 10 MiB


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": code, "message": message})


def create_app(checkpoint_path: str, overlay_alpha: float = 0.4,
               max_payload_bytes: int = DEFAULT_MAX_PAYLOAD) -> FastAPI:
    """Build the app; raises CorruptCheckpoint before binding anything when
    the checkpoint is unreadable."""
    model, registry = load_checkpoint(checkpoint_path)
    model.eval()
    model_version = f"{model.architecture}-{__version__}"
    explain_lock = threading.Lock()

    app = FastAPI(title="tealeaf inference service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(Exception)
    async def _internal_error(request: Request, exc: Exception):
        logger.exception("unhandled error serving %s", request.url.path)
        return _error(500, "internal_error", "inference failed")

    @app.get("/api/v1/health")
    def health():
        return {"status": "ready", "model_version": model_version,
                "classes": list(registry.names)}

    @app.get("/api/v1/classes")
    def classes():
        return list(registry.names)

    @app.post("/api/v1/predict")
    def predict(image: UploadFile,
                explain: bool = Query(default=True)):
        started = time.perf_counter()
        data = image.file.read(max_payload_bytes + 1)
        if len(data) > max_payload_bytes:
            return _error(413, "payload_too_large",
                          f"image exceeds {max_payload_bytes} bytes")
        try:
            decoded = Image.open(io.BytesIO(data))
            with decoded:
                arr = np.asarray(decoded.convert("RGB"), dtype=np.uint8)
        except Exception:
            return _error(415, "unsupported_media_type",
                          "body is not a decodable image")

        tensor = to_unit_tensor(arr, model.preprocess)
        probs = predict_probabilities(model, [tensor])[0]
        predicted = int(np.argmax(probs))
        body = {
            "label": registry.names[predicted],
            "confidence": float(probs[predicted]),
            "probabilities": {name: float(p)
                              for name, p in zip(registry.names, probs)},
            "model_version": model_version,
        }
        if explain:
            with explain_lock:
                heat = grad_cam(model, tensor, target_class=predicted)
            blended = overlay(heat, tensor, alpha=overlay_alpha)
            buf = io.BytesIO()
            Image.fromarray(to_uint8(blended), mode="RGB").save(buf, format="PNG")
            body["gradcam_overlay"] = base64.b64encode(buf.getvalue()).decode("ascii")
        body["latency_ms"] = (time.perf_counter() - started) * 1000.0
        return body

    return app


def serve(checkpoint_path: str, host: str = "127.0.0.1", port: int = 8000,
          overlay_alpha: float = 0.4,
          max_payload_bytes: int = DEFAULT_MAX_PAYLOAD) -> None:
    """Load the checkpoint and serve until interrupted. A corrupt checkpoint
    raises before the server binds; a busy port surfaces as OSError."""
    import uvicorn

    app = create_app(checkpoint_path, overlay_alpha=overlay_alpha,
                     max_payload_bytes=max_payload_bytes)
    uvicorn.run(app, host=host, port=port, log_level="info")
