"""Clients for external caption and embedding providers, plus offline stubs.

Both providers speak JSON over HTTP POST:

  embeddings:  {"inputs": ["text", ...]}                -> {"vectors": [[...], ...]}
  captions:    {"inputs": [{"id": ..., "image": <b64 png>}], "prompt": ...}
                                                        -> {"captions": ["...", ...]}

A bearer token is attached from the STYLELAB_PROVIDER_TOKEN environment
variable when present. Transient failures (connection errors, 5xx) are
retried with exponential backoff; 4xx responses fail immediately.

Embedding fetches are deduplicated by text content hash and skip keys
already present in the supplied cache, so reruns only pay for new texts.
Caption fetches are per-stimulus and isolate failures: one bad image
logs an error and the rest of the batch still comes back.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import requests

from .errors import DimensionMismatchError, NonFiniteValueError, ProviderError, ProviderUnreachableError
from .semantics import text_key

log = logging.getLogger(__name__)

TOKEN_ENV_VAR = "STYLELAB_PROVIDER_TOKEN"

DEFAULT_CAPTION_PROMPT = (
    "Describe this car wheel image in detail. Write your description in 5-7 "
    "full sentences without using bullet points. Include information about "
    "the wheel design, style, finish, spoke pattern, and any other notable "
    "features"
)


@dataclass(frozen=True)
class ProviderConfig:
    url: str
    batch_size: int = 32
    max_parallel: int = 4
    retries: int = 3
    backoff_base: float = 0.5
    timeout: float = 30.0


def _auth_headers() -> dict[str, str]:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(TOKEN_ENV_VAR)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    return headers


def _post_with_retries(config: ProviderConfig, payload: dict) -> dict:
    """POST `payload`, retrying transient failures up to config.retries."""
    last_error: Exception | None = None
    for attempt in range(config.retries + 1):
        if attempt > 0:
            time.sleep(config.backoff_base * (2 ** (attempt - 1)))
        try:
            resp = requests.post(
                config.url, json=payload, headers=_auth_headers(), timeout=config.timeout
            )
        except requests.RequestException as exc:
            last_error = exc
            log.warning("provider request failed (attempt %d): %s", attempt + 1, exc)
            continue
        if resp.status_code >= 500:
            last_error = ProviderError(f"provider returned {resp.status_code}")
            log.warning("provider returned %d (attempt %d)", resp.status_code, attempt + 1)
            continue
        if resp.status_code != 200:
            raise ProviderError(f"provider rejected request: {resp.status_code} {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProviderError(f"provider returned invalid JSON: {exc}") from exc
    raise ProviderUnreachableError(
        f"provider at {config.url} unreachable after {config.retries + 1} attempts: {last_error}"
    )


# --------------------------------------------------------------------------
# Embeddings
# --------------------------------------------------------------------------

def fetch_embeddings(
    texts: list[str],
    config: ProviderConfig,
    expected_dim: int | None = None,
    existing: dict[str, np.ndarray] | None = None,
) -> dict[str, np.ndarray]:
    """Embed texts, returning a content-hash -> vector map.

    Duplicate texts are sent once. Keys already in `existing` are not
    re-requested; the returned map covers every input text either way.
    """
    cache: dict[str, np.ndarray] = dict(existing or {})
    pending: dict[str, str] = {}
    for text in texts:
        key = text_key(text)
        if key not in cache and key not in pending:
            pending[key] = text

    ordered = sorted(pending.items())
    batches = [
        ordered[i:i + config.batch_size]
        for i in range(0, len(ordered), config.batch_size)
    ]

    def run_batch(batch: list[tuple[str, str]]) -> list[tuple[str, np.ndarray]]:
        body = _post_with_retries(config, {"inputs": [text for _, text in batch]})
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(batch):
            raise ProviderError(
                f"expected {len(batch)} vectors, got "
                f"{len(vectors) if isinstance(vectors, list) else type(vectors).__name__}"
            )
        out = []
        for (key, _), raw in zip(batch, vectors):
            vec = np.asarray(raw, dtype=float)
            if vec.ndim != 1 or (expected_dim is not None and vec.shape[0] != expected_dim):
                raise DimensionMismatchError(
                    f"provider vector has shape {vec.shape}, expected ({expected_dim},)"
                )
            if not np.all(np.isfinite(vec)):
                raise NonFiniteValueError("provider vector contains non-finite values")
            out.append((key, vec))
        return out

    if batches:
        with ThreadPoolExecutor(max_workers=config.max_parallel) as pool:
            for result in pool.map(run_batch, batches):
                cache.update(result)

    return {text_key(t): cache[text_key(t)] for t in texts}


# --------------------------------------------------------------------------
# Captions
# --------------------------------------------------------------------------

@dataclass
class CaptionBatchResult:
    captions: dict[str, str] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)


def fetch_captions(
    images: dict[str, str | Path],
    config: ProviderConfig,
    prompt: str = DEFAULT_CAPTION_PROMPT,
    existing: dict[str, str] | None = None,
) -> CaptionBatchResult:
    """Caption each image (id -> path map), one request per stimulus.

    Ids already present in `existing` are skipped. A failing id is
    recorded under `failures` and does not abort the others, so partial
    progress survives flaky providers.
    """
    result = CaptionBatchResult(captions=dict(existing or {}))
    todo = sorted(sid for sid in images if sid not in result.captions)

    def run_one(sid: str) -> tuple[str, str | None, str | None]:
        try:
            raw = Path(images[sid]).read_bytes()
            payload = {
                "inputs": [{"id": sid, "image": base64.b64encode(raw).decode("ascii")}],
                "prompt": prompt,
            }
            body = _post_with_retries(config, payload)
            captions = body.get("captions")
            if not isinstance(captions, list) or len(captions) != 1 or not isinstance(captions[0], str):
                raise ProviderError(f"expected one caption, got {captions!r}")
            return sid, captions[0], None
        except Exception as exc:
            return sid, None, str(exc)

    if todo:
        with ThreadPoolExecutor(max_workers=config.max_parallel) as pool:
            for sid, caption, error in pool.map(run_one, todo):
                if error is None:
                    result.captions[sid] = caption
                else:
                    log.error("caption fetch failed for %r: %s", sid, error)
                    result.failures[sid] = error
    return result


# --------------------------------------------------------------------------
# Deterministic stubs
# --------------------------------------------------------------------------

def _digest_seed(*parts: str) -> int:
    digest = hashlib.sha256(":".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def stub_embedding(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Unit-norm pseudo-embedding derived only from the text and seed."""
    rng = np.random.default_rng(_digest_seed(str(seed), "embed", text))
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


_STUB_FINISHES = ("gloss black", "brushed silver", "polished chrome", "gunmetal grey", "satin bronze")
_STUB_PATTERNS = ("five-spoke", "mesh", "split-spoke", "turbine", "multi-spoke")
_STUB_RIMS = ("a machined outer lip", "a stepped rim edge", "a deep dish profile", "a flat face")


def stub_caption(stimulus_id: str, seed: int = 0) -> str:
    """Deterministic placeholder caption, long enough to pass validation."""
    rng = np.random.default_rng(_digest_seed(str(seed), "caption", stimulus_id))
    finish = _STUB_FINISHES[rng.integers(len(_STUB_FINISHES))]
    pattern = _STUB_PATTERNS[rng.integers(len(_STUB_PATTERNS))]
    rim = _STUB_RIMS[rng.integers(len(_STUB_RIMS))]
    spokes = int(rng.integers(4, 9))
    return (
        f"This wheel shows a {pattern} layout with {spokes} primary spokes in a "
        f"{finish} finish. The spokes taper toward the hub and meet {rim}, giving "
        f"the face a balanced geometry. The center cap is plain and the lug "
        f"recesses sit flush with the surrounding metal. Overall the design reads "
        f"as clean and production-ready rather than ornamental."
    )


# --------------------------------------------------------------------------
# In-process stub server (used by tests and offline demos)
# --------------------------------------------------------------------------

class StubProviderServer:
    """Tiny threaded HTTP server answering both provider contracts.

    /embeddings and /captions return stub vectors and captions. Tests can
    inject failures (`fail_next`) to exercise the retry path and set
    `required_token` to exercise auth. `request_count` tallies every POST,
    which makes dedupe and idempotency observable.
    """

    def __init__(self, dim: int = 32, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.request_count = 0
        self.required_token: str | None = None
        self._failures_left = 0
        self._lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def do_POST(self):
                with server._lock:
                    server.request_count += 1
                    fail = server._failures_left > 0
                    if fail:
                        server._failures_left -= 1
                if fail:
                    self.send_response(500)
                    self.end_headers()
                    return
                if server.required_token is not None:
                    auth = self.headers.get("Authorization", "")
                    if auth != f"Bearer {server.required_token}":
                        self.send_response(401)
                        self.end_headers()
                        return
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length))
                if self.path == "/embeddings":
                    body = {
                        "vectors": [
                            stub_embedding(text, server.dim, server.seed).tolist()
                            for text in payload["inputs"]
                        ]
                    }
                elif self.path == "/captions":
                    body = {
                        "captions": [
                            stub_caption(item["id"], server.seed)
                            for item in payload["inputs"]
                        ]
                    }
                else:
                    self.send_response(404)
                    self.end_headers()
                    return
                raw = json.dumps(body).encode("utf-8")
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(raw)))
                self.end_headers()
                self.wfile.write(raw)

        self._httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    def url(self, path: str) -> str:
        return f"http://127.0.0.1:{self.port}{path}"

    def fail_next(self, n: int) -> None:
        with self._lock:
            self._failures_left = n

    def __enter__(self) -> "StubProviderServer":
        self._thread.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
