"""Python bindings for the embprobe clustering and statistics engine.

The extractor writes layer files with write_embeddings(); everything after
that (cluster, stats, queries) runs in the native core.
"""

import json

from ._embprobe import (
    CATALOG_FILE_NAME,
    EmbprobeError,
    Engine,
    FormatError,
    InvariantError,
    IoError,
    QueryError,
    ValidationError,
    embedding_file_name,
    fit,
    read_embeddings,
    tokenize,
    write_catalog,
    write_embeddings,
)
from . import _embprobe as _core

__all__ = [
    "EmbprobeError", "FormatError", "InvariantError", "IoError", "QueryError", "ValidationError",
    "Pipeline", "QuerySession", "CATALOG_FILE_NAME", "embedding_file_name", "fit", "read_embeddings", "tokenize",
    "write_catalog", "write_embeddings",
]


class Pipeline:
    """Runs pipeline stages for a config dict (same keys as the CLI's --config file)."""

    def __init__(self, config=None, **overrides):
        cfg = dict(config or {})
        cfg.update(overrides)
        self._json = json.dumps(cfg)
        self.config = json.loads(_core.normalize_config(self._json))

    def ingest(self):
        return _core.ingest(self._json)

    def synth(self):
        _core.synth(self._json)

    def layers(self):
        return list(_core.layers(self._json))

    def cluster(self, layer):
        return _core.cluster(self._json, layer)

    def stats(self, layer):
        return json.loads(_core.stats(self._json, layer))

    def run(self):
        """ingest (or synth without a corpus) -> cluster -> stats for every layer."""
        if self.config.get("corpus"):
            self.ingest()
        else:
            self.synth()
        for layer in self.layers():
            self.cluster(layer)
            self.stats(layer)
        return self.session()

    def session(self):
        return QuerySession(Engine.from_config(self._json))


class QuerySession:
    """Same routes and payloads as the HTTP API, without a server."""

    def __init__(self, engine):
        self._engine = engine

    def request(self, method, path, body=None, top=None):
        status, payload = self._engine.request(
            method, path, "" if body is None else json.dumps(body), "" if top is None else str(top))
        return status, json.loads(payload)

    def _ok(self, method, path, body=None, top=None):
        status, payload = self.request(method, path, body, top)
        if status != 200:
            raise QueryError(f"{status}: {payload.get('error')}")
        return payload

    def layers(self):
        return self._ok("GET", "/layers")

    def stats(self, layer, top=None):
        return self._ok("GET", f"/layers/{layer}/stats", top=top)

    def membership_brush(self, layer, cluster, lo, hi):
        return self._ok("POST", f"/layers/{layer}/brush/membership", {"cluster": cluster, "lo": lo, "hi": hi})

    def span_brush(self, layer, cluster, lo, hi):
        return self._ok("POST", f"/layers/{layer}/brush/span", {"cluster": cluster, "lo": lo, "hi": hi})

    def sentences(self, layer, left, right, spacing, brush=None, page=0, page_size=None):
        body = {"left": left, "right": right, "spacing": spacing, "page": page}
        if brush is not None:
            body["brush"] = brush
        if page_size is not None:
            body["page_size"] = page_size
        return self._ok("POST", f"/layers/{layer}/sentences", body)
