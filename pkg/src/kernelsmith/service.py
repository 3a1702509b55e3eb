"""Expansion/compression service: pure request handlers plus an HTTP layer.

Handlers work on plain dicts so they are testable without sockets. The
HTTP layer is a threading stdlib server over immutable loaded artifacts;
requests never mutate shared state, and seeded requests are reproducible
byte for byte.

JSON API:
  GET  /api/health    -> {status, lm, expansion_model}
  GET  /api/methods   -> {methods: [...], defaults: DecodeConfig fields}
  POST /api/compress  -> {kernel, kernel_tokens, achieved_rate}
  POST /api/expand    -> ExpansionResponse (candidates with traces, metrics,
                         filter flags)
Errors are {code, message} with matching HTTP status.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .compressor import CompressionConfig, TooShortError, compress
from .metrics import RandomProjectionEmbedder, build_report
from .ngram_lm import TrigramLM, TrigramStepModel, read_arpa
from .sampler import METHODS, DecodeConfig, NonTerminatingError, decode, repetitiveness_filter
from .seq2seq import ExpansionModel, load_model
from .textprep import EmptySentenceError, Sentence, normalize_sentence

NO_SPACE_BEFORE = set(".,!?;:%)]}")
NO_SPACE_AFTER = set("([{")


class ServiceUnreadyError(RuntimeError):
    """No model artifact is loaded for the requested operation."""


class BadRequestError(ValueError):
    """Malformed or invalid request body."""


def detokenize(tokens) -> str:
    """Space-join with punctuation attachment (no space before closers/
    sentence punctuation, none after openers)."""
    out: list[str] = []
    for t in tokens:
        if out and (t[0] in NO_SPACE_BEFORE or out[-1][-1] in NO_SPACE_AFTER):
            out[-1] += t
        else:
            out.append(t)
    return " ".join(out)


@dataclass
class Artifacts:
    """Immutable model snapshots shared by concurrent requests."""

    lm: TrigramLM | None = None
    model: ExpansionModel | None = None
    embedder: RandomProjectionEmbedder = field(default_factory=RandomProjectionEmbedder)

    @classmethod
    def load(cls, lm_path: str | None = None, checkpoint_path: str | None = None) -> "Artifacts":
        lm = read_arpa(lm_path) if lm_path else None
        model = load_model(checkpoint_path) if checkpoint_path else None
        return cls(lm=lm, model=model)

    def step_model(self):
        if self.model is not None:
            return self.model
        if self.lm is not None:
            return TrigramStepModel(self.lm)
        raise ServiceUnreadyError("no expansion model or LM loaded")


def methods_payload() -> dict:
    return {"methods": list(METHODS), "defaults": asdict(DecodeConfig())}


def health_payload(artifacts: Artifacts) -> dict:
    return {
        "status": "ok",
        "lm": artifacts.lm is not None,
        "expansion_model": artifacts.model is not None,
    }


def _decode_config(method: str, overrides: dict) -> DecodeConfig:
    if method not in METHODS:
        raise BadRequestError(f"unknown method {method!r}")
    fields = set(DecodeConfig.__dataclass_fields__)
    unknown = set(overrides) - (fields - {"method"})
    if unknown:
        raise BadRequestError(f"unknown decode options: {sorted(unknown)}")
    try:
        return DecodeConfig(method=method, **overrides)
    except ValueError as e:
        raise BadRequestError(str(e)) from e


def handle_expand(artifacts: Artifacts, request: dict) -> dict:
    """Decode candidates for a sentence; filtered ones are flagged, not dropped."""
    step_model = artifacts.step_model()
    sentence = request.get("sentence", "")
    if not isinstance(sentence, str) or not sentence.strip():
        raise BadRequestError("request needs a non-empty 'sentence'")
    try:
        normalized = normalize_sentence(sentence)
    except EmptySentenceError as e:
        raise BadRequestError(str(e)) from e
    method = request.get("method", "parabola_c")
    count = request.get("candidate_count", 1)
    if not isinstance(count, int) or count < 1:
        raise BadRequestError("candidate_count must be a positive integer")
    seed = request.get("seed", 0)
    if not isinstance(seed, int):
        raise BadRequestError("seed must be an integer")
    config = _decode_config(method, request.get("overrides") or {})

    results: list[tuple[object, int]] = []
    if method in ("greedy", "beam"):
        try:
            decoded = decode(step_model, normalized, config)
        except NonTerminatingError as e:
            decoded = e.results
        ranked = decoded if isinstance(decoded, list) else [decoded]
        results = [(r, seed) for r in ranked[:count]]
        while len(results) < count and results:
            results.append(results[-1])  # deterministic methods cannot vary
    else:
        for i in range(count):
            try:
                results.append((decode(step_model, normalized, config, seed=seed + i), seed + i))
            except NonTerminatingError as e:
                results.append((e.results[0], seed + i))

    candidates = []
    for res, used_seed in results:
        if not res.terminated:
            reason = "non-terminating"
        elif not repetitiveness_filter(res.tokens):
            reason = "repetitive"
        else:
            reason = None
        report = build_report(normalized.tokens, res.tokens, embedder=artifacts.embedder)
        candidates.append(
            {
                "tokens": list(res.tokens),
                "text": detokenize(res.tokens),
                "trace": res.trace.to_dict(),
                "metrics": report.to_dict(),
                "filtered": reason is not None,
                "filter_reason": reason,
                "seed": used_seed,
            }
        )
    return {
        "input_tokens": list(normalized.tokens),
        "input_text": detokenize(normalized.tokens),
        "method": method,
        "seed": seed,
        "candidates": candidates,
    }


def handle_compress(artifacts: Artifacts, request: dict) -> dict:
    if artifacts.lm is None:
        raise ServiceUnreadyError("no language model loaded")
    sentence = request.get("sentence", "")
    if not isinstance(sentence, str) or not sentence.strip():
        raise BadRequestError("request needs a non-empty 'sentence'")
    rate = request.get("target_rate", 0.4)
    try:
        normalized = normalize_sentence(sentence)
        config = CompressionConfig(target_rate=float(rate))
        kernel = compress(artifacts.lm, normalized, config)
    except (EmptySentenceError, TooShortError, ValueError) as e:
        raise BadRequestError(str(e)) from e
    return {
        "kernel_tokens": list(kernel.tokens),
        "kernel": detokenize(kernel.tokens),
        "input_tokens": list(normalized.tokens),
        "achieved_rate": len(kernel) / len(normalized),
    }


# --- HTTP layer -------------------------------------------------------------------


def make_server(artifacts: Artifacts, host: str = "127.0.0.1", port: int = 8765,
                static_dir: str | None = None) -> ThreadingHTTPServer:
    static_root = Path(static_dir).resolve() if static_dir else None

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # tests stay quiet
            pass

        def _send(self, status: int, payload: dict) -> None:
            body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self._cors()
            self.end_headers()
            self.wfile.write(body)

        def _cors(self):
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")

        def _error(self, status: int, code: str, message: str) -> None:
            self._send(status, {"code": code, "message": message})

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.end_headers()

        def do_GET(self):
            if self.path == "/api/health":
                return self._send(200, health_payload(artifacts))
            if self.path == "/api/methods":
                return self._send(200, methods_payload())
            if static_root is not None:
                return self._static()
            return self._error(404, "not-found", f"no route {self.path}")

        def _static(self):
            rel = self.path.lstrip("/") or "index.html"
            target = (static_root / rel).resolve()
            if not str(target).startswith(str(static_root)) or not target.is_file():
                return self._error(404, "not-found", f"no file {self.path}")
            types = {".html": "text/html", ".js": "text/javascript",
                     ".css": "text/css", ".map": "application/json",
                     ".svg": "image/svg+xml"}
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", types.get(target.suffix, "application/octet-stream"))
            self.send_header("Content-Length", str(len(body)))
            self._cors()
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            try:
                request = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                return self._error(400, "bad-request", "body is not valid JSON")
            try:
                if self.path == "/api/expand":
                    return self._send(200, handle_expand(artifacts, request))
                if self.path == "/api/compress":
                    return self._send(200, handle_compress(artifacts, request))
                return self._error(404, "not-found", f"no route {self.path}")
            except BadRequestError as e:
                return self._error(400, "bad-request", str(e))
            except ServiceUnreadyError as e:
                return self._error(503, "service-unready", str(e))

    return ThreadingHTTPServer((host, port), Handler)
