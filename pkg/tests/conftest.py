"""Shared fixtures: corpora from tests/data and a scriptable judge endpoint."""

from __future__ import annotations

import json
import threading
from contextlib import contextmanager
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import pytest

from argcov import DocumentRecord, RoleLabel, Sentence, SummaryRecord, load_corpus

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def legal_corpus():
    return load_corpus(DATA_DIR / "fixture_corpus.jsonl", "irc")


@pytest.fixture
def sci_corpus():
    return load_corpus(DATA_DIR / "sci_corpus.jsonl", "sciarg")


def role(name: str, scheme: str = "irc") -> RoleLabel:
    return RoleLabel(name, scheme)


def make_doc(
    doc_id: str,
    sentences,
    references=(),
    generated=(),
    spans=(),
) -> DocumentRecord:
    """Build a document from (text, role_names, relevance) triples.

    ``sentences`` items may be plain strings (no roles), (text, roles) pairs,
    or (text, roles, relevance) triples; roles are irc names.
    """
    parsed = []
    for idx, item in enumerate(sentences):
        if isinstance(item, str):
            text, names, relevance = item, (), None
        elif len(item) == 2:
            (text, names), relevance = item, None
        else:
            text, names, relevance = item
        parsed.append(
            Sentence(
                idx=idx,
                text=text,
                roles=frozenset(role(n) for n in names),
                relevance=relevance,
            )
        )
    return DocumentRecord(
        doc_id=doc_id,
        sentences=tuple(parsed),
        reference_summaries=tuple(
            SummaryRecord.make(sys_id, text) for sys_id, text in references
        ),
        generated_summaries=tuple(
            SummaryRecord.make(sys_id, text) for sys_id, text in generated
        ),
        spans=tuple(spans),
    )


def chat_payload(content: str) -> dict:
    return {"choices": [{"message": {"content": content}}]}


class _ScriptedHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 (http.server API)
        length = int(self.headers.get("Content-Length", "0"))
        raw = self.rfile.read(length)
        try:
            body = json.loads(raw)
        except json.JSONDecodeError:
            body = raw.decode("utf-8", "replace")
        record = {
            "path": self.path,
            "headers": dict(self.headers.items()),
            "body": body,
        }
        self.server.requests.append(record)
        status, payload = self.server.script(record, len(self.server.requests) - 1)
        data = (
            json.dumps(payload).encode("utf-8")
            if isinstance(payload, (dict, list))
            else str(payload).encode("utf-8")
        )
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):  # quiet test output
        pass


@contextmanager
def scripted_server(script):
    """Serve POSTs on a local port; ``script(record, call_index)`` -> (status, payload)."""
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ScriptedHandler)
    server.script = script
    server.requests = []
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        yield server, f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    finally:
        server.shutdown()
        thread.join(timeout=5)
        server.server_close()
