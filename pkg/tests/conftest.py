import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import pytest

from wrac.parse_core import parse_markdown

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_doc(name: str, doc_id: str = "doc"):
    return parse_markdown((FIXTURES / name).read_text(encoding="utf-8"), doc_id=doc_id)


def heading_run_plan(records: list[dict]) -> dict:
    """A plausible model answer: a new group at every heading."""
    groups: list[list[str]] = []
    for r in records:
        if r["type"] == "heading" or not groups:
            groups.append([])
        groups[-1].append(r["id"])
    return {"chunks": groups}


class ChatServer:
    """Minimal chat-completions endpoint on localhost that counts requests."""

    def __init__(self, answer=None):
        self.calls = 0
        self.answer = answer or (lambda body: json.dumps(heading_run_plan(json.loads(body["messages"][1]["content"]))))
        server = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                server.calls += 1
                text = server.answer(body)
                payload = json.dumps({
                    "choices": [{"message": {"role": "assistant", "content": text}}],
                    "usage": {"prompt_tokens": 100, "completion_tokens": 10,
                              "prompt_tokens_details": {"cached_tokens": 20}},
                }).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        self.httpd = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_port}/v1/chat/completions"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def chat_server():
    with ChatServer() as server:
        yield server


@pytest.fixture
def example1():
    return fixture_doc("example1_baggage.md")


@pytest.fixture
def example2():
    return fixture_doc("example2_tyre.md")


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
