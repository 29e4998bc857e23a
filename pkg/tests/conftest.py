import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from footprint.corpus import parse_archive  # noqa: E402
from footprint.synthgen import GeneratorConfig, generate  # noqa: E402


def tweet(account_id="a1", timestamp="2016-01-01T00:00:00Z", text="hello", **kw):
    row = {"account_id": account_id, "timestamp": timestamp, "text": text, "language_tag": "en"}
    row.update(kw)
    return row


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
    return path


@pytest.fixture
def make_dataset(tmp_path):
    counter = iter(range(10_000))

    def build(rows, **kw):
        p = write_jsonl(tmp_path / f"ds{next(counter)}.jsonl", rows)
        return parse_archive(p, "jsonl", **kw)

    return build


@pytest.fixture(scope="session")
def synthetic_default(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic_default")
    return generate(GeneratorConfig(), out)


@pytest.fixture(scope="session")
def synthetic_small(tmp_path_factory):
    out = tmp_path_factory.mktemp("synthetic_small")
    cfg = GeneratorConfig.from_mapping({"seed": 11, "accounts_per_category": 15, "tweet_scale": 0.03})
    return cfg, generate(cfg, out)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: criterion(n, ok, detail) prints and stores it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(n, ok, detail=""):
        status = "PASS" if ok is True else ("SKIP" if ok is None else "FAIL")
        line = f"criterion {n}: {status}" + (f" - {detail}" if detail else "")
        print(line)
        lines.append((n, line))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
