import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import synth  # noqa: E402


@pytest.fixture
def corpus(tmp_path):
    return synth.make_corpus(tmp_path / "fg")


@pytest.fixture
def bg_corpus(tmp_path):
    return synth.make_background(tmp_path / "bg")


@pytest.fixture
def dataset(tmp_path):
    return synth.make_dataset(tmp_path / "ds", n=2)


def pytest_terminal_summary(terminalreporter):
    if synth.ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(synth.ACCEPTANCE):
            terminalreporter.write_line(line)
