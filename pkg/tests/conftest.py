import numpy as np
import pytest

from dsr.corpus import TEST_NAMES, TRAIN_NAMES, load_named, write_corpus


@pytest.fixture(scope="session")
def test_images():
    """The ten held-out photographs as ``(name, Image)`` pairs."""
    return [(n, load_named(n)) for n in TEST_NAMES]


@pytest.fixture(scope="session")
def train_images():
    return [load_named(n) for n in TRAIN_NAMES]


@pytest.fixture(scope="session")
def test_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("test_corpus")
    write_corpus(d, TEST_NAMES)
    return d


@pytest.fixture(scope="session")
def train_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("train_corpus")
    write_corpus(d, TRAIN_NAMES)
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Remember one acceptance line for the terminal summary."""
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    _ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
