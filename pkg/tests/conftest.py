import numpy as np
import pytest

from lokiforge.synthetic import make_corpus
from lokiforge.tokenizer import train_bpe


@pytest.fixture(scope="session")
def corpus():
    return make_corpus(300, seed=0)


@pytest.fixture(scope="session")
def tokenizer(corpus):
    return train_bpe([d.text for d in corpus], 512)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one summary line per acceptance criterion, printed after the run

_VERDICTS = []


class Criterion:
    def __init__(self):
        self.failures = []
        self.notes = []
        self.line = None

    def check(self, ok, what):
        if not ok:
            self.failures.append(what)
        return ok

    def note(self, text):
        self.notes.append(text)

    def verdict(self, number, title):
        status = "PASS" if not self.failures else "FAIL"
        detail = "; ".join(self.notes + [f"failed: {f}" for f in self.failures])
        self.line = f"criterion {number} [{title}]: {status}" + (f" ({detail})" if detail else "")
        _VERDICTS.append(self.line)
        print(self.line)
        assert not self.failures, self.line


@pytest.fixture
def acceptance(request):
    c = Criterion()
    yield c
    if c.line is None:
        _VERDICTS.append(f"criterion {request.node.name}: FAIL (raised before a verdict)")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
