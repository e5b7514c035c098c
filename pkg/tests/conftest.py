import os

import numpy as np
import pytest

from melsmooth.demo import make_demo_corpus
from melsmooth.pipeline import extract_corpus, read_manifest

SR = 24000


@pytest.fixture(scope="session")
def demo_wavs(tmp_path_factory):
    root = tmp_path_factory.mktemp("demo_wav")
    return make_demo_corpus(str(root), n_utterances=20, seed=0)


@pytest.fixture(scope="session")
def demo_features(demo_wavs, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("demo_feat"))
    outcomes = extract_corpus(read_manifest(demo_wavs), out, jobs=2)
    assert all(o.error is None for o in outcomes)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sine(freq, seconds=1.0, amp=0.5, sr=SR):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t)


def dir_bytes(path):
    """Bytes of every file in a directory, keyed by name."""
    out = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), "rb") as fh:
            out[name] = fh.read()
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in sorted(results, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
