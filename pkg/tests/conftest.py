import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from headline_sentiment.lexicon_store import LexiconStore, ValenceLexicon, load_affective, load_embeddings  # noqa: E402
from headline_sentiment.vader_engine import VaderScorer, default_config  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLE = ("Morrisons book second consecutive quarter of sales growth", "Morrisons", 0.43)


@pytest.fixture
def tiny_lexica(tmp_path):
    """Embeddings (d=4) and affect scores (d=2) over a handful of words."""
    emb = tmp_path / "emb.txt"
    emb.write_text("book 0.1 0.2 0.3 0.4\n"
                   "sales -0.1 0.5 0.0 0.2\n"
                   "growth 0.3 -0.2 0.1 0.0\n"
                   "quarter 0.0 0.0 0.1 0.1\n")
    aff = tmp_path / "aff.tsv"
    aff.write_text("token\thappy\tsad\ngrowth\t0.7\t0.1\nslump\t0.05\t0.8\n")
    val = tmp_path / "val.tsv"
    val.write_text("growth\t1.2\nslump\t-1.8\n")
    return emb, aff, val


@pytest.fixture
def tiny_store(tiny_lexica):
    emb, aff, _ = tiny_lexica
    return LexiconStore(load_embeddings(emb), load_affective(aff))


@pytest.fixture
def tiny_scorer():
    return VaderScorer(ValenceLexicon({"growth": 1.2, "slump": -1.8}), default_config())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ------------------------------------------------------------ acceptance summary

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    if report.when == "setup" and report.passed:
        return
    details = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, details = _CRITERIA[number]
        line = f"criterion {number:2d} {status}  {title}"
        terminalreporter.write_line(line + (f"  ({details})" if details else ""))
