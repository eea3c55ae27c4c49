import pytest

from acbias.arpa import parse_arpa
from acbias.subword import SubwordVocab

F1_TEXT = """\\data\\
ngram 1=4
ngram 2=2

\\1-grams:
-0.602060\ta\t-0.301030
-0.602060\tb\t-0.176091
-0.903090\tc
-0.698970\t<unk>

\\2-grams:
-0.301030\ta b
-0.602060\tb c

\\end\\
"""

# criterion number -> (title, passed)
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool]] = {}


@pytest.fixture
def f1_text():
    return F1_TEXT


@pytest.fixture
def f1():
    return parse_arpa(F1_TEXT)


@pytest.fixture
def cat_vocab():
    return SubwordVocab(("▁ca", "▁c", "a", "t", "n"))


@pytest.fixture
def word_vocab():
    """One marker piece per F1 word, so words map to single tokens."""
    return SubwordVocab(("▁a", "▁b", "▁c"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        title, ok = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}")
