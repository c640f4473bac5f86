from __future__ import annotations

from pathlib import Path

import pytest

from signsym.attributes import DEFAULT_TRIGGER_PATH, TriggerIndex, load_trigger_rules
from signsym.extraction import DEFAULT_SUPPRESSION_PATH, load_suppression_rules
from signsym.lexicon import DEFAULT_LEXICON_PATH, compile_lexicon, load_lexicon
from signsym.pipeline import Pipeline

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def lexicon():
    return load_lexicon(DEFAULT_LEXICON_PATH)


@pytest.fixture(scope="session")
def matcher(lexicon):
    return compile_lexicon(lexicon)


@pytest.fixture(scope="session")
def trigger_rules():
    return load_trigger_rules(DEFAULT_TRIGGER_PATH)


@pytest.fixture(scope="session")
def trigger_index(trigger_rules):
    return TriggerIndex(trigger_rules)


@pytest.fixture(scope="session")
def suppression_rules():
    return load_suppression_rules(DEFAULT_SUPPRESSION_PATH)


@pytest.fixture(scope="session")
def pipeline():
    # Pipeline state is immutable after construction, safe to share.
    return Pipeline()
