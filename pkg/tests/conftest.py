import pytest

from vqasynth.embed import load_embeddings
from vqasynth.statements import default_rule_table

from pathlib import Path

DATA = Path(__file__).parent / "data"
CORPUS = DATA / "corpus"


@pytest.fixture(scope="session")
def mini_table():
    return load_embeddings(str(DATA / "mini_glove.txt"))


@pytest.fixture(scope="session")
def rule_table():
    return default_rule_table()


@pytest.fixture(scope="session")
def corpus_paths():
    return (
        str(CORPUS / "questions.json"),
        str(CORPUS / "annotations.json"),
        str(CORPUS / "captions.json"),
    )


@pytest.fixture(scope="session")
def golden_path():
    return DATA / "golden_explanations.jsonl"
