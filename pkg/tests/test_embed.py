import numpy as np
import pytest

from vqasynth.embed import EmbeddingError, load_embeddings, lookup, tokenize


def test_tokenize_question():
    assert list(tokenize("Is the umbrella upside down?")) == [
        "is", "the", "umbrella", "upside", "down",
    ]


def test_tokenize_empty():
    assert list(tokenize("")) == []


def test_tokenize_strips_punctuation():
    assert list(tokenize("playing tennis.")) == ["playing", "tennis"]
    assert list(tokenize('"hello," she said...')) == ["hello", "she", "said"]
    assert list(tokenize("?! ... --")) == []


def test_tokenize_keeps_internal_punctuation():
    assert list(tokenize("what time is it? 3:00")) == ["what", "time", "is", "it", "3:00"]


def test_tokenize_idempotent():
    texts = [
        "Is the umbrella upside down?",
        "A man, a plan: tennis!",
        "THREE zebras (grazing)",
    ]
    for text in texts:
        once = list(tokenize(text))
        again = list(tokenize(" ".join(once)))
        assert once == again


def write_embeddings(path, rows):
    path.write_text("\n".join(rows) + "\n")
    return str(path)


def test_load_embeddings_small(tmp_path):
    path = write_embeddings(
        tmp_path / "emb.txt",
        ["dog 1.0 0.0 0.5 -0.25", "cat 0.0 1.0 0.0 0.125", "rat 0.0 0.0 1.0 2.0"],
    )
    table = load_embeddings(path)
    assert table.dim == 4
    assert len(table) == 3
    np.testing.assert_array_equal(lookup(table, "dog"), [1.0, 0.0, 0.5, -0.25])


def test_load_embeddings_bit_identical(tmp_path):
    # components chosen exactly representable and not, both must round-trip
    path = write_embeddings(tmp_path / "emb.txt", ["w 0.1 -3.75 2e-3"])
    table = load_embeddings(path)
    vec = lookup(table, "w")
    assert vec[0] == float("0.1") and vec[1] == -3.75 and vec[2] == 0.002


def test_load_embeddings_dimension_mismatch(tmp_path):
    path = write_embeddings(
        tmp_path / "emb.txt", ["a 1.0 0.0 0.0 0.0", "b 1.0 0.0 0.0", "c 0.0 1.0 0.0 0.0"]
    )
    with pytest.raises(EmbeddingError) as err:
        load_embeddings(path)
    assert ":2:" in str(err.value)


def test_load_embeddings_empty_file(tmp_path):
    path = write_embeddings(tmp_path / "emb.txt", [""])
    with pytest.raises(EmbeddingError, match="no embeddings"):
        load_embeddings(path)


def test_load_embeddings_duplicate_last_wins(tmp_path):
    path = write_embeddings(
        tmp_path / "emb.txt", ["dog 1.0 0.0", "dog 0.0 1.0"]
    )
    table = load_embeddings(path)
    assert table.duplicates == 1
    np.testing.assert_array_equal(lookup(table, "dog"), [0.0, 1.0])


def test_load_embeddings_non_numeric(tmp_path):
    path = write_embeddings(tmp_path / "emb.txt", ["dog 1.0 oops"])
    with pytest.raises(EmbeddingError):
        load_embeddings(path)


def test_lookup_exact_match_only(mini_table):
    assert lookup(mini_table, "man") is not None
    assert lookup(mini_table, "absent-token") is None
    assert lookup(mini_table, "MAN") is None  # caller must pre-lowercase
