import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satdscan.preprocess import (
    NO_STOP_WORDS,
    EmptyCorpus,
    NormalizedComment,
    StopWordPolicy,
    is_normalized,
    normalize,
    token_stats,
)


# --- hand-derived examples ---------------------------------------------------

def test_punctuation_folds_to_space_preserved_marks_stay():
    assert normalize("TODO: Fix this ASAP!!") == "todo fix this asap!!"


def test_all_symbolic_input_normalizes_to_none():
    assert normalize("12345 \t ") is None
    assert normalize("") is None
    assert normalize("@#$%^&*()") is None


def test_quotes_and_bangs_survive():
    assert normalize("Don't \"hack\"") == "don't \"hack\""


def test_line_breaks_become_single_spaces():
    assert normalize("multi\nline\r\ncomment") == "multi line comment"


def test_non_ascii_letters_are_kept():
    assert normalize("x = 3.14; // π≈3") == "x π"


def test_upper_casefold_is_stable_on_known_tricky_letters():
    assert normalize("ı") == "i"       # dotless i uppercases to I
    assert normalize("straße") == "strasse"
    assert normalize("İ") == "i"       # dotted capital I; combining dot filtered


def test_stop_words_only_when_opted_in():
    policy = StopWordPolicy(mode="custom", words=frozenset({"the"}))
    assert normalize("remove the noise", policy) == "remove noise"
    assert normalize("the the", policy) is None
    assert normalize("remove the noise") == "remove the noise"


def test_stop_word_policy_validation():
    with pytest.raises(ValueError):
        StopWordPolicy(mode="aggressive")
    with pytest.raises(ValueError):
        StopWordPolicy(mode="custom", words=frozenset({"The"}))


def test_stop_word_policy_from_file(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("The\nand\n\n  or  \n")
    policy = StopWordPolicy.from_file(path)
    assert policy.mode == "custom"
    assert policy.words == frozenset({"the", "and", "or"})


def test_is_normalized():
    assert is_normalized("todo fix")
    assert is_normalized("don't \"x\"!")
    assert not is_normalized("")
    assert not is_normalized(" x")
    assert not is_normalized("a  b")
    assert not is_normalized("Todo")
    assert not is_normalized("a\tb")


def test_token_stats_hand_cases():
    assert token_stats(["a b", "a b c d"]) == (3.0, 1.0)
    assert token_stats(["x"]) == (1.0, 0.0)
    mean, std = token_stats([NormalizedComment(source=None, text="a b c")])
    assert (mean, std) == (3.0, 0.0)
    with pytest.raises(EmptyCorpus):
        token_stats([])


# --- properties ---------------------------------------------------------------

any_text = st.text(max_size=80)


@given(any_text)
def test_normalize_is_idempotent(x):
    once = normalize(x)
    if once is not None:
        assert normalize(once) == once


@given(any_text)
def test_normalize_output_charset_is_closed(x):
    out = normalize(x)
    assert out is None or is_normalized(out)


@given(any_text)
def test_normalize_is_case_insensitive(x):
    assert normalize(x) == normalize(x.upper())


@given(any_text, st.integers(0, 2**32 - 1))
@settings(max_examples=200)
def test_normalize_ignores_whitespace_noise(x, seed):
    # Noise model: grow existing whitespace runs and the string edges. New
    # whitespace *inside* a word could legitimately split tokens, so that is
    # intentionally not claimed.
    rng = random.Random(seed)

    def pad():
        return "".join(rng.choice(" \t\n") for _ in range(rng.randrange(3)))

    noisy = pad() + "".join(ch + pad() if ch.isspace() else ch for ch in x) + pad()
    assert normalize(noisy) == normalize(x)
