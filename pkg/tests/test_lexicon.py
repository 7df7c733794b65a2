"""Word-list ingestion and tokenization tests."""

from __future__ import annotations

import random
import re
import unicodedata

import pytest

from wordprobe import lexicon
from wordprobe.lexicon import (
    DecodeError,
    EmptyListError,
    IngestOptions,
    InvalidWordError,
    WordSource,
    load_word_list,
    normalization_report,
    tokenize_text,
    unique_words,
)

from conftest import DATA_DIR


def oracle_load(text: str, fold: bool = True) -> list[str]:
    """Brute-force set-building reimplementation of the ingest rules."""
    seen, out = set(), []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word = unicodedata.normalize("NFC", line)
        if fold:
            word = word.lower()
        if word not in seen:
            seen.add(word)
            out.append(word)
    return out


JOINERS = set("'’-‐‑")
_LETTER = re.compile(r"[^\W\d_]", re.UNICODE)


def oracle_tokenize(text: str, fold: bool = True) -> list[str]:
    """Independent character-scan tokenizer used to cross-check the regex."""
    text = unicodedata.normalize("NFC", text)
    tokens, i, n = [], 0, len(text)
    while i < n:
        if _LETTER.match(text[i]):
            j, current = i, []
            while j < n:
                ch = text[j]
                if _LETTER.match(ch):
                    current.append(ch)
                    j += 1
                elif ch in JOINERS and current and j + 1 < n and _LETTER.match(text[j + 1]):
                    current.append(ch)
                    j += 1
                else:
                    break
            tokens.append("".join(current))
            i = j
        else:
            i += 1
    return [t.lower() for t in tokens] if fold else tokens


def test_load_identity_case():
    assert load_word_list(b"perro\ngato\n").words == ["perro", "gato"]


def test_load_fold_dedupe_skip():
    text = "Perro\nperro\n# comment\n\n"
    wl = load_word_list(text)
    assert wl.words == ["perro"]
    assert wl.words == oracle_load(text)


def test_load_matches_oracle_on_randomized_file():
    rng = random.Random(7)
    vocabulary = ["casa", "Casa", "árbol", "niño", "NIÑO", "agua", "perro", "gato", "sol"]
    lines = []
    for _ in range(1000):
        roll = rng.random()
        if roll < 0.1:
            lines.append("")
        elif roll < 0.2:
            lines.append("# a comment")
        else:
            lines.append(rng.choice(vocabulary) + rng.choice(["", " ", "\t"]))
    text = "\n".join(lines)
    assert load_word_list(text).words == oracle_load(text)


def test_load_no_fold_keeps_case():
    wl = load_word_list("Perro\nperro\n", IngestOptions(fold_case=False))
    assert wl.words == ["Perro", "perro"]


def test_load_nfc_normalizes_decomposed_accents():
    decomposed = "niño\n"  # n + combining tilde
    assert load_word_list(decomposed).words == ["niño"]


def test_load_rejects_bad_utf8():
    with pytest.raises(DecodeError):
        load_word_list(b"\xff\xfeperro")


def test_load_rejects_empty_input():
    with pytest.raises(EmptyListError):
        load_word_list(b"# only a comment\n\n")


def test_load_rejects_internal_whitespace():
    with pytest.raises(InvalidWordError, match="line 2"):
        load_word_list(b"perro\nnew york\n")


def test_load_rejects_control_characters():
    with pytest.raises(InvalidWordError):
        load_word_list("per\x07ro\n")


def test_tokenize_whitespace_split_and_fold():
    assert tokenize_text("En un lugar de la Mancha") == ["en", "un", "lugar", "de", "la", "mancha"]


def test_tokenize_strips_punctuation():
    text = "de la, de—la."
    assert tokenize_text(text) == ["de", "la", "de", "la"]
    assert tokenize_text(text) == oracle_tokenize(text)


def test_tokenize_empty():
    assert tokenize_text("") == []


def test_tokenize_keeps_inner_joiners():
    assert tokenize_text("tren-hospital d'oro can’t") == ["tren-hospital", "d'oro", "can’t"]


def test_tokenize_drops_digits_and_pure_punctuation():
    assert tokenize_text("1605 ... ¡olé! --- (sí)") == ["olé", "sí"]


def test_tokenize_matches_oracle_on_sample_text():
    text = (DATA_DIR / "sample_text_es.txt").read_text("utf-8")
    assert tokenize_text(text) == oracle_tokenize(text)


def test_unique_words_counts():
    wl, stats = unique_words(["de", "la", "de"])
    assert wl.words == ["de", "la"]
    assert stats.total_tokens == 3
    assert stats.unique_words == 2
    assert stats.frequency == {"de": 2, "la": 1}


def test_unique_words_empty():
    wl, stats = unique_words([])
    assert wl.words == []
    assert stats.total_tokens == 0
    assert stats.unique_words == 0
    assert stats.frequency == {}


def test_unique_words_conservation_property():
    rng = random.Random(13)
    pool = ["sol", "mar", "luz", "voz", "paz", "rey"]
    for _ in range(20):
        tokens = [rng.choice(pool) for _ in range(rng.randint(0, 200))]
        _, stats = unique_words(tokens)
        assert stats.total_tokens == len(tokens)
        assert sum(stats.frequency.values()) == stats.total_tokens
        assert len(stats.frequency) == stats.unique_words


def test_normalization_report_counts():
    wl = load_word_list("uno\ndos\ntres\nuno\n")
    report = normalization_report(wl)
    assert report.kept == 3
    assert report.dropped_duplicates == 1
    assert report.reconciles()


def test_normalization_report_randomized_recount():
    rng = random.Random(99)
    base = [f"palabra{i}" for i in range(300)]
    lines = []
    for _ in range(1000):
        roll = rng.random()
        if roll < 0.05:
            lines.append("")
        elif roll < 0.1:
            lines.append("# comentario")
        else:
            lines.append(rng.choice(base))
    text = "\n".join(lines)
    report = normalization_report(load_word_list(text))

    # independent recount
    non_blank = [l.strip() for l in text.splitlines()]
    blanks = sum(1 for l in non_blank if not l)
    comments = sum(1 for l in non_blank if l.startswith("#"))
    words = [l for l in non_blank if l and not l.startswith("#")]
    assert report.lines_total == len(non_blank)
    assert report.skipped_blank == blanks
    assert report.skipped_comments == comments
    assert report.kept == len(set(words))
    assert report.dropped_duplicates == len(words) - len(set(words))
    assert report.reconciles()


def test_normalization_idempotent():
    wl = load_word_list("Perro\nGato\nperro\n")
    again = load_word_list(lexicon.export_word_list(wl))
    assert again.words == wl.words
    assert again.ingest_report.dropped_duplicates == 0
    assert again.ingest_report.folded == 0


def test_load_deterministic_export():
    data = "Zorro\nabeja\nZORRO\n# x\n".encode("utf-8")
    first = lexicon.export_word_list(load_word_list(data))
    second = lexicon.export_word_list(load_word_list(data))
    assert first == second


def test_dedupe_soundness_pairwise():
    rng = random.Random(3)
    pool = ["Ala", "ala", "ALA", "bote", "BOTE", "cima"]
    lines = "\n".join(rng.choice(pool) for _ in range(200))
    words = load_word_list(lines).words
    for i, a in enumerate(words):
        for b in words[i + 1 :]:
            assert a.lower() != b.lower()


def test_manual_wordlist_identity_report():
    wl = lexicon.WordList(
        id="x", name="manual", words=["uno", "dos"], source=WordSource.MANUAL
    )
    report = normalization_report(wl)
    assert report.kept == 2
    assert report.dropped_duplicates == 0
    assert report.reconciles()


def test_stats_document_top_n():
    _, stats = unique_words(["a", "b", "a", "c", "a", "b"])
    doc = lexicon.stats_document(stats, top_n=2)
    assert doc["total_tokens"] == 6
    assert doc["unique_words"] == 3
    assert doc["top_n_frequencies"] == [
        {"word": "a", "count": 3},
        {"word": "b", "count": 2},
    ]
