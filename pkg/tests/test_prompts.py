"""Battery and answer-parser tests, including the shipped fixture corpus."""

from __future__ import annotations

import json
import random
import string
from importlib import resources

import pytest

from wordprobe.prompts import (
    DEFAULT_RULES,
    AnswerClass,
    ParseRuleSet,
    PlaceholderError,
    PromptError,
    PromptTemplate,
    builtin_battery,
    lint_battery,
    load_battery,
    parse_answer,
    render,
    word_warnings,
)


def fixture_cases() -> list[tuple[str, AnswerClass]]:
    data = resources.files("wordprobe.data").joinpath("parse_fixtures.json").read_text("utf-8")
    doc = json.loads(data)
    return [(case["raw"], AnswerClass(case["expected"])) for case in doc["cases"]]


def test_builtin_battery_shape():
    battery = builtin_battery()
    assert len(battery) == 4
    assert [t.id for t in battery] == ["P1", "P2", "P3", "P4"]
    assert len({t.id for t in battery}) == 4
    assert battery[3].id == "P4"


def test_builtin_battery_first_prompt_rendering():
    battery = builtin_battery()
    assert render(battery[0], "perro") == (
        'Do you know the meaning of the word "perro" in Spanish? Please answer yes or no.'
    )


def test_builtin_battery_second_prompt_rendering():
    battery = builtin_battery()
    assert render(battery[1], "gato") == (
        'Is "gato" a correct word in Spanish? Please answer, yes or no.'
    )


def test_builtin_battery_third_and_fourth_prompts():
    battery = builtin_battery()
    assert render(battery[2], "luz") == (
        'Is "luz" a valid word in Spanish? Please answer, yes or no.'
    )
    assert render(battery[3], "luz") == (
        'Is the word "luz" in the Dictionary of the Real Academia Española (RAE)? '
        "Please answer yes or no."
    )


def test_render_is_deterministic_and_verbatim():
    template = builtin_battery()[0]
    assert render(template, "x") == render(template, "x")
    assert '"PERRO"' in render(template, "PERRO")  # no re-folding


def test_render_injective_for_distinct_words():
    template = builtin_battery()[0]
    rng = random.Random(5)
    words = {"".join(rng.choices(string.ascii_lowercase, k=6)) for _ in range(100)}
    rendered = {render(template, w) for w in words}
    assert len(rendered) == len(words)


def test_render_rejects_malformed_template():
    with pytest.raises(PlaceholderError):
        render(PromptTemplate(id="bad", text="no placeholder here"), "x")
    with pytest.raises(PlaceholderError):
        render(PromptTemplate(id="bad", text="{WORD} and {WORD}"), "x")


def test_word_with_quote_renders_verbatim_but_warns():
    template = builtin_battery()[0]
    word = 'pe"rro'
    assert word in render(template, word)
    assert word_warnings(word) == [f"QuoteInWord:{word}"]
    assert word_warnings("perro") == []


def test_lint_battery_clean():
    assert lint_battery(builtin_battery()) == []


def test_lint_battery_duplicate_id():
    battery = [
        PromptTemplate(id="P1", text="Is {WORD} ok?"),
        PromptTemplate(id="P1", text="Is {WORD} fine?"),
    ]
    assert any(p.startswith("DuplicateId") for p in lint_battery(battery))


def test_lint_battery_missing_placeholder():
    battery = [PromptTemplate(id="P1", text="no slot")]
    assert any(p.startswith("MissingPlaceholder") for p in lint_battery(battery))


def test_lint_battery_non_boolean_contract():
    battery = [PromptTemplate(id="P1", text="Is {WORD} ok?", answer_contract="FreeText")]
    assert any(p.startswith("NonBooleanContract") for p in lint_battery(battery))


def test_load_battery_rejects_bad_files():
    with pytest.raises(PromptError):
        load_battery("[]")
    with pytest.raises(PromptError):
        load_battery(json.dumps([{"id": "P1", "text": "no placeholder"}]))


def test_load_battery_round_trip():
    battery = load_battery(json.dumps([{"id": "Q1", "text": "Know {WORD}?", "language_hint": "en"}]))
    assert battery[0].id == "Q1"
    assert battery[0].language_hint == "en"


def test_parse_canonical_markers():
    assert parse_answer("Yes.") is AnswerClass.YES
    assert parse_answer("No") is AnswerClass.NO


def test_parse_spanish_affirmation():
    assert parse_answer("Sí, conozco esa palabra.") is AnswerClass.YES
    assert parse_answer("si") is AnswerClass.YES


def test_parse_unmatched_text():
    assert parse_answer("I cannot determine that.") is AnswerClass.UNPARSEABLE


def test_parse_mixed_signals_never_guess():
    assert parse_answer("Yes and no") is AnswerClass.UNPARSEABLE
    assert parse_answer("No sé si existe") is AnswerClass.UNPARSEABLE


def test_parse_scan_phase_single_family():
    assert parse_answer("I think yes") is AnswerClass.YES
    assert parse_answer("I would say no") is AnswerClass.NO


def test_parse_markers_are_whole_tokens():
    assert parse_answer("nope") is AnswerClass.UNPARSEABLE
    assert parse_answer("yesterday") is AnswerClass.UNPARSEABLE
    assert parse_answer("cannot") is AnswerClass.UNPARSEABLE


def test_parse_fixture_corpus():
    for raw, expected in fixture_cases():
        assert parse_answer(raw) is expected, f"fixture {raw!r}"


def test_parse_case_and_edge_invariance():
    for raw, expected in fixture_cases():
        assert parse_answer(raw.upper()) is expected
        assert parse_answer(raw.lower()) is expected
        assert parse_answer("  " + raw + " \t") is expected
        assert parse_answer(raw + "...") is expected


def test_parse_never_raises_on_noise():
    rng = random.Random(11)
    alphabet = string.printable + "áéíóúñ¿¡"
    for _ in range(500):
        noise = "".join(rng.choices(alphabet, k=rng.randint(0, 40)))
        assert parse_answer(noise) in AnswerClass


def test_parse_empty_is_unparseable():
    assert parse_answer("") is AnswerClass.UNPARSEABLE
    assert parse_answer("   ...   ") is AnswerClass.UNPARSEABLE


def test_rule_set_families_must_be_disjoint():
    with pytest.raises(ValueError):
        ParseRuleSet(yes_markers=("yes", "ok"), no_markers=("no", "OK"))


def test_default_rules_disjoint():
    assert not DEFAULT_RULES.yes_set & DEFAULT_RULES.no_set
