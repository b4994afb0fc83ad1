import pytest

from newsbias.entities import (EXCLUDED, PERSON, EntityMention, HeuristicRecognizer, KeywordAssignment, Keyword,
                               RecognizerContext, canonicalize, extract_keywords, make_recognizer,
                               recognize_entities, select_keywords)
from newsbias.errors import RecognizerUnavailable
from newsbias.ingest import parse_transcript


def _doc(*lines):
    return parse_transcript("PROGRAM: P\nNETWORK: CNN\nDATE: 2020-04-01\n\n" + "\n".join(lines) + "\n", "d.txt")


def test_trump_9pm_50_percent():
    t = _doc("ANCHOR: President Trump spoke at 9 PM about 50 percent unemployment.")
    got = {(m.canonical, m.label) for m in recognize_entities(t)}
    assert got == {("Trump", PERSON), ("9 PM", EXCLUDED), ("50 percent", EXCLUDED)}


def test_no_capitals_no_mentions():
    t = _doc("ANCHOR: the markets fell sharply today and nobody knows why.")
    assert recognize_entities(t) == []


def test_new_york_city_merged():
    t = _doc("ANCHOR: We are live in New York City tonight. Crowds filled New York City streets.")
    ms = [m for m in recognize_entities(t) if m.canonical == "New York City"]
    assert len(ms) == 2


def test_sentence_initial_needs_midsentence_evidence():
    t = _doc("ANCHOR: Crowds gathered downtown. Police watched the Crowds from afar.")
    rec = HeuristicRecognizer()
    assert [s.text for s in rec("Crowds gathered downtown.", RecognizerContext(frozenset()))] == []
    assert any(m.canonical == "Crowds" and m.sentence_index == 0 for m in recognize_entities(t))


def test_acronym_survives_stoplist():
    t = _doc("ANCHOR: The report from the WHO came out today.")
    assert "WHO" in {m.canonical for m in recognize_entities(t)}


def test_direction_before_place_is_not_excluded():
    t = _doc("ANCHOR: Voters in North Carolina head to the polls.")
    assert "North Carolina" in {m.canonical for m in recognize_entities(t)}


@pytest.mark.parametrize("surface, expected", [
    ("the White House", "White House"),
    ("Trump's", "Trump"),
    ("  JOE   BIDEN ", "Joe Biden"),
    ("U.S.", "U.S."),
])
def test_canonicalize(surface, expected):
    assert canonicalize(surface) == expected


def test_alias_map():
    assert canonicalize("President Trump", {"President Trump": "Trump"}) == "Trump"


def _mentions(counts):
    """counts: canonical -> (mentions, distinct sentences)."""
    out = []
    for name, (n, s) in counts.items():
        for i in range(n):
            out.append(EntityMention(name, name, PERSON, "t", 0, i % s))
    return out


def test_keyword_example():
    ka = select_keywords(_mentions({"Trump": (12, 8), "Biden": (7, 5), "CDC": (3, 3), "House": (2, 2)}))
    assert ka.texts == ["Trump", "Biden", "CDC"]


def test_top_five_only():
    ka = select_keywords(_mentions({c: (10 - i, 3) for i, c in enumerate("ABCDEF")}))
    assert ka.texts == list("ABCDE")


def test_all_below_three_sentences():
    assert select_keywords(_mentions({"A": (9, 2), "B": (4, 1)})).keywords == ()


def test_excluded_never_keywords():
    ms = [EntityMention("9 PM", "9 PM", EXCLUDED, "t", 0, i) for i in range(5)]
    assert select_keywords(ms).keywords == ()


def test_mixed_transcripts_rejected():
    ms = [EntityMention("A", "A", PERSON, "t1", 0, 0), EntityMention("A", "A", PERSON, "t2", 0, 0)]
    with pytest.raises(ValueError):
        select_keywords(ms)


def test_assignment_validates():
    with pytest.raises(ValueError):
        KeywordAssignment("t", (Keyword("A", 3, ((0, 0), (0, 1))),))
    with pytest.raises(ValueError):
        KeywordAssignment("t", tuple(Keyword(c, 3, ((0, 0), (0, 1), (0, 2))) for c in "ABCDEF"))


def test_extract_keywords_on_document():
    t = _doc("ANCHOR: Trump spoke today. Later Trump left. Critics said Trump was wrong.",
             "GUEST: Biden also spoke.")
    ka = extract_keywords(t)
    assert ka.texts == ["Trump"]
    assert ka.month == "2020-04" and ka.network == "CNN"
    assert KeywordAssignment.from_json(ka.to_json()) == ka


def test_external_recognizer_falls_back():
    rec = make_recognizer("external:/nonexistent/recognizer-binary", fallback=True)
    spans = rec("Reporters asked Biden about it.", RecognizerContext(frozenset()))
    assert [s.text for s in spans] == ["Biden"]


def test_external_recognizer_without_fallback_raises():
    rec = make_recognizer("external:/nonexistent/recognizer-binary", fallback=False)
    with pytest.raises(RecognizerUnavailable):
        rec("Reporters asked Biden about it.", RecognizerContext(frozenset()))


def test_external_recognizer_protocol(tmp_path):
    script = tmp_path / "ner.py"
    script.write_text(
        "import json, sys\n"
        "for line in sys.stdin:\n"
        "    s = json.loads(line)['sentence']\n"
        "    i = s.find('Acme')\n"
        "    ents = [{'text': 'Acme', 'label': 'ORG', 'start': i, 'end': i + 4}] if i >= 0 else []\n"
        "    print(json.dumps({'entities': ents}), flush=True)\n")
    import sys
    rec = make_recognizer(f"external:{sys.executable} {script}", fallback=False)
    try:
        spans = rec("Shares of Acme rose.", RecognizerContext(frozenset()))
    finally:
        getattr(rec, "close", lambda: None)()
    assert [(s.text, s.label) for s in spans] == [("Acme", "ORG")]
