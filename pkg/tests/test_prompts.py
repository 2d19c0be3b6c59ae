import pytest
from hypothesis import given
from hypothesis import strategies as st

from attributor import prompts
from conftest import GOLDEN

VALUES = {
    "sentence": "Heat pumps move heat instead of generating it.",
    "input": "Friends is a great TV series.",
    "question": "How do heat pumps work?",
    "claim": "They reduce costs.",
    "document": "Heat pumps reduce heating costs in most climates.",
    "answer": "Heat pumps are efficient. They reduce costs.",
}

# what follows the verbatim instruction body once the slots are filled
SUFFIX = {
    "factscore": " {sentence}",
    "checkworthiness": "",
    "nli": '\n\nQuestion: "{question}"\n\nClaim: "{claim}"\n\nDocument: "{document}"\n\nOutput:',
    "independence": '\n\nInput: "{claim}"\n\nOutput:',
    "enrichment": '\n\nQuestion: "{question}"\n\nAnswer: "{answer}"\n\nClaim: "{claim}"\n\nRevised Claim:',
    "direct_segmentation": "\n\nInput:\n\nQuestion: {question}\n\nAnswer: {answer}\n\nOutput:",
}


def _golden(name: str) -> str:
    return (GOLDEN / f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


@pytest.mark.parametrize("name", sorted(prompts.SLOTS))
def test_rendered_prompt_matches_golden(name):
    values = {k: VALUES[k] for k in prompts.SLOTS[name]}
    expected = _golden(name) + SUFFIX[name]
    for slot, value in values.items():
        expected = expected.replace("{" + slot + "}", value)
    rendered = prompts.render(name, **values)
    assert rendered == expected


@pytest.mark.parametrize("name", sorted(prompts.SLOTS))
def test_identify_and_parse_invert_render(name):
    values = {k: VALUES[k] for k in prompts.SLOTS[name]}
    rendered = prompts.render(name, **values)
    assert prompts.identify(rendered) == name
    assert prompts.parse(name, rendered) == values


def test_render_requires_exact_slots():
    with pytest.raises(KeyError):
        prompts.render("independence")
    with pytest.raises(KeyError):
        prompts.render("independence", claim="x", extra="y")
    with pytest.raises(KeyError):
        prompts.load_template("nope")


def test_slot_text_is_not_re_expanded():
    out = prompts.render("nli", question="{claim}", claim="C", document="D")
    assert prompts.parse("nli", out) == {"question": "{claim}", "claim": "C", "document": "D"}


def test_identify_unknown_prompt():
    assert prompts.identify("Tell me a joke") is None


@given(st.text(min_size=1).filter(lambda s: s.strip()))
def test_independence_parse_round_trip(text):
    assert prompts.parse("independence", prompts.render("independence", claim=text)) == {"claim": text}
