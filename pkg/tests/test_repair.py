from __future__ import annotations

import json
import re

import httpx
import pytest

import helpers
from iacforge.errors import ExtractionError, JudgeParseError, LlmUnavailable, MissingSlot
from iacforge.repair import (
    HttpChatClient,
    Outcome,
    RepairStage,
    ScriptedClient,
    TEMPLATES,
    extract_tagged,
    judge_alignment,
    render_prompt,
    run_repair_loop,
)
from iacforge.repair.templates import example_slots, gen_example_slots
from iacforge.verify import plan_text, validate_text


def test_every_template_id_is_present():
    expected = {
        "repair-fv1", "repair-fv2", "repair-fv3", "gen-fewshot", "mutn-fewshot",
        "prompt-gen", "policy-gen", "clone-gen", "mutation-gen", "judge-align",
    }
    assert expected <= set(TEMPLATES)


def test_repair_fv2_renders_verbatim_tags():
    text = render_prompt("repair-fv2", {"config": "CFG", "error_message": "ERR", **example_slots()})
    assert "<incorrect_terraform_config>\n```hcl\nCFG\n```\n</incorrect_terraform_config>" in text
    assert "<corrected_terraform_config>" in text
    assert "does not complete within 30 seconds" in text
    assert re.search(r"\{[A-Za-z_]\w*\}", text) is None


def test_gen_fewshot_renders():
    text = render_prompt("gen-fewshot", {"request": "Make a bucket", **gen_example_slots()})
    assert "<final_terraform_config>" in text
    assert "<user_prompt>\nMake a bucket\n</user_prompt>" in text


def test_missing_slot_is_loud():
    with pytest.raises(MissingSlot) as info:
        render_prompt("repair-fv2", {"config": "x", **example_slots()})
    assert info.value.name == "error_message"


def test_slot_values_are_not_reinterpreted():
    text = render_prompt("judge-align", {"prompt": "{config}", "config": "${var.x} {{ }}"})
    assert "<user_prompt>\n{config}\n</user_prompt>" in text
    assert "${var.x} {{ }}" in text


@pytest.mark.parametrize(
    "response, expected",
    [
        ("<t>\nabc\n</t>", "abc"),
        ("<t>first</t> then <t>second</t>", "second"),
        ("<t>\n```hcl\nresource {}\n```\n</t>", "resource {}"),
        ("<t>stale <t>inner</t>", "inner"),
    ],
)
def test_extract_tagged(response, expected):
    assert extract_tagged(response, "t") == expected


@pytest.mark.parametrize("response", ["<t>open only", "</t>", "nothing", "<t>  </t>", "<t>```\n```</t>"])
def test_extract_tagged_errors(response):
    with pytest.raises(ExtractionError):
        extract_tagged(response, "t")


def test_judge():
    assert judge_alignment("p", "c", ScriptedClient(["VERDICT: YES"])).aligned
    v = judge_alignment("p", "c", ScriptedClient(["VERDICT: NO\nMissing bucket versioning"]))
    assert not v.aligned and v.feedback == "Missing bucket versioning"
    with pytest.raises(JudgeParseError):
        judge_alignment("p", "c", ScriptedClient(["Looks fine to me."]))


def test_extraction_failure_note_reaches_next_prompt():
    fixed = helpers.add_defaults(helpers.COMPILABLE_ONLY)
    client = ScriptedClient(["no tags", f"<corrected_terraform_config>{fixed}</corrected_terraform_config>"])
    tr = run_repair_loop(helpers.COMPILABLE_ONLY, lambda a: plan_text(a)[0], client, slots=example_slots())
    assert tr.outcome == Outcome.REPAIRED and tr.turns_used == 2
    assert tr.turns[0].extracted is None
    assert "could not be used" in client.prompts[1]
    assert "MISSING_DEFAULT" in client.prompts[0]


def test_no_llm_call_after_pass():
    fixed = helpers.add_defaults(helpers.COMPILABLE_ONLY)
    client = ScriptedClient([f"<corrected_terraform_config>{fixed}</corrected_terraform_config>", "unused"])
    run_repair_loop(helpers.COMPILABLE_ONLY, lambda a: plan_text(a)[0], client, slots=example_slots())
    assert client.calls == 1


def test_transport_failure_keeps_partial_transcript():
    client = ScriptedClient(["<corrected_terraform_config>still bad = </corrected_terraform_config>"])
    with pytest.raises(LlmUnavailable) as info:
        run_repair_loop(helpers.UNCOMPILABLE, lambda a: validate_text(a)[0], client, stage=RepairStage.FV1, slots=example_slots())
    partial = info.value.transcript
    assert partial is not None and partial.turns_used == 1 and partial.outcome == Outcome.ABORTED


def test_max_turns_validation_and_custom_budget():
    with pytest.raises(ValueError):
        run_repair_loop("x", lambda a: validate_text(a)[0], ScriptedClient([]), max_turns=0)
    tr = run_repair_loop(
        helpers.UNCOMPILABLE, lambda a: validate_text(a)[0], ScriptedClient(["x"] * 3), max_turns=3,
        stage=RepairStage.FV1, slots=example_slots(),
    )
    assert (tr.outcome, tr.turns_used) == (Outcome.EXHAUSTED, 3)


def test_transcript_json_is_stable():
    tr = run_repair_loop(helpers.UNCOMPILABLE, lambda a: validate_text(a)[0], ScriptedClient(["x"] * 5), stage=RepairStage.FV1, slots=example_slots())
    doc = json.loads(tr.to_json())
    assert doc["outcome"] == "EXHAUSTED" and len(doc["turns"]) == 5
    assert "elapsed" not in tr.to_json()


def _transport(statuses: list[int], seen: list[dict]):
    def handler(request: httpx.Request) -> httpx.Response:
        seen.append({"auth": request.headers.get("authorization"), "body": json.loads(request.content)})
        status = statuses.pop(0)
        if status != 200:
            return httpx.Response(status, json={"error": "busy"})
        return httpx.Response(200, json={"choices": [{"message": {"content": "hello"}}]})

    return httpx.MockTransport(handler)


def test_http_client_retries_then_succeeds(monkeypatch):
    monkeypatch.setenv("IACFORGE_LLM_API_KEY", "secret")
    seen: list[dict] = []
    client = HttpChatClient("http://llm/v1/chat", "m", backoff=0, transport=_transport([429, 503, 200], seen))
    assert client.complete("hi") == "hello"
    assert len(seen) == 3
    assert seen[0]["auth"] == "Bearer secret"
    assert seen[0]["body"]["messages"] == [{"role": "user", "content": "hi"}]
    assert {"model", "temperature", "max_tokens"} <= set(seen[0]["body"])


def test_http_client_gives_up_after_three_attempts():
    seen: list[dict] = []
    client = HttpChatClient("http://llm", "m", api_key="k", backoff=0, transport=_transport([500, 500, 500, 200], seen))
    with pytest.raises(LlmUnavailable):
        client.complete("hi")
    assert len(seen) == 3


def test_http_client_does_not_retry_client_errors():
    seen: list[dict] = []
    client = HttpChatClient("http://llm", "m", api_key="k", backoff=0, transport=_transport([400], seen))
    with pytest.raises(LlmUnavailable):
        client.complete("hi")
    assert len(seen) == 1
