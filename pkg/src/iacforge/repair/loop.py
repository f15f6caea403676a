"""The multi-turn verify/repair loop and the LLM alignment judge."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from ..errors import ExtractionError, IacForgeError, JudgeParseError, LlmUnavailable
from .llm import GenerationParams, LlmClient
from .templates import render_prompt

DEFAULT_MAX_TURNS = 5


class RepairStage(str, Enum):
    FV1 = "FV1"
    FV2 = "FV2"
    FV3 = "FV3"
    PROMPT_ALIGN = "PROMPT_ALIGN"


class Outcome(str, Enum):
    REPAIRED = "REPAIRED"
    PASSED_UNCHANGED = "PASSED_UNCHANGED"
    EXHAUSTED = "EXHAUSTED"
    ABORTED = "ABORTED"  # only on partial transcripts attached to LlmUnavailable


@dataclass(frozen=True)
class StageSpec:
    template: str
    tag: str
    artifact_slot: str


STAGE_DEFAULTS: dict[RepairStage, StageSpec] = {
    RepairStage.FV1: StageSpec("repair-fv1", "corrected_terraform_config", "config"),
    RepairStage.FV2: StageSpec("repair-fv2", "corrected_terraform_config", "config"),
    RepairStage.FV3: StageSpec("repair-fv3", "corrected_policy", "policy"),
    RepairStage.PROMPT_ALIGN: StageSpec("repair-prompt", "revised_prompt", "prompt"),
}


@dataclass(frozen=True)
class StageCheck:
    """Generic verdict for checks that are not a single oracle call."""

    passed: bool
    message: str = ""

    def certificate(self) -> str:
        return self.message or ("passed" if self.passed else "failed")

    def to_dict(self) -> dict:
        return {"passed": self.passed, "message": self.message}


@dataclass(frozen=True)
class JudgeVerdict:
    aligned: bool
    feedback: str

    @property
    def passed(self) -> bool:
        return self.aligned

    def certificate(self) -> str:
        return self.feedback or ("aligned" if self.aligned else "the prompt and configuration are not aligned")

    def to_dict(self) -> dict:
        return {"aligned": self.aligned, "feedback": self.feedback}


def _verdict_dict(verdict: Any) -> dict:
    # timing fields are left out so replayed transcripts stay byte-identical
    return {"passed": bool(verdict.passed), "certificate": verdict.certificate()}


@dataclass
class Turn:
    prompt: str
    response: str
    extracted: str | None
    verdict: Any

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "response": self.response,
            "extracted": self.extracted,
            "verdict": _verdict_dict(self.verdict),
        }


@dataclass
class RepairTranscript:
    stage: RepairStage
    max_turns: int
    initial_verdict: Any
    turns: list[Turn] = field(default_factory=list)
    outcome: Outcome = Outcome.ABORTED
    final_artifact: str = ""

    @property
    def turns_used(self) -> int:
        return len(self.turns)

    @property
    def final_verdict(self) -> Any:
        return self.turns[-1].verdict if self.turns else self.initial_verdict

    def to_dict(self) -> dict:
        return {
            "stage": self.stage.value,
            "outcome": self.outcome.value,
            "turns_used": self.turns_used,
            "max_turns": self.max_turns,
            "initial_verdict": _verdict_dict(self.initial_verdict),
            "turns": [t.to_dict() for t in self.turns],
            "final_artifact": self.final_artifact,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)


_FENCE_OPEN = re.compile(r"\A```[A-Za-z0-9_+-]*[ \t]*\n")
_FENCE_CLOSE = re.compile(r"\n?```\s*\Z")


def extract_tagged(response: str, tag: str) -> str:
    """Content of the last well-formed ``<tag>...</tag>`` pair, fences stripped."""
    open_tag, close_tag = f"<{tag}>", f"</{tag}>"
    end = response.rfind(close_tag)
    if end < 0:
        raise ExtractionError(f"no closing </{tag}> tag in response")
    start = response.rfind(open_tag, 0, end)
    if start < 0:
        raise ExtractionError(f"no <{tag}> tag before the closing tag")
    content = response[start + len(open_tag) : end].strip()
    if _FENCE_OPEN.match(content):
        content = _FENCE_OPEN.sub("", content, count=1)
        content = _FENCE_CLOSE.sub("", content).strip()
    if not content:
        raise ExtractionError(f"<{tag}> block is empty")
    return content


def _check(verifier: Callable[[str], Any], artifact: str) -> Any:
    try:
        return verifier(artifact)
    except LlmUnavailable:
        raise
    except IacForgeError as exc:
        return StageCheck(False, f"{type(exc).__name__}: {exc}")


def run_repair_loop(
    artifact: str,
    verifier: Callable[[str], Any],
    llm: LlmClient,
    max_turns: int = DEFAULT_MAX_TURNS,
    *,
    stage: RepairStage = RepairStage.FV2,
    template: str | None = None,
    tag: str | None = None,
    artifact_slot: str | None = None,
    slots: dict[str, str] | None = None,
    params: GenerationParams | None = None,
) -> RepairTranscript:
    """Verify ``artifact`` and, while it fails, ask ``llm`` for a fix.

    ``verifier`` returns any object with ``passed`` and ``certificate()``.
    Extra template slots (few-shot examples, the prompt, ...) go in ``slots``.
    """
    if max_turns < 1:
        raise ValueError("max_turns must be at least 1")
    spec = STAGE_DEFAULTS[stage]
    template = template or spec.template
    tag = tag or spec.tag
    artifact_slot = artifact_slot or spec.artifact_slot
    slots = dict(slots or {})

    initial = _check(verifier, artifact)
    transcript = RepairTranscript(stage, max_turns, initial, final_artifact=artifact)
    if initial.passed:
        transcript.outcome = Outcome.PASSED_UNCHANGED
        return transcript

    current, certificate = artifact, initial.certificate()
    for _ in range(max_turns):
        prompt = render_prompt(template, {**slots, artifact_slot: current, "error_message": certificate})
        try:
            response = llm.complete(prompt, params)
        except LlmUnavailable as exc:
            exc.transcript = transcript
            raise
        try:
            extracted = extract_tagged(response, tag)
        except ExtractionError as exc:
            note = f"Your previous answer could not be used: {exc}. Enclose the full answer in <{tag}></{tag}> tags."
            transcript.turns.append(Turn(prompt, response, None, StageCheck(False, note)))
            certificate = note + "\n" + certificate
            continue
        try:
            verdict = _check(verifier, extracted)
        except LlmUnavailable as exc:
            exc.transcript = transcript
            raise
        transcript.turns.append(Turn(prompt, response, extracted, verdict))
        current, certificate = extracted, verdict.certificate()
        transcript.final_artifact = current
        if verdict.passed:
            transcript.outcome = Outcome.REPAIRED
            return transcript
    transcript.outcome = Outcome.EXHAUSTED
    return transcript


_VERDICT_RE = re.compile(r"VERDICT\s*:\s*(YES|NO)\b", re.IGNORECASE)


def parse_judge_response(response: str) -> JudgeVerdict:
    m = _VERDICT_RE.search(response)
    if m is None:
        raise JudgeParseError("judge response has no VERDICT: YES|NO token")
    feedback = (response[: m.start()] + response[m.end() :]).strip()
    return JudgeVerdict(m.group(1).upper() == "YES", feedback)


def judge_alignment(
    prompt_nl: str, artifact: str, llm: LlmClient, params: GenerationParams | None = None
) -> JudgeVerdict:
    response = llm.complete(render_prompt("judge-align", {"prompt": prompt_nl, "config": artifact}), params)
    return parse_judge_response(response)
