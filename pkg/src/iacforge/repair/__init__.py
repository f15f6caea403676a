from .llm import (
    FunctionClient,
    GenerationParams,
    HttpChatClient,
    LlmClient,
    RecordingClient,
    ReplayClient,
    ScriptedClient,
    prompt_hash,
)
from .loop import (
    JudgeVerdict,
    Outcome,
    RepairStage,
    RepairTranscript,
    StageCheck,
    Turn,
    extract_tagged,
    judge_alignment,
    parse_judge_response,
    run_repair_loop,
)
from .templates import TEMPLATES, PromptTemplate, get_template, render_prompt

__all__ = [
    "FunctionClient",
    "GenerationParams",
    "HttpChatClient",
    "JudgeVerdict",
    "LlmClient",
    "Outcome",
    "PromptTemplate",
    "RecordingClient",
    "RepairStage",
    "RepairTranscript",
    "ReplayClient",
    "ScriptedClient",
    "StageCheck",
    "TEMPLATES",
    "Turn",
    "extract_tagged",
    "get_template",
    "judge_alignment",
    "parse_judge_response",
    "prompt_hash",
    "render_prompt",
    "run_repair_loop",
]
