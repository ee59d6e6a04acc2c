from .client import ChatMessage, HttpChatClient, LlmConfig, MockChatClient, TransportError
from .policy import (
    HallucinationReport,
    LlmPolicy,
    ParsedAction,
    check_feasible,
    decide_with_strategy,
    llm_joint_policy,
    parse_action,
)
from .prompts import (
    build_few_shot_exemplars,
    build_system_prompt,
    build_user_prompt,
    build_value_prompt,
    cot_user_prompt,
    render_action,
)

__all__ = [
    "ChatMessage",
    "HallucinationReport",
    "HttpChatClient",
    "LlmConfig",
    "LlmPolicy",
    "MockChatClient",
    "ParsedAction",
    "TransportError",
    "build_few_shot_exemplars",
    "build_system_prompt",
    "build_user_prompt",
    "build_value_prompt",
    "check_feasible",
    "cot_user_prompt",
    "decide_with_strategy",
    "llm_joint_policy",
    "parse_action",
    "render_action",
]
