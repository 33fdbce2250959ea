"""Scoring against reference answers, and synthetic scenario fixtures."""

from .fixtures import (
    AD_ENABLED_QUERIES,
    AD_NETWORK,
    FIXTURE_KINDS,
    MALWARE_NETWORK,
    ad_window_references,
    fixture_lines,
    generate_fixture,
    malware_references,
)
from .scoring import (
    EvalScore,
    MissingReference,
    ReferenceAnswer,
    ScenarioSummary,
    TypeMismatch,
    WindowReference,
    WindowScore,
    load_references,
    load_window_references,
    match_answer,
    match_steps,
    normalize_entity,
    population_stdev,
    render_window_table,
    score_report,
    score_window,
    step_tokens,
)

__all__ = [
    "AD_ENABLED_QUERIES", "AD_NETWORK", "EvalScore", "FIXTURE_KINDS", "MALWARE_NETWORK", "MissingReference",
    "ReferenceAnswer", "ScenarioSummary", "TypeMismatch", "WindowReference", "WindowScore",
    "ad_window_references", "fixture_lines", "generate_fixture", "load_references", "load_window_references",
    "malware_references", "match_answer", "match_steps", "normalize_entity", "population_stdev",
    "render_window_table", "score_report", "score_window", "step_tokens",
]
