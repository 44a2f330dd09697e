"""promptlit: a self-hostable platform for teaching and assessing prompting
literacy, with an LLM-backed auto-grader and a psychometric analysis suite.
"""

__version__ = "0.1.0"

from .domain import (  # noqa: F401
    CANONICAL_DIMENSION_ORDER,
    GradeReport,
    GraderKind,
    LearningObjective,
    PromptAttempt,
    RubricDimension,
    Scenario,
    Verdict,
    scenario_dimensions,
)
