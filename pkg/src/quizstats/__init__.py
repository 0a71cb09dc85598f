"""Classical item analysis for exported quiz attempts."""

__version__ = "0.1.0"

from .errors import ParseError, QuizStatsError, ValidationError
from .model import (
    NO_RESPONSE,
    AttemptPolicy,
    AttemptRecord,
    Item,
    Option,
    Quiz,
    ResponseMatrix,
    parse_attempts,
    parse_quiz,
    select_attempts,
    serialize_attempts,
    serialize_quiz,
    validate,
)
from .descriptive import (
    DEFAULT_SCALE,
    GradeScale,
    compare_cohorts,
    map_grade,
    mark_distribution,
    test_statistics,
)
from .items import (
    DiscriminationBand,
    FacilityBand,
    ItemStatistics,
    analyze_items,
    classify_discrimination,
    classify_facility,
    discrimination_efficiency,
    discrimination_index,
    effective_weights,
    facility_index,
    intended_weight,
    item_std_dev,
    random_guess_score,
)
from .diagnostics import FlagKind, FlagThresholds, ItemFlag, flag_items, response_breakdown
from .sim import SimItem, SimSpec, generate_cohort

__all__ = [name for name in dir() if not name.startswith("_")]
