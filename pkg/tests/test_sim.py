from decimal import Decimal

import pytest

from quizstats.errors import ParseError, ValidationError
from quizstats.items import facility_index
from quizstats.model import AttemptPolicy, parse_attempts, parse_quiz, select_attempts, serialize_attempts, serialize_quiz, validate
from quizstats.sim import SimItem, SimSpec, generate_cohort, parse_sim_spec


def spec(**kw):
    base = dict(n_students=50, items=(SimItem(0.0, 1.0), SimItem(1.0, 2.0, Decimal("2.5"), 5)), seed=42)
    base.update(kw)
    return SimSpec(**base)


def test_deterministic():
    assert generate_cohort(spec()) == generate_cohort(spec())
    quiz, attempts = generate_cohort(spec())
    assert serialize_attempts(attempts, quiz) == serialize_attempts(*reversed(generate_cohort(spec())))


def test_seed_changes_output():
    assert generate_cohort(spec(seed=1))[1] != generate_cohort(spec(seed=2))[1]


def test_frozen_prefix():
    # guards the documented stream: Philox keyed by the seed, Box-Muller normals
    quiz, attempts = generate_cohort(spec(n_students=6, seed=7))
    got = [(a.student_id, [a.item_responses[i] for i in quiz.item_ids]) for a in attempts]
    assert got == [
        ("S1", ["A", "E"]), ("S2", ["A", "C"]), ("S3", ["A", "B"]),
        ("S4", ["B", "E"]), ("S5", ["A", "C"]), ("S6", ["B", "A"]),
    ]
    assert [str(a.item_scores["Q2"]) for a in attempts] == ["0", "0", "0", "0", "0", "2.5"]


def test_guessing_floor_expectation():
    items = tuple(SimItem(0.0, 0.0, Decimal(1), 4) for _ in range(3))
    quiz, attempts = generate_cohort(SimSpec(1000, items, seed=3))
    matrix = select_attempts(attempts, AttemptPolicy.ALL, quiz)
    # p = 1/4 + (3/4) * logistic(0) = 0.625
    for iid in quiz.item_ids:
        assert abs(facility_index(matrix, iid) - 62.5) <= 5


def test_practice_effect_raises_later_attempts():
    items = tuple(SimItem(0.0, 1.5) for _ in range(10))
    quiz, attempts = generate_cohort(SimSpec(300, items, attempts_per_student=3, seed=11))
    first = select_attempts(attempts, AttemptPolicy.FIRST, quiz)
    last = select_attempts(attempts, AttemptPolicy.LAST, quiz)
    assert sum(last.totals) > sum(first.totals)
    assert len(attempts) == 900


@pytest.mark.parametrize("kw", [
    dict(n_students=1),
    dict(items=()),
    dict(items=(SimItem(0.0, 1.0, Decimal(1), 1),)),
    dict(items=(SimItem(0.0, -1.0),)),
    dict(attempts_per_student=0),
    dict(seed=-1),
    dict(seed=2**64),
])
def test_bad_spec(kw):
    with pytest.raises(ValidationError) as exc:
        generate_cohort(spec(**kw))
    assert exc.value.code == "BAD_SPEC"


def test_output_passes_validation_and_round_trips():
    quiz, attempts = generate_cohort(spec(attempts_per_student=2))
    report = validate(quiz, attempts)
    assert not [f for f in report.findings if f.kind in ("SCORE_RANGE", "UNKNOWN_ITEM", "DUPLICATE_ATTEMPT")]
    quiz2 = parse_quiz(serialize_quiz(quiz))
    assert quiz2 == quiz
    assert parse_attempts(serialize_attempts(attempts, quiz), quiz2) == attempts


def test_parse_spec():
    s = parse_sim_spec('{"n_students": 5, "seed": 9, "items": [{"difficulty": 0.5, "discrimination": 1, "max_score": "2", "n_options": 3}]}')
    assert s == SimSpec(5, (SimItem(0.5, 1.0, Decimal(2), 3),), 1, 9)
    with pytest.raises(ParseError):
        parse_sim_spec('{"n_students": 5}')
    with pytest.raises(ParseError):
        parse_sim_spec('{"n_students": 5, "items": [{"difficulty": "hard"}]}')
