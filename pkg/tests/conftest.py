import random
from decimal import Decimal

import pytest

from quizstats.model import AttemptPolicy, AttemptRecord, Item, Option, Quiz, select_attempts


def make_quiz(maxima, n_options=4, quiz_id="quiz"):
    items = []
    for k, m in enumerate(maxima):
        opts = [Option("A", Decimal(1))] + [Option(chr(ord("B") + i), Decimal(0)) for i in range(n_options - 1)]
        items.append(Item(f"Q{k + 1}", Decimal(str(m)), tuple(opts)))
    return Quiz(quiz_id, tuple(items))


def make_attempts(quiz, rows, attempt_number=1, student_prefix="S"):
    """One attempt per row of point scores; the keyed option when full marks, else B."""
    width = len(str(len(rows)))
    out = []
    for s, row in enumerate(rows):
        scores = {item.item_id: Decimal(str(v)) for item, v in zip(quiz.items, row)}
        responses = {
            item.item_id: ("A" if scores[item.item_id] == item.max_score else "B") for item in quiz.items
        }
        out.append(AttemptRecord(f"{student_prefix}{s + 1:0{width}d}", attempt_number, scores, responses))
    return out


def matrix_of(rows, maxima=None):
    maxima = maxima or [max(max(Decimal(str(r[j])) for r in rows), Decimal(1)) for j in range(len(rows[0]))]
    quiz = make_quiz(maxima)
    return quiz, select_attempts(make_attempts(quiz, rows), AttemptPolicy.ALL, quiz)


def random_rows(rng, n_students, n_items, maxima=None):
    """Random point scores on a 0.5-point grid."""
    maxima = maxima or [rng.choice([1, 2, 3, 5, 10]) for _ in range(n_items)]
    rows = [[Decimal(rng.randint(0, 2 * m)) / 2 for m in maxima] for _ in range(n_students)]
    return rows, maxima


@pytest.fixture
def rng():
    return random.Random(20240611)


# --------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per numbered criterion

_ACCEPTANCE: dict[int, tuple[str, list[str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or report.outcome != "passed":
        _, outcomes = _ACCEPTANCE.setdefault(number, (title, []))
        outcomes.append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        outcome.get_result().acceptance = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcomes = _ACCEPTANCE[number]
        ok = outcomes and all(o == "passed" for o in outcomes)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
