"""Seeded synthetic cohorts with known item parameters.

Each student has a latent ability drawn from N(0, 1).  On every attempt
the chance of picking the keyed option is a logistic curve with a
guessing floor of ``1 / n_options``; otherwise a distractor is chosen
uniformly.  Repeat attempts add a fixed practice bonus to ability.

Randomness comes from the Philox-4x32-10 counter-based generator (raw
64-bit outputs, keyed directly by the seed), converted to uniforms and
Box-Muller normals here rather than through numpy's distribution code,
so the stream depends only on the published Philox algorithm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from decimal import Decimal
from typing import Optional

import numpy as np

from .errors import ParseError, ValidationError
from .model import AttemptRecord, Item, Option, Quiz, TextInput, to_decimal

PRACTICE_EFFECT = 0.3


@dataclass(frozen=True)
class SimItem:
    difficulty: float
    discrimination: float
    max_score: Decimal = Decimal(1)
    n_options: int = 4


@dataclass(frozen=True)
class SimSpec:
    n_students: int
    items: tuple[SimItem, ...]
    attempts_per_student: int = 1
    seed: int = 0
    quiz_id: Optional[str] = None

    def check(self):
        bad = []
        if isinstance(self.n_students, bool) or not isinstance(self.n_students, int) or self.n_students < 2:
            bad.append("n_students must be an integer >= 2")
        if not isinstance(self.attempts_per_student, int) or self.attempts_per_student < 1:
            bad.append("attempts_per_student must be an integer >= 1")
        if not isinstance(self.seed, int) or not (0 <= self.seed < 2**64):
            bad.append("seed must be an unsigned 64-bit integer")
        if not self.items:
            bad.append("at least one item is required")
        for k, it in enumerate(self.items):
            if not isinstance(it.n_options, int) or it.n_options < 2:
                bad.append(f"items[{k}].n_options must be >= 2")
            if not (it.discrimination >= 0) or not math.isfinite(it.discrimination):
                bad.append(f"items[{k}].discrimination must be a finite nonnegative number")
            if not math.isfinite(it.difficulty):
                bad.append(f"items[{k}].difficulty must be finite")
            if it.max_score <= 0:
                bad.append(f"items[{k}].max_score must be > 0")
        if bad:
            raise ValidationError("; ".join(bad), code="BAD_SPEC")


def parse_sim_spec(stream: TextInput, *, source: Optional[str] = None) -> SimSpec:
    text = stream if isinstance(stream, str) else stream.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, source=source, line=exc.lineno, column=exc.colno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("items"), list):
        raise ParseError("simulation spec must be an object with an 'items' list", source=source)
    items = []
    try:
        for k, raw in enumerate(doc["items"]):
            items.append(SimItem(
                difficulty=float(raw.get("difficulty", 0.0)),
                discrimination=float(raw.get("discrimination", 1.0)),
                max_score=to_decimal(raw.get("max_score", "1"), f"items[{k}].max_score", source=source),
                n_options=raw.get("n_options", 4),
            ))
    except (AttributeError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"bad item entry: {exc}", source=source) from None
    return SimSpec(
        n_students=doc.get("n_students"),
        items=tuple(items),
        attempts_per_student=doc.get("attempts_per_student", 1),
        seed=doc.get("seed", 0),
        quiz_id=doc.get("quiz_id"),
    )


class _Stream:
    def __init__(self, seed: int):
        self._bits = np.random.Philox(key=seed)

    def uniform(self, size: int) -> np.ndarray:
        raw = self._bits.random_raw(size)
        return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 2**53)

    def normal(self, size: int) -> np.ndarray:
        u = self.uniform(2 * size).reshape(size, 2)
        return np.sqrt(-2.0 * np.log1p(-u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])


def _option_ids(n: int) -> list[str]:
    if n <= 26:
        return [chr(ord("A") + k) for k in range(n)]
    return [f"O{k + 1}" for k in range(n)]


def generate_cohort(spec: SimSpec) -> tuple[Quiz, list[AttemptRecord]]:
    spec.check()
    n_items = len(spec.items)
    iw = len(str(n_items))
    sw = len(str(spec.n_students))

    items = []
    for k, it in enumerate(spec.items):
        ids = _option_ids(it.n_options)
        options = [Option(ids[0], Decimal(1))] + [Option(o, Decimal(0)) for o in ids[1:]]
        items.append(Item(f"Q{k + 1:0{iw}d}", it.max_score, tuple(options)))
    quiz = Quiz(spec.quiz_id or f"sim-{spec.seed}", tuple(items))

    stream = _Stream(spec.seed)
    ability = stream.normal(spec.n_students)
    draws = stream.uniform(spec.n_students * spec.attempts_per_student * n_items * 2).reshape(
        spec.n_students, spec.attempts_per_student, n_items, 2
    )

    difficulty = np.array([it.difficulty for it in spec.items])
    discrimination = np.array([it.discrimination for it in spec.items])
    guess = np.array([1.0 / it.n_options for it in spec.items])

    records = []
    for s in range(spec.n_students):
        student = f"S{s + 1:0{sw}d}"
        for a in range(spec.attempts_per_student):
            theta = ability[s] + PRACTICE_EFFECT * a
            p = guess + (1.0 - guess) / (1.0 + np.exp(-discrimination * (theta - difficulty)))
            scores = {}
            responses = {}
            for k, item in enumerate(quiz.items):
                success_draw, distractor_draw = draws[s, a, k]
                if success_draw < p[k]:
                    scores[item.item_id] = item.max_score
                    responses[item.item_id] = item.options[0].option_id
                else:
                    n_wrong = len(item.options) - 1
                    pick = min(int(distractor_draw * n_wrong), n_wrong - 1)
                    scores[item.item_id] = Decimal(0)
                    responses[item.item_id] = item.options[1 + pick].option_id
            records.append(AttemptRecord(student, a + 1, scores, responses))
    return quiz, records
