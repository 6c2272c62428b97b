"""Survey question generation: enumerate, sample, shuffle, render.

Two formats are produced.  Yes/no questions ask whether one variant is in
typical use in one country; multiple-choice questions enumerate an item's
variants (shuffled) and ask for every typically used option.  Generation is
pure and deterministic: the same corpus and seed always yield byte-identical
batches.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence, Union

from .corpus import Corpus, CorpusError
from .countries import COUNTRY_CODES, SPANISH_NAMES, check_country
from .rng import SplitMix64, derive_seed

YNQF = "ynqf"
MCQF = "mcqf"


@dataclass(frozen=True)
class YNQuestion:
    id: str
    country: str
    item: str
    variant: str

    @property
    def format(self) -> str:
        return YNQF


@dataclass(frozen=True)
class MCQuestion:
    id: str
    country: str
    item: str
    options: tuple[str, ...]  # post-shuffle order; numbering is 1-based

    @property
    def format(self) -> str:
        return MCQF


Question = Union[YNQuestion, MCQuestion]


@dataclass(frozen=True)
class QuestionBatch:
    format: str
    seed: int
    questions: tuple[Question, ...]  # presentation order


def question_id(format: str, country: str, item: str, payload: Sequence[str] | str) -> str:
    """Stable 64-bit hex id hashing the question's full identity.

    For multiple-choice questions the payload is the shuffled option list, so
    ids join runs that saw the same option permutation and nothing else.
    """
    if isinstance(payload, str):
        tail = payload
    else:
        tail = "|".join(payload)
    digest = hashlib.sha256(f"{format}|{country}|{item}|{tail}".encode("utf-8")).hexdigest()
    return digest[:16]


def ynqf_universe(corpus: Corpus) -> list[YNQuestion]:
    """Every (country, item, variant) triple, in deterministic generation order.

    Countries follow the canonical order, items are sorted by index, variants
    keep corpus order.
    """
    items = sorted(corpus.items, key=lambda it: it.index)
    questions = []
    for country in COUNTRY_CODES:
        for item in items:
            for variant in item.variants:
                questions.append(
                    YNQuestion(
                        id=question_id(YNQF, country, item.index, variant),
                        country=country,
                        item=item.index,
                        variant=variant,
                    )
                )
    return questions


def sample_questions(
    universe: Sequence[Question], n: int, seed: int, format: str | None = None
) -> QuestionBatch:
    """Uniform sample of n questions without replacement, then a seeded
    presentation shuffle.  Identical (universe, n, seed) yield identical
    batches."""
    if n > len(universe):
        raise ValueError(f"cannot sample {n} questions from a universe of {len(universe)}")
    if format is None:
        format = universe[0].format if universe else YNQF
    selected = SplitMix64(derive_seed(seed, "select")).sample(universe, n)
    SplitMix64(derive_seed(seed, "order")).shuffle(selected)
    return QuestionBatch(format=format, seed=seed, questions=tuple(selected))


def mcqf_questions(corpus: Corpus, seed: int) -> QuestionBatch:
    """One multiple-choice question per (country, item) pair that has at
    least two variants and a non-empty gold set.

    Items with an empty gold set are excluded at generation time: the answer
    format cannot express an empty selection and the chance correction needs
    a non-empty reference set.  Each question's options are shuffled by an
    independent stream derived from the seed; presentation order gets its
    own shuffle.
    """
    items = sorted(corpus.items, key=lambda it: it.index)
    questions: list[Question] = []
    for country in COUNTRY_CODES:
        for item in items:
            if len(item.variants) < 2:
                continue
            if not corpus.gold_set(item.index, country):
                continue
            options = list(item.variants)
            SplitMix64(derive_seed(seed, f"opts:{country}:{item.index}")).shuffle(options)
            questions.append(
                MCQuestion(
                    id=question_id(MCQF, country, item.index, options),
                    country=country,
                    item=item.index,
                    options=tuple(options),
                )
            )
    SplitMix64(derive_seed(seed, "order")).shuffle(questions)
    return QuestionBatch(format=MCQF, seed=seed, questions=tuple(questions))


_YNQF_TEMPLATE = (
    "Responda a la siguiente pregunta. No tenga en cuenta las preguntas anteriores.\n"
    "Usted es de {country}.\n"
    "¿Suele utilizar el término «{variant}» para referirse a «{description}»? "
    "Responda únicamente con «Sí» o «No»."
)

_MCQF_HEADER = (
    "Responda a la siguiente pregunta. No tenga en cuenta las preguntas anteriores.\n"
    "Usted es de {country}.\n"
    "¿Qué expresión(es) suele usar para referirse a «{description}»? Las opciones son:\n"
)

_MCQF_FOOTER = (
    "Conteste solo con el número correspondiente a la opción. "
    "Puede elegir más de una opción; en ese caso, los números deberán ir "
    "separados por el signo «/» en orden ascendente."
)


def render_prompt(question: Question, corpus: Corpus) -> str:
    """Instantiate the Spanish survey template for one question, byte-exactly."""
    country = SPANISH_NAMES[check_country(question.country)]
    description = corpus.item(question.item).description
    if isinstance(question, YNQuestion):
        return _YNQF_TEMPLATE.format(
            country=country, variant=question.variant, description=description
        )
    lines = [_MCQF_HEADER.format(country=country, description=description)]
    lines.extend(f"{i} {option}\n" for i, option in enumerate(question.options, start=1))
    lines.append(_MCQF_FOOTER)
    return "".join(lines)


def batch_to_manifest(batch: QuestionBatch) -> dict:
    questions = []
    for q in batch.questions:
        entry: dict = {"id": q.id, "country": q.country, "item": q.item}
        if isinstance(q, YNQuestion):
            entry["variant"] = q.variant
        else:
            entry["options"] = list(q.options)
        questions.append(entry)
    return {"format": batch.format, "seed": batch.seed, "questions": questions}


def batch_from_manifest(manifest: dict) -> QuestionBatch:
    fmt = manifest["format"]
    if fmt not in (YNQF, MCQF):
        raise CorpusError(f"unknown batch format: {fmt!r}")
    questions: list[Question] = []
    for entry in manifest["questions"]:
        if fmt == YNQF:
            questions.append(
                YNQuestion(
                    id=entry["id"],
                    country=check_country(entry["country"]),
                    item=entry["item"],
                    variant=entry["variant"],
                )
            )
        else:
            questions.append(
                MCQuestion(
                    id=entry["id"],
                    country=check_country(entry["country"]),
                    item=entry["item"],
                    options=tuple(entry["options"]),
                )
            )
    ids = [q.id for q in questions]
    if len(set(ids)) != len(ids):
        raise CorpusError("batch manifest contains duplicate question ids")
    return QuestionBatch(format=fmt, seed=manifest["seed"], questions=tuple(questions))


def save_batch(batch: QuestionBatch, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(batch_to_manifest(batch), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_batch(path) -> QuestionBatch:
    with open(path, encoding="utf-8") as fh:
        return batch_from_manifest(json.load(fh))
