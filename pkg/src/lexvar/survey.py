"""Run question batches against informants and validate their answers.

An informant is anything that maps a rendered prompt to raw answer text: a
remote chat-completions endpoint, a trivial baseline, the gold-reading
oracle, or a noise-injected oracle used for calibration.  Every question is
an independent, single-turn exchange.  Parsing is total: any raw text maps
to Yes, No, a selection set, or an Invalid marker with a reason, and only
valid responses count toward the answered total.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import requests

from .corpus import Corpus
from .questionnaire import (
    MCQF,
    YNQF,
    Question,
    QuestionBatch,
    YNQuestion,
    load_batch,
    render_prompt,
)
from .rng import SplitMix64, derive_seed

YES = "yes"
NO = "no"
SELECTION = "selection"
INVALID = "invalid"


@dataclass(frozen=True)
class ParsedResponse:
    kind: str
    selection: frozenset[int] = frozenset()
    reason: str = ""

    @property
    def valid(self) -> bool:
        return self.kind != INVALID

    @property
    def is_yes(self) -> bool:
        return self.kind == YES


def _yes() -> ParsedResponse:
    return ParsedResponse(YES)


def _no() -> ParsedResponse:
    return ParsedResponse(NO)


def _invalid(reason: str) -> ParsedResponse:
    return ParsedResponse(INVALID, reason=reason)


_TERMINAL_JUNK = " \t\r\n.!…"
_DIGITS_RE = re.compile(r"^[0-9]+$")


def parse_ynqf(raw: str) -> ParsedResponse:
    """Parse a yes/no answer leniently in surface form, strictly in content.

    Whitespace and terminal punctuation (periods, exclamation marks,
    ellipses) are trimmed and case is folded; what remains must be exactly
    "sí" (accent optional) or "no".  Anything else is Invalid.
    """
    text = unicodedata.normalize("NFC", raw).strip()
    text = text.rstrip(_TERMINAL_JUNK)
    if not text:
        return _invalid("empty")
    folded = text.casefold()
    if folded in ("sí", "si"):
        return _yes()
    if folded == "no":
        return _no()
    if len(text.split()) > 1:
        return _invalid("extra tokens")
    return _invalid("unrecognized token")


def parse_mcqf(raw: str, option_count: int) -> ParsedResponse:
    """Parse a multiple-choice answer: "/"-separated decimal option numbers,
    strictly ascending, each within 1..option_count."""
    if option_count < 2:
        raise ValueError(f"option count must be >= 2, got {option_count}")
    text = raw.strip()
    if not text:
        return _invalid("empty")
    parts = text.split("/")
    if not all(_DIGITS_RE.match(p) for p in parts):
        return _invalid("malformed")
    values = [int(p) for p in parts]
    if any(v < 1 or v > option_count for v in values):
        return _invalid("out of range")
    if len(set(values)) != len(values):
        return _invalid("duplicate")
    if values != sorted(values):
        return _invalid("not ascending")
    return ParsedResponse(SELECTION, selection=frozenset(values))


def parse_response(raw: str, question: Question) -> ParsedResponse:
    if isinstance(question, YNQuestion):
        return parse_ynqf(raw)
    return parse_mcqf(raw, len(question.options))


class SurveyRequestError(RuntimeError):
    """A remote informant call failed (network, HTTP, or response shape)."""


class Informant:
    """Base informant: maps (prompt, question) to raw answer text."""

    kind = "abstract"
    formats: tuple[str, ...] = (YNQF, MCQF)
    deterministic = True

    def descriptor(self) -> dict:
        return {"kind": self.kind}

    def answer(self, prompt: str, question: Question) -> str:
        raise NotImplementedError


class YesBaseline(Informant):
    """Answers "Sí" to every yes/no question."""

    kind = "baseline-yes"
    formats = (YNQF,)

    def answer(self, prompt: str, question: Question) -> str:
        return "Sí"


class FirstThreeBaseline(Informant):
    """Selects the first three options (both, for two-option items).

    Because options are shuffled before enumeration, this is equivalent to a
    uniformly random fixed-size selection.
    """

    kind = "baseline-first3"
    formats = (MCQF,)

    def answer(self, prompt: str, question: Question) -> str:
        count = min(3, len(question.options))
        return "/".join(str(i) for i in range(1, count + 1))


class OracleInformant(Informant):
    """Reads the gold annotations directly; the upper-bound informant."""

    kind = "oracle"

    def __init__(self, corpus: Corpus) -> None:
        self.corpus = corpus

    def answer(self, prompt: str, question: Question) -> str:
        gold = self.corpus.gold_set(question.item, question.country)
        if isinstance(question, YNQuestion):
            return "Sí" if question.variant in gold else "No"
        selected = [i for i, opt in enumerate(question.options, start=1) if opt in gold]
        if not selected:
            raise ValueError(
                f"question {question.id}: empty gold set for "
                f"({question.item}, {question.country}); batch/corpus mismatch"
            )
        return "/".join(str(i) for i in selected)


def noisy_answer(corpus: Corpus, question: Question, flip_rate: float, seed: int) -> str:
    """Oracle answer with independent label noise, deterministic per question.

    Yes/no verdicts flip with probability ``flip_rate``.  For multiple
    choice, each option's gold membership bit flips independently; if the
    resulting selection is empty (the format cannot express one) a single
    uniformly random option is chosen instead.  The random stream is derived
    from (seed, question id), so answers do not depend on batch position.
    """
    if not 0.0 <= flip_rate <= 1.0:
        raise ValueError(f"flip rate must be in [0, 1], got {flip_rate}")
    rng = SplitMix64(derive_seed(seed, f"noisy:{question.id}"))
    gold = corpus.gold_set(question.item, question.country)
    if isinstance(question, YNQuestion):
        verdict = question.variant in gold
        if rng.random() < flip_rate:
            verdict = not verdict
        return "Sí" if verdict else "No"
    bits = [opt in gold for opt in question.options]
    bits = [b != (rng.random() < flip_rate) for b in bits]
    selected = [i for i, b in enumerate(bits, start=1) if b]
    if not selected:
        selected = [rng.randbelow(len(question.options)) + 1]
    return "/".join(str(i) for i in selected)


class NoisyOracleInformant(Informant):
    """Oracle with a configurable flip rate; calibrates metric sensitivity."""

    kind = "noisy-oracle"

    def __init__(self, corpus: Corpus, flip_rate: float, seed: int) -> None:
        if not 0.0 <= flip_rate <= 1.0:
            raise ValueError(f"flip rate must be in [0, 1], got {flip_rate}")
        self.corpus = corpus
        self.flip_rate = flip_rate
        self.seed = seed

    def descriptor(self) -> dict:
        return {"kind": self.kind, "flip_rate": self.flip_rate, "seed": self.seed}

    def answer(self, prompt: str, question: Question) -> str:
        return noisy_answer(self.corpus, question, self.flip_rate, self.seed)


class RemoteInformant(Informant):
    """Chat-completions-style HTTP informant.

    Sends each prompt as a single user message with deterministic decoding
    (temperature 0) and returns the first choice's message content.  The API
    key is read from an environment variable, never from flags or manifests.
    """

    kind = "remote-llm"
    deterministic = False

    def __init__(
        self,
        model: str,
        base_url: str,
        api_key_env: str = "LEXVAR_API_KEY",
        timeout: float = 60.0,
        temperature: float = 0.0,
        session=None,
    ) -> None:
        self.model = model
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.temperature = temperature
        self._session_override = session
        self._local = threading.local()

    def descriptor(self) -> dict:
        return {
            "kind": self.kind,
            "model": self.model,
            "base_url": self.base_url,
            "api_key_env": self.api_key_env,
            "temperature": self.temperature,
        }

    def _ensure_session(self):
        # One Session per worker thread: Session is not guaranteed
        # thread-safe and the runner calls answer() from a pool.
        if self._session_override is not None:
            return self._session_override
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def answer(self, prompt: str, question: Question) -> str:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }
        try:
            response = self._ensure_session().post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise SurveyRequestError(f"request failed: {exc}") from exc
        if response.status_code != 200:
            raise SurveyRequestError(f"HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise SurveyRequestError(f"unexpected response shape: {exc}") from exc


def make_informant(
    kind: str,
    corpus: Corpus | None = None,
    *,
    flip_rate: float = 0.1,
    seed: int = 0,
    model: str | None = None,
    base_url: str | None = None,
    api_key_env: str = "LEXVAR_API_KEY",
    timeout: float = 60.0,
) -> Informant:
    if kind == "baseline-yes":
        return YesBaseline()
    if kind == "baseline-first3":
        return FirstThreeBaseline()
    if kind == "oracle":
        if corpus is None:
            raise ValueError("oracle informant requires a corpus")
        return OracleInformant(corpus)
    if kind == "noisy-oracle":
        if corpus is None:
            raise ValueError("noisy-oracle informant requires a corpus")
        return NoisyOracleInformant(corpus, flip_rate, seed)
    if kind == "remote-llm":
        if not model or not base_url:
            raise ValueError("remote-llm informant requires model and base_url")
        return RemoteInformant(model, base_url, api_key_env=api_key_env, timeout=timeout)
    raise ValueError(f"unknown informant kind: {kind!r}")


@dataclass
class ResponseRecord:
    question_id: str
    raw: str | None
    error: str | None
    attempts: int
    latency_ms: int

    @property
    def failed(self) -> bool:
        return self.raw is None


@dataclass
class SurveyRun:
    batch: QuestionBatch
    informant: dict
    seed: int
    responses: dict[str, ResponseRecord]
    config: dict = field(default_factory=dict)
    created_at: str | None = None
    batch_path: str | None = None

    @property
    def failure_count(self) -> int:
        return sum(1 for r in self.responses.values() if r.failed)

    @property
    def question_count(self) -> int:
        return len(self.batch.questions)


def run_survey(
    informant: Informant,
    batch: QuestionBatch,
    corpus: Corpus,
    *,
    seed: int | None = None,
    max_in_flight: int = 4,
    retry_budget: int = 2,
    backoff_base: float = 0.5,
    config: dict | None = None,
) -> SurveyRun:
    """Answer every question in the batch, recording failures as sentinels.

    Pure informants run sequentially (they are instantaneous); the remote
    informant keeps up to ``max_in_flight`` requests active and retries each
    failed request with exponential backoff before recording an error.
    ``retry_budget`` counts retries after the first attempt, so the default
    allows three attempts in total.
    """
    if not batch.questions:
        raise ValueError("cannot survey an empty batch")
    if batch.format not in informant.formats:
        raise ValueError(
            f"informant {informant.kind!r} does not answer {batch.format!r} batches"
        )

    def ask(question: Question) -> ResponseRecord:
        prompt = render_prompt(question, corpus)
        attempts = 0
        start = time.monotonic()
        while True:
            attempts += 1
            try:
                raw = informant.answer(prompt, question)
                latency = 0 if informant.deterministic else int((time.monotonic() - start) * 1000)
                return ResponseRecord(question.id, raw, None, attempts, latency)
            except SurveyRequestError as exc:
                if attempts > retry_budget:
                    latency = int((time.monotonic() - start) * 1000)
                    return ResponseRecord(question.id, None, str(exc), attempts, latency)
                if backoff_base > 0:
                    time.sleep(backoff_base * 2 ** (attempts - 1))

    if informant.deterministic or max_in_flight <= 1:
        records = [ask(q) for q in batch.questions]
    else:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            records = list(pool.map(ask, batch.questions))

    return SurveyRun(
        batch=batch,
        informant=informant.descriptor(),
        seed=batch.seed if seed is None else seed,
        responses={r.question_id: r for r in records},
        config=dict(config or {}),
        created_at=(
            None
            if informant.deterministic
            else datetime.now(timezone.utc).isoformat(timespec="seconds")
        ),
    )


def run_to_manifest(run: SurveyRun, batch_path: str | None = None) -> dict:
    responses = []
    for question in run.batch.questions:
        record = run.responses[question.id]
        entry: dict = {"id": record.question_id}
        if record.raw is not None:
            entry["raw"] = record.raw
        else:
            entry["error"] = record.error
        entry["attempts"] = record.attempts
        entry["latency_ms"] = record.latency_ms
        responses.append(entry)
    manifest = {
        "informant": run.informant,
        "batch": {
            "path": batch_path if batch_path is not None else run.batch_path,
            "format": run.batch.format,
            "seed": run.batch.seed,
            "question_count": run.question_count,
        },
        "seed": run.seed,
        "config": run.config,
        "responses": responses,
    }
    if run.created_at is not None:
        manifest["created_at"] = run.created_at
    return manifest


def save_run(run: SurveyRun, path, batch_path: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(run_to_manifest(run, batch_path), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_run(path, batch: QuestionBatch | None = None) -> SurveyRun:
    """Rehydrate a SurveyRun from its manifest.

    The batch is reloaded from the manifest's recorded path (resolved
    relative to the manifest's directory when not absolute) unless one is
    passed explicitly.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    batch_ref = manifest["batch"]
    if batch is None:
        recorded = batch_ref.get("path")
        if not recorded:
            raise ValueError(f"{path}: run manifest has no batch path; pass the batch explicitly")
        candidate = Path(recorded)
        if not candidate.is_absolute() and not candidate.exists():
            candidate = path.parent / recorded
        batch = load_batch(candidate)
    if batch.format != batch_ref["format"] or batch.seed != batch_ref["seed"]:
        raise ValueError(f"{path}: batch does not match the run manifest's batch reference")
    responses = {}
    for entry in manifest["responses"]:
        responses[entry["id"]] = ResponseRecord(
            question_id=entry["id"],
            raw=entry.get("raw"),
            error=entry.get("error"),
            attempts=entry["attempts"],
            latency_ms=entry["latency_ms"],
        )
    missing = {q.id for q in batch.questions} - set(responses)
    if missing:
        raise ValueError(f"{path}: manifest lacks responses for {len(missing)} question(s)")
    return SurveyRun(
        batch=batch,
        informant=manifest["informant"],
        seed=manifest["seed"],
        responses=responses,
        config=manifest.get("config", {}),
        created_at=manifest.get("created_at"),
        batch_path=batch_ref.get("path"),
    )
