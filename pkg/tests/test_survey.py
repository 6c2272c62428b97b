import json
from collections import Counter

import pytest
import requests

from lexvar.questionnaire import (
    MCQuestion,
    YNQuestion,
    mcqf_questions,
    render_prompt,
    sample_questions,
    save_batch,
    ynqf_universe,
)
from lexvar.survey import (
    FirstThreeBaseline,
    OracleInformant,
    RemoteInformant,
    YesBaseline,
    load_run,
    make_informant,
    noisy_answer,
    parse_mcqf,
    parse_response,
    parse_ynqf,
    run_survey,
    run_to_manifest,
    save_run,
)

# --- parsing ---------------------------------------------------------------


@pytest.mark.parametrize(
    "raw,kind",
    [
        ("Sí", "yes"),
        ("sí", "yes"),
        ("si", "yes"),
        ("SI", "yes"),
        ("Sí.", "yes"),
        ("Sí!", "yes"),
        ("Sí…", "yes"),
        ("  no. ", "no"),
        ("No", "no"),
        ("NO.", "no"),
    ],
)
def test_parse_ynqf_accepts(raw, kind):
    assert parse_ynqf(raw).kind == kind


@pytest.mark.parametrize(
    "raw,reason",
    [
        ("", "empty"),
        ("   ", "empty"),
        ("...", "empty"),
        ("Sí, normalmente.", "extra tokens"),
        ("creo que sí", "extra tokens"),
        ("quizás", "unrecognized token"),
        ("sí/no", "unrecognized token"),
    ],
)
def test_parse_ynqf_rejects(raw, reason):
    parsed = parse_ynqf(raw)
    assert parsed.kind == "invalid"
    assert parsed.reason == reason
    assert not parsed.valid


def test_parse_ynqf_decomposed_accent():
    # "si" + combining acute normalizes to "sí".
    assert parse_ynqf("sí").kind == "yes"


@pytest.mark.parametrize(
    "raw,expected",
    [
        ("1/3/4", {1, 3, 4}),
        ("2", {2}),
        (" 1/2 ", {1, 2}),
        ("1/2/3/4/5/6", {1, 2, 3, 4, 5, 6}),
    ],
)
def test_parse_mcqf_accepts(raw, expected):
    parsed = parse_mcqf(raw, 6)
    assert parsed.kind == "selection"
    assert parsed.selection == expected


@pytest.mark.parametrize(
    "raw,reason",
    [
        ("3/1", "not ascending"),
        ("0/2", "out of range"),
        ("7", "out of range"),
        ("1/1", "duplicate"),
        ("", "empty"),
        ("1/a", "malformed"),
        ("1//2", "malformed"),
        ("1/2/", "malformed"),
        ("uno", "malformed"),
        ("1, 2", "malformed"),
    ],
)
def test_parse_mcqf_rejects(raw, reason):
    parsed = parse_mcqf(raw, 6)
    assert parsed.kind == "invalid"
    assert parsed.reason == reason


def test_parse_mcqf_requires_two_options():
    with pytest.raises(ValueError):
        parse_mcqf("1", 1)


def test_parsers_are_total():
    # No input raises; everything maps to a verdict or Invalid.
    for raw in ["", "¡Sí!", "None", "🙂", "1/2\n", "9" * 50]:
        assert parse_ynqf(raw).kind in {"yes", "no", "invalid"}
        assert parse_mcqf(raw, 4).kind in {"selection", "invalid"}


# --- baseline and oracle informants ------------------------------------------


def test_baseline_yes(car_corpus):
    informant = YesBaseline()
    question = YNQuestion(id="q", country="ES", item="A141", variant="coche")
    assert informant.answer("prompt", question) == "Sí"


def test_baseline_first3_option_counts():
    informant = FirstThreeBaseline()
    six = MCQuestion(id="a", country="ES", item="X", options=("1", "2", "3", "4", "5", "6"))
    two = MCQuestion(id="b", country="ES", item="Y", options=("1", "2"))
    assert informant.answer("p", six) == "1/2/3"
    assert informant.answer("p", two) == "1/2"


def test_oracle_reads_gold(car_corpus):
    oracle = OracleInformant(car_corpus)
    yes = YNQuestion(id="a", country="ES", item="A141", variant="coche")
    no = YNQuestion(id="b", country="ES", item="A141", variant="carro")
    assert oracle.answer("p", yes) == "Sí"
    assert oracle.answer("p", no) == "No"


def test_oracle_mcqf_ascending(car_corpus):
    options = ("máquina", "coche", "auto", "carro", "concho", "automóvil")
    question = MCQuestion(id="a", country="AR", item="A141", options=options)
    # AR gold: auto, automóvil, coche -> option positions 2, 3, 6.
    assert OracleInformant(car_corpus).answer("p", question) == "2/3/6"


def test_oracle_soundness_end_to_end(demo_corpus):
    oracle = OracleInformant(demo_corpus)
    for batch in (
        sample_questions(ynqf_universe(demo_corpus), 100, seed=3),
        mcqf_questions(demo_corpus, seed=3),
    ):
        for question in batch.questions:
            parsed = parse_response(oracle.answer("p", question), question)
            gold = demo_corpus.gold_set(question.item, question.country)
            if isinstance(question, YNQuestion):
                assert parsed.is_yes == (question.variant in gold)
            else:
                chosen = {question.options[i - 1] for i in parsed.selection}
                assert chosen == gold


def test_make_informant_validation(car_corpus):
    assert make_informant("oracle", car_corpus).kind == "oracle"
    with pytest.raises(ValueError):
        make_informant("oracle")
    with pytest.raises(ValueError):
        make_informant("remote-llm")
    with pytest.raises(ValueError):
        make_informant("telepathy")


# --- noisy oracle -------------------------------------------------------------


def test_noisy_zero_rate_equals_oracle(demo_corpus):
    oracle = OracleInformant(demo_corpus)
    batch = mcqf_questions(demo_corpus, seed=2)
    for question in batch.questions:
        assert noisy_answer(demo_corpus, question, 0.0, seed=4) == oracle.answer("p", question)


def test_noisy_full_rate_inverts_ynqf(demo_corpus):
    oracle = OracleInformant(demo_corpus)
    for question in ynqf_universe(demo_corpus)[:100]:
        flipped = noisy_answer(demo_corpus, question, 1.0, seed=4)
        assert flipped != oracle.answer("p", question)


def test_noisy_is_deterministic_and_positional_independent(demo_corpus):
    question = ynqf_universe(demo_corpus)[17]
    first = noisy_answer(demo_corpus, question, 0.5, seed=9)
    assert all(noisy_answer(demo_corpus, question, 0.5, seed=9) == first for _ in range(5))


def test_noisy_empty_selection_falls_back_to_one_option():
    from lexvar.corpus import corpus_from_records
    from tests.conftest import make_item

    corpus = corpus_from_records(
        [make_item("A001", ["a", "b"], gold={"ES": ["a", "b"]})]
    )
    question = mcqf_questions(corpus, seed=1).questions[0]
    # Rate 1.0 flips both gold bits off; the format forbids an empty answer.
    answer = noisy_answer(corpus, question, 1.0, seed=3)
    assert answer in {"1", "2"}


def test_noisy_half_rate_membership_frequency(demo_corpus):
    question = next(
        q for q in mcqf_questions(demo_corpus, seed=1).questions if len(q.options) == 6
    )
    counts = Counter()
    trials = 10_000
    for seed in range(trials):
        parsed = parse_mcqf(noisy_answer(demo_corpus, question, 0.5, seed=seed), 6)
        for index in parsed.selection:
            counts[index] += 1
    for index in range(1, 7):
        assert abs(counts[index] / trials - 0.5) < 0.02


def test_noisy_rate_validation(demo_corpus):
    question = ynqf_universe(demo_corpus)[0]
    with pytest.raises(ValueError):
        noisy_answer(demo_corpus, question, 1.5, seed=0)


# --- the runner ----------------------------------------------------------------


def test_run_survey_oracle_complete(demo_corpus):
    batch = sample_questions(ynqf_universe(demo_corpus), 126, seed=8)
    run = run_survey(OracleInformant(demo_corpus), batch, demo_corpus)
    assert run.question_count == 126
    assert run.failure_count == 0
    assert set(run.responses) == {q.id for q in batch.questions}


def test_run_survey_baseline_all_yes(demo_corpus):
    batch = sample_questions(ynqf_universe(demo_corpus), 40, seed=8)
    run = run_survey(YesBaseline(), batch, demo_corpus)
    assert all(r.raw == "Sí" for r in run.responses.values())


def test_run_survey_rejects_empty_batch(demo_corpus):
    batch = sample_questions([], 0, seed=1)
    with pytest.raises(ValueError):
        run_survey(YesBaseline(), batch, demo_corpus)


def test_run_survey_rejects_format_mismatch(demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=1)
    with pytest.raises(ValueError, match="mcqf"):
        run_survey(YesBaseline(), batch, demo_corpus)


def test_run_manifest_is_deterministic(demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=6)
    one = run_survey(OracleInformant(demo_corpus), batch, demo_corpus)
    two = run_survey(OracleInformant(demo_corpus), batch, demo_corpus)
    assert run_to_manifest(one) == run_to_manifest(two)
    assert one.created_at is None  # deterministic informants carry no timestamp
    assert all(r.latency_ms == 0 for r in one.responses.values())


def test_run_manifest_round_trip(tmp_path, demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=6)
    batch_path = tmp_path / "batch.json"
    save_batch(batch, batch_path)
    run = run_survey(OracleInformant(demo_corpus), batch, demo_corpus)
    run_path = tmp_path / "run.json"
    save_run(run, run_path, batch_path=str(batch_path))
    again = load_run(run_path)
    assert again.batch == batch
    assert again.responses == run.responses
    assert again.informant == run.informant


# --- remote informant -----------------------------------------------------------


class FakeResponse:
    def __init__(self, status_code, payload):
        self.status_code = status_code
        self._payload = payload
        self.text = json.dumps(payload)

    def json(self):
        return self._payload


class FakeSession:
    """Offline stand-in for requests.Session speaking the chat-completions shape."""

    def __init__(self, reply="Sí", fail_substrings=(), fail_times=0):
        self.reply = reply
        self.fail_substrings = tuple(fail_substrings)
        self.fail_times = fail_times
        self.calls = []
        self._failures_left = {}

    def post(self, url, json=None, headers=None, timeout=None):
        prompt = json["messages"][0]["content"]
        self.calls.append((url, prompt))
        for marker in self.fail_substrings:
            if marker in prompt:
                left = self._failures_left.setdefault(marker, self.fail_times)
                if left != 0:
                    if left > 0:
                        self._failures_left[marker] = left - 1
                    raise requests.ConnectionError("injected fault")
        reply = self.reply(prompt) if callable(self.reply) else self.reply
        return FakeResponse(200, {"choices": [{"message": {"content": reply}}]})


def test_remote_informant_happy_path(demo_corpus):
    session = FakeSession(reply="No")
    informant = RemoteInformant("test-model", "http://fake.local/v1", session=session)
    batch = sample_questions(ynqf_universe(demo_corpus), 5, seed=2)
    run = run_survey(informant, batch, demo_corpus, backoff_base=0.0)
    assert run.failure_count == 0
    assert all(r.raw == "No" for r in run.responses.values())
    assert session.calls[0][0] == "http://fake.local/v1/chat/completions"
    assert run.created_at is not None


def test_remote_informant_fault_injection(demo_corpus):
    batch = sample_questions(ynqf_universe(demo_corpus), 10, seed=2)
    doomed = [q for q in batch.questions[:2]]
    # Full prompts as markers, so exactly these two questions fail persistently.
    markers = [render_prompt(q, demo_corpus) for q in doomed]
    assert len(set(markers)) == 2
    session = FakeSession(fail_substrings=markers, fail_times=-1)
    informant = RemoteInformant("m", "http://fake.local", session=session)
    run = run_survey(informant, batch, demo_corpus, retry_budget=2, backoff_base=0.0, max_in_flight=1)
    failed = [r for r in run.responses.values() if r.failed]
    assert len(failed) == 2
    assert all(r.attempts == 3 for r in failed)  # 1 try + 2 retries
    assert all(r.error for r in failed)


def test_remote_informant_recovers_within_retry_budget(demo_corpus):
    batch = sample_questions(ynqf_universe(demo_corpus), 4, seed=2)
    marker = render_prompt(batch.questions[0], demo_corpus)
    session = FakeSession(fail_substrings=[marker], fail_times=2)
    informant = RemoteInformant("m", "http://fake.local", session=session)
    run = run_survey(informant, batch, demo_corpus, retry_budget=3, backoff_base=0.0, max_in_flight=1)
    assert run.failure_count == 0


def test_remote_informant_bad_payload(demo_corpus):
    class BrokenSession(FakeSession):
        def post(self, url, json=None, headers=None, timeout=None):
            return FakeResponse(200, {"unexpected": True})

    informant = RemoteInformant("m", "http://fake.local", session=BrokenSession())
    batch = sample_questions(ynqf_universe(demo_corpus), 2, seed=2)
    run = run_survey(informant, batch, demo_corpus, retry_budget=1, backoff_base=0.0)
    assert run.failure_count == 2


def test_remote_api_key_not_in_descriptor(monkeypatch):
    monkeypatch.setenv("LEXVAR_API_KEY", "hunter2")
    informant = RemoteInformant("m", "http://fake.local")
    descriptor = informant.descriptor()
    assert "hunter2" not in json.dumps(descriptor)
    assert descriptor["api_key_env"] == "LEXVAR_API_KEY"


def test_statelessness_same_question_same_answer(demo_corpus):
    informant = make_informant("noisy-oracle", demo_corpus, flip_rate=0.4, seed=5)
    question = ynqf_universe(demo_corpus)[3]
    prompt = render_prompt(question, demo_corpus)
    answers = {informant.answer(prompt, question) for _ in range(10)}
    assert len(answers) == 1


def test_noisy_mcqf_answers_always_parse(demo_corpus):
    # Whatever the noise does, the emitted string must be a valid selection.
    batch = mcqf_questions(demo_corpus, seed=4)
    for rate in (0.0, 0.3, 0.7, 1.0):
        for question in batch.questions[:20]:
            raw = noisy_answer(demo_corpus, question, rate, seed=12)
            parsed = parse_mcqf(raw, len(question.options))
            assert parsed.kind == "selection"
            assert parsed.selection


def test_load_run_requires_batch_reference(tmp_path, demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=6)
    run = run_survey(OracleInformant(demo_corpus), batch, demo_corpus)
    path = tmp_path / "run.json"
    save_run(run, path)  # no batch path recorded
    with pytest.raises(ValueError, match="batch"):
        load_run(path)
    # Passing the batch explicitly works without a recorded path.
    assert load_run(path, batch=batch).question_count == run.question_count


def test_load_run_rejects_mismatched_batch(tmp_path, demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=6)
    other = mcqf_questions(demo_corpus, seed=7)
    run = run_survey(OracleInformant(demo_corpus), batch, demo_corpus)
    path = tmp_path / "run.json"
    save_run(run, path)
    with pytest.raises(ValueError, match="does not match"):
        load_run(path, batch=other)


def test_load_run_rejects_missing_responses(tmp_path, demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=6)
    run = run_survey(OracleInformant(demo_corpus), batch, demo_corpus)
    path = tmp_path / "run.json"
    save_run(run, path)
    manifest = json.loads(path.read_text(encoding="utf-8"))
    manifest["responses"] = manifest["responses"][:-2]
    path.write_text(json.dumps(manifest), encoding="utf-8")
    with pytest.raises(ValueError, match="lacks responses"):
        load_run(path, batch=batch)
