from collections import Counter

import pytest
from scipy import stats

from lexvar.corpus import corpus_from_records
from lexvar.countries import COUNTRY_CODES
from lexvar.questionnaire import (
    YNQF,
    MCQuestion,
    YNQuestion,
    batch_from_manifest,
    batch_to_manifest,
    load_batch,
    mcqf_questions,
    render_prompt,
    sample_questions,
    save_batch,
    ynqf_universe,
)
from tests.conftest import make_item


def test_universe_size_single_item(car_corpus):
    universe = ynqf_universe(car_corpus)
    assert len(universe) == 21 * 6


def test_universe_empty_corpus():
    corpus = corpus_from_records([])
    assert ynqf_universe(corpus) == []


def test_universe_order_is_deterministic(car_corpus):
    universe = ynqf_universe(car_corpus)
    assert universe == ynqf_universe(car_corpus)
    # Countries in canonical order, variants in corpus order.
    assert [q.country for q in universe[:6]] == ["ES"] * 6
    assert [q.variant for q in universe[:6]] == [
        "auto", "automóvil", "carro", "coche", "concho", "máquina",
    ]
    assert universe[6].country == "GQ"


def test_universe_ids_unique(demo_corpus):
    universe = ynqf_universe(demo_corpus)
    assert len({q.id for q in universe}) == len(universe)


def test_sample_exhaustive(car_corpus):
    universe = ynqf_universe(car_corpus)
    batch = sample_questions(universe, len(universe), seed=3)
    assert sorted(q.id for q in batch.questions) == sorted(q.id for q in universe)
    # Presentation order is a shuffle of generation order.
    assert list(batch.questions) != universe


def test_sample_empty():
    batch = sample_questions([], 0, seed=1)
    assert batch.questions == ()
    assert batch.format == YNQF


def test_sample_determinism_and_seed_sensitivity(car_corpus):
    universe = ynqf_universe(car_corpus)
    one = sample_questions(universe, 50, seed=9)
    two = sample_questions(universe, 50, seed=9)
    assert batch_to_manifest(one) == batch_to_manifest(two)
    other = sample_questions(universe, 50, seed=10)
    assert {q.id for q in one.questions} != {q.id for q in other.questions}


def test_sample_too_large(car_corpus):
    universe = ynqf_universe(car_corpus)
    with pytest.raises(ValueError):
        sample_questions(universe, len(universe) + 1, seed=0)


def test_sample_inclusion_frequencies_uniform(car_corpus):
    # Chi-square sanity check: inclusion counts over many seeded samples.
    universe = ynqf_universe(car_corpus)
    n, seeds = 50, 400
    counts = Counter()
    for seed in range(seeds):
        for q in sample_questions(universe, n, seed=seed).questions:
            counts[q.id] += 1
    expected = seeds * n / len(universe)
    statistic = sum((counts[q.id] - expected) ** 2 / expected for q in universe)
    threshold = stats.chi2.ppf(0.999, df=len(universe) - 1)
    assert statistic < threshold


def test_mcqf_skips_single_variant_items():
    corpus = corpus_from_records(
        [make_item("A001", ["solo"], gold={"ES": ["solo"]})]
    )
    assert mcqf_questions(corpus, seed=1).questions == ()


def test_mcqf_skips_empty_gold(car_corpus):
    batch = mcqf_questions(car_corpus, seed=1)
    # Gold exists for 8 countries only.
    assert len(batch.questions) == 8
    assert {q.country for q in batch.questions} == {
        "ES", "GQ", "DO", "MX", "VE", "PE", "CL", "AR",
    }


def test_mcqf_options_are_permutations(demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=5)
    for q in batch.questions:
        assert sorted(q.options) == sorted(demo_corpus.item(q.item).variants)
        assert len(q.options) >= 2


def test_mcqf_same_seed_same_orders(demo_corpus):
    one = mcqf_questions(demo_corpus, seed=7)
    two = mcqf_questions(demo_corpus, seed=7)
    assert batch_to_manifest(one) == batch_to_manifest(two)


def test_mcqf_option_shuffles_independent(demo_corpus):
    # Across many seeds, the same (country, item) should see different orders.
    orders = {
        mcqf_questions(demo_corpus, seed=s).questions[0].options for s in range(8)
    }
    assert len(orders) > 1


def test_render_ynqf_golden(car_corpus, data_dir):
    question = YNQuestion(id="x", country="ES", item="A141", variant="coche")
    rendered = render_prompt(question, car_corpus)
    golden = (data_dir / "golden" / "ynqf_es_a141_coche.txt").read_text(encoding="utf-8")
    assert rendered == golden
    assert "Usted es de España." in rendered
    assert "«coche»" in rendered


def test_render_mcqf_golden(car_corpus, data_dir):
    question = MCQuestion(
        id="x",
        country="AR",
        item="A141",
        options=("auto", "automóvil", "carro", "coche", "concho", "máquina"),
    )
    rendered = render_prompt(question, car_corpus)
    golden = (data_dir / "golden" / "mcqf_ar_a141.txt").read_text(encoding="utf-8")
    assert rendered == golden
    lines = rendered.splitlines()
    assert lines[3] == "1 auto"
    assert lines[8] == "6 máquina"


def test_render_is_pure(car_corpus):
    question = YNQuestion(id="x", country="MX", item="A141", variant="carro")
    assert render_prompt(question, car_corpus) == render_prompt(question, car_corpus)


def test_render_unknown_country_raises(car_corpus):
    question = YNQuestion(id="x", country="XX", item="A141", variant="carro")
    with pytest.raises(ValueError, match="XX"):
        render_prompt(question, car_corpus)


def test_render_unknown_item_raises(car_corpus):
    question = YNQuestion(id="x", country="ES", item="Z999", variant="carro")
    with pytest.raises(Exception, match="Z999"):
        render_prompt(question, car_corpus)


def test_batch_manifest_round_trip(tmp_path, demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=13)
    path = tmp_path / "batch.json"
    save_batch(batch, path)
    again = load_batch(path)
    assert again == batch
    assert batch_from_manifest(batch_to_manifest(batch)) == batch


def test_manifest_rejects_duplicate_ids(demo_corpus):
    batch = mcqf_questions(demo_corpus, seed=13)
    manifest = batch_to_manifest(batch)
    manifest["questions"].append(manifest["questions"][0])
    with pytest.raises(Exception, match="duplicate"):
        batch_from_manifest(manifest)


def test_ids_encode_option_permutation(demo_corpus):
    # Different option orders must give different ids for the same pair.
    a = mcqf_questions(demo_corpus, seed=1)
    b = mcqf_questions(demo_corpus, seed=2)
    by_pair_a = {(q.country, q.item): q for q in a.questions}
    by_pair_b = {(q.country, q.item): q for q in b.questions}
    differing = [
        pair
        for pair in by_pair_a
        if by_pair_a[pair].options != by_pair_b[pair].options
    ]
    assert differing
    for pair in differing:
        assert by_pair_a[pair].id != by_pair_b[pair].id


def test_full_cross_product_count(demo_corpus):
    assert len(ynqf_universe(demo_corpus)) == demo_corpus.variant_total * len(COUNTRY_CODES)
