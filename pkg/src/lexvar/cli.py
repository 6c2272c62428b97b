"""Command-line surface: ingest, gen, survey, eval, analyze, report, selftest.

Exit codes: 0 success, 1 usage error, 2 data error, 3 partial run or failed
self-test checks.  All randomness flows from --seed through the portable
generator, so re-running any subcommand with identical inputs and seeds
produces byte-identical output files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    aggregate_area,
    correlate,
    emit_report,
    evaluate_run,
    load_covariates,
    read_country_table,
    score_records,
    write_area_table,
    write_country_table,
    write_score_records,
)
from .corpus import CorpusError, ingest_tsv, load_corpus, save_corpus, validate_corpus
from .metrics import (
    adjusted_jaccard,
    exact_expected_intersection,
    expected_intersection,
)
from .questionnaire import (
    MCQF,
    YNQF,
    batch_to_manifest,
    load_batch,
    mcqf_questions,
    sample_questions,
    save_batch,
    ynqf_universe,
)
from .resources import demo_corpus_path
from .rng import SplitMix64
from .survey import load_run, make_informant, run_survey, save_run

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PARTIAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(message)


# Keys accepted in a --config file (flat "key = value" lines, # comments).
CONFIG_KEYS = {
    "informant": str,
    "model": str,
    "base_url": str,
    "api_key_env": str,
    "flip_rate": float,
    "seed": int,
    "max_in_flight": int,
    "retry_budget": int,
    "timeout": float,
}


def load_config(path) -> dict:
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, raw = line.partition("=")
            if not sep:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip()
            raw = raw.strip()
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            if len(raw) >= 2 and raw[0] == raw[-1] and raw[0] in "\"'":
                raw = raw[1:-1]
            try:
                values[key] = CONFIG_KEYS[key](raw)
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return values


_SELECTOR_ALIASES = {
    "f1": "metric",
    "jadj": "metric",
    "j_adj": "metric",
    "delta_f1": "delta",
    "delta_jadj": "delta",
    "gdp": "gdp_usd",
}


def _selector(name: str) -> str:
    name = name.strip().lower()
    return _SELECTOR_ALIASES.get(name, name)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    corpus = ingest_tsv(args.tsv)
    save_corpus(corpus, args.corpus_out)
    report = validate_corpus(corpus)
    print(f"ingested {report.item_count} items, {report.variant_total} variants -> {args.corpus_out}")
    return EXIT_OK


def cmd_gen(args) -> int:
    corpus = load_corpus(args.corpus)
    if args.format == YNQF:
        universe = ynqf_universe(corpus)
        size = len(universe) if args.sample is None else args.sample
        batch = sample_questions(universe, size, args.seed, format=YNQF)
        print(f"ynqf universe: {len(universe)} questions; batch: {len(batch.questions)}")
    else:
        batch = mcqf_questions(corpus, args.seed)
        if args.sample is not None:
            batch = sample_questions(batch.questions, args.sample, args.seed, format=MCQF)
        print(f"mcqf batch: {len(batch.questions)} questions")
    out = _out_dir(args)
    path = out / f"batch_{args.format}.json"
    save_batch(batch, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_survey(args) -> int:
    config = load_config(args.config) if args.config else {}

    def setting(name, default):
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        return config.get(name, default)

    kind = setting("informant", None)
    if not kind:
        raise UsageError("an informant kind is required (--informant or config file)")
    corpus = load_corpus(args.corpus)
    batch = load_batch(args.batch)
    seed = setting("seed", batch.seed)
    try:
        informant = make_informant(
            kind,
            corpus,
            flip_rate=setting("flip_rate", 0.1),
            seed=seed,
            model=setting("model", None),
            base_url=setting("base_url", None),
            api_key_env=setting("api_key_env", "LEXVAR_API_KEY"),
            timeout=setting("timeout", 60.0),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    snapshot = {
        "corpus": str(args.corpus),
        "batch": str(args.batch),
        "informant": kind,
        "seed": seed,
        "max_in_flight": setting("max_in_flight", 4),
        "retry_budget": setting("retry_budget", 2),
        "timeout": setting("timeout", 60.0),
        "out": str(args.out),
    }
    run = run_survey(
        informant,
        batch,
        corpus,
        seed=seed,
        max_in_flight=snapshot["max_in_flight"],
        retry_budget=snapshot["retry_budget"],
        config=snapshot,
    )
    out = _out_dir(args)
    path = out / f"run_{kind}.json"
    save_run(run, path, batch_path=str(args.batch))
    failures = run.failure_count
    print(f"wrote {path}: {run.question_count} questions, {failures} failed")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_eval(args) -> int:
    corpus = load_corpus(args.corpus)
    batch = load_batch(args.batch) if args.batch else None
    run = load_run(args.run, batch=batch)
    results = evaluate_run(run, corpus)
    out = _out_dir(args)
    scores_path = out / "scores.jsonl"
    write_score_records(score_records(run, corpus), scores_path)
    table_path = out / "country_table.tsv"
    write_country_table(results, table_path)
    answered = sum(r.n_a for r in results)
    issued = sum(r.n_q for r in results)
    print(f"scored {answered}/{issued} valid answers across {len(results)} countries")
    print(f"wrote {scores_path} and {table_path}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    results = read_country_table(args.table)
    other = read_country_table(args.y_table) if args.y_table else None
    covariates = load_covariates(args.covariates) if args.covariates else None
    x = _selector(args.x)
    y = _selector(args.y)
    correlation = correlate(
        results, x, y, other=other, covariates=covariates, exact_p=args.exact_p
    )
    payload = correlation.to_dict()
    print(
        f"spearman {x} vs {y}: rho={correlation.rho:.4f} "
        f"p={correlation.p_value:.4f} n={correlation.n}"
    )
    if args.out:
        out = _out_dir(args)
        path = out / f"correlation_{x}_vs_{y}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        print(f"wrote {path}")
    else:
        json.dump(payload, sys.stdout, ensure_ascii=False, indent=2)
        print()
    return EXIT_OK


def cmd_report(args) -> int:
    results = read_country_table(args.table)
    if not results:
        raise CorpusError(f"{args.table}: empty country table")
    other = read_country_table(args.y_table) if args.y_table else None
    covariates = load_covariates(args.covariates) if args.covariates else None
    correlations = []
    if all(r.baseline is not None for r in results):
        correlations.append(correlate(results, "metric", "baseline"))
    if other is not None and all(r.delta is not None for r in results):
        correlations.append(correlate(results, "delta", "metric", other=other))
    if covariates is not None:
        for column in ("tokens", "gdp_usd"):
            if sum(1 for row in covariates.values() if row.get(column) is not None) >= 3:
                correlations.append(correlate(results, "metric", column, covariates=covariates))
    written = emit_report(results, aggregate_area(results), correlations, args.out)
    if other is not None:
        path = Path(args.out) / "area_table_y.tsv"
        write_area_table(aggregate_area(other), path)
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _selftest_checks(corpus):
    """Yield (name, passed, detail) for each bundled-fixture check."""
    report = validate_corpus(corpus)
    yield "corpus-valid", report.ok, f"{report.item_count} items, {len(report.issues)} violations"

    universe = ynqf_universe(corpus)
    batch = sample_questions(universe, len(universe), seed=11, format=YNQF)
    oracle = make_informant("oracle", corpus)
    results = evaluate_run(run_survey(oracle, batch, corpus), corpus)
    ok = len(results) == 21 and all(r.metric == 1.0 and r.n_a == r.n_q for r in results)
    yield "oracle-ynqf-perfect", ok, f"{len(results)} countries"

    mc_batch = mcqf_questions(corpus, seed=11)
    mc_results = evaluate_run(run_survey(oracle, mc_batch, corpus), corpus)
    ok = len(mc_results) == 21 and all(r.metric == 1.0 for r in mc_results)
    yield "oracle-mcqf-perfect", ok, f"{len(mc_results)} countries"

    yes_results = evaluate_run(run_survey(make_informant("baseline-yes"), batch, corpus), corpus)
    worst = 0.0
    for r in yes_results:
        positives = sum(
            len(corpus.gold_set(item.index, r.country)) for item in corpus.items
        )
        expected = 2 * positives / (r.n_q + positives) if positives else 0.0
        worst = max(worst, abs(r.metric - expected))
    yield "baseline-yes-closed-form", worst <= 1e-9, f"max deviation {worst:.2e}"

    worst = 0.0
    for n in range(1, 7):
        for s in range(1, n + 1):
            for t in range(1, n + 1):
                worst = max(
                    worst,
                    abs(expected_intersection(n, s, t) - exact_expected_intersection(n, s, t)),
                )
    yield "null-model-oracle", worst <= 1e-12, f"max gap {worst:.2e}"

    rng = SplitMix64(7)
    bounds_ok = True
    for _ in range(200):
        size = rng.randbelow(8) + 2
        a = frozenset(rng.sample(range(size), rng.randbelow(size) + 1))
        b = frozenset(rng.sample(range(size), rng.randbelow(size) + 1))
        value = adjusted_jaccard(a, b, size)
        if not 0.0 <= value <= 1.0 or adjusted_jaccard(a, a, size) != 1.0:
            bounds_ok = False
            break
    yield "adjusted-jaccard-bounds", bounds_ok, "200 random instances"

    again = sample_questions(universe, len(universe), seed=11, format=YNQF)
    same = json.dumps(batch_to_manifest(batch)) == json.dumps(batch_to_manifest(again))
    yield "generation-deterministic", same, "seed 11 reproduced"


def cmd_selftest(args) -> int:
    try:
        corpus = load_corpus(args.corpus or demo_corpus_path())
    except (CorpusError, OSError) as exc:
        print(f"FAIL corpus-load: {exc}")
        return EXIT_DATA
    failures = 0
    for name, passed, detail in _selftest_checks(corpus):
        status = "PASS" if passed else "FAIL"
        failures += 0 if passed else 1
        print(f"{status} {name} ({detail})")
    if failures:
        print(f"{failures} check(s) failed")
        return EXIT_PARTIAL
    print("all checks passed")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="lexvar", description=__doc__)
    parser.add_argument("--version", action="version", version=f"lexvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert a +/- TSV annotation matrix to corpus JSON")
    p.add_argument("tsv", help="input TSV (index, description, english, variant, country, label)")
    p.add_argument("corpus_out", help="output corpus JSON path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("gen", help="generate a question batch manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", required=True, choices=[YNQF, MCQF])
    p.add_argument("--sample", type=int, default=None, help="sample size (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("survey", help="run a batch against an informant")
    p.add_argument("--batch", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument(
        "--informant",
        choices=["baseline-yes", "baseline-first3", "oracle", "noisy-oracle", "remote-llm"],
    )
    p.add_argument("--flip-rate", dest="flip_rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--base-url", dest="base_url", default=None)
    p.add_argument("--api-key-env", dest="api_key_env", default=None)
    p.add_argument("--max-in-flight", dest="max_in_flight", type=int, default=None)
    p.add_argument("--retry-budget", dest="retry_budget", type=int, default=None)
    p.add_argument("--timeout", type=float, default=None)
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("eval", help="score a survey run against the corpus")
    p.add_argument("--run", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--batch", default=None, help="override the batch path recorded in the run")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="Spearman correlation between country columns")
    p.add_argument("--table", required=True, help="country table TSV")
    p.add_argument("--y-table", dest="y_table", default=None, help="table supplying the y column")
    p.add_argument("--covariates", default=None, help="covariate TSV (country_code, tokens, gdp_usd)")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--exact-p", dest="exact_p", action="store_true", help="exact permutation p (n <= 10)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="emit country/area tables, correlations, scatter data")
    p.add_argument("--table", required=True)
    p.add_argument("--y-table", dest="y_table", default=None)
    p.add_argument("--covariates", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the bundled fixture pipeline checks")
    p.add_argument("--corpus", default=None, help="override the bundled fixture corpus")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
