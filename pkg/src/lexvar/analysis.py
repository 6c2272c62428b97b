"""Aggregate scores into country and area tables and run rank correlations.

Country-level results always carry a baseline column that is re-computed by
running the corresponding baseline informant on the exact batch under
analysis, never copied from published figures.  Area results are unweighted
means over member countries.  Correlations are Spearman rank correlations
with average ranks for ties and a two-sided t-approximation p-value.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path

import numpy as np
from scipy import stats as _scipy_stats

from .corpus import Corpus
from .countries import AREA_OF, AREAS, COUNTRY_CODES, canonical_sort, check_country
from .metrics import adjusted_jaccard, f1_binary, jaccard
from .questionnaire import YNQF, MCQuestion, YNQuestion
from .survey import SurveyRun, make_informant, parse_response, run_survey


@dataclass
class CountryResult:
    country: str
    n_q: int | None
    n_a: int | None
    metric: float
    baseline: float | None = None
    delta: float | None = None


@dataclass
class AreaResult:
    area: str
    mean_metric: float
    mean_delta: float | None = None


@dataclass
class CorrelationResult:
    x: str
    y: str
    n: int
    rho: float
    p_value: float
    pairs: list[tuple[str, float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "n": self.n,
            "rho": self.rho,
            "p": self.p_value,
            "pairs": [{"country": c, "x": xv, "y": yv} for c, xv, yv in self.pairs],
        }


def _check_mcq_options(question: MCQuestion, corpus: Corpus) -> None:
    item = corpus.item(question.item)
    if sorted(question.options) != sorted(item.variants):
        raise ValueError(
            f"question {question.id}: options are not a permutation of "
            f"item {question.item}'s variants; batch/corpus mismatch"
        )


def _scored_answers(run: SurveyRun, corpus: Corpus):
    """Yield (question, record, parsed-or-None) in batch presentation order."""
    for question in run.batch.questions:
        record = run.responses[question.id]
        if isinstance(question, YNQuestion):
            if question.variant not in corpus.item(question.item).variants:
                raise ValueError(
                    f"question {question.id}: variant {question.variant!r} not in "
                    f"item {question.item}; batch/corpus mismatch"
                )
        else:
            _check_mcq_options(question, corpus)
        parsed = None if record.failed else parse_response(record.raw, question)
        yield question, record, parsed


def _country_metric(format: str, scored: list, corpus: Corpus) -> tuple[int, float]:
    """Return (valid count, metric) for one country's scored answers."""
    if format == YNQF:
        gold_flags, pred_flags = [], []
        for question, parsed in scored:
            if parsed is None or not parsed.valid:
                continue
            gold = corpus.gold_set(question.item, question.country)
            gold_flags.append(question.variant in gold)
            pred_flags.append(parsed.is_yes)
        if not gold_flags:
            return 0, 0.0
        return len(gold_flags), f1_binary(gold_flags, pred_flags)
    values = []
    for question, parsed in scored:
        if parsed is None or not parsed.valid:
            continue
        gold = corpus.gold_set(question.item, question.country)
        predicted = frozenset(question.options[i - 1] for i in parsed.selection)
        values.append(adjusted_jaccard(gold, predicted, len(question.options)))
    if not values:
        return 0, 0.0
    return len(values), sum(values) / len(values)


def evaluate_run(run: SurveyRun, corpus: Corpus) -> list[CountryResult]:
    """Score a run per country, with the matching baseline on the same batch.

    Yes/no runs are scored with binary F1, multiple-choice runs with the mean
    adjusted Jaccard; failed or invalid responses are excluded from the
    answered count.  Countries with no questions in the batch are omitted.
    """
    fmt = run.batch.format
    baseline_kind = "baseline-yes" if fmt == YNQF else "baseline-first3"
    baseline_run = run_survey(make_informant(baseline_kind), run.batch, corpus)

    by_country: dict[str, list] = {}
    for question, record, parsed in _scored_answers(run, corpus):
        by_country.setdefault(question.country, []).append((question, parsed))
    baseline_by_country: dict[str, list] = {}
    for question, record, parsed in _scored_answers(baseline_run, corpus):
        baseline_by_country.setdefault(question.country, []).append((question, parsed))

    results = []
    for country in canonical_sort(by_country):
        scored = by_country[country]
        n_a, metric = _country_metric(fmt, scored, corpus)
        _, baseline = _country_metric(fmt, baseline_by_country[country], corpus)
        results.append(
            CountryResult(
                country=country,
                n_q=len(scored),
                n_a=n_a,
                metric=metric,
                baseline=baseline,
                delta=metric - baseline,
            )
        )
    return results


def score_records(run: SurveyRun, corpus: Corpus) -> list[dict]:
    """Per-question score rows for the evaluation JSONL file.

    Yes/no rows record agreement with gold (1.0/0.0); multiple-choice rows
    record the plain and adjusted Jaccard.  Failed and invalid responses are
    skipped; they are visible in the country table's answered counts.
    """
    rows = []
    for question, record, parsed in _scored_answers(run, corpus):
        if parsed is None or not parsed.valid:
            continue
        gold = corpus.gold_set(question.item, question.country)
        if isinstance(question, YNQuestion):
            agree = parsed.is_yes == (question.variant in gold)
            rows.append(
                {
                    "id": question.id,
                    "country": question.country,
                    "item": question.item,
                    "metric": "f1",
                    "raw": 1.0 if agree else 0.0,
                    "adjusted": None,
                }
            )
        else:
            predicted = frozenset(question.options[i - 1] for i in parsed.selection)
            rows.append(
                {
                    "id": question.id,
                    "country": question.country,
                    "item": question.item,
                    "metric": "adjusted_jaccard",
                    "raw": jaccard(gold, predicted),
                    "adjusted": adjusted_jaccard(gold, predicted, len(question.options)),
                }
            )
    return rows


def write_score_records(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def aggregate_area(results: list[CountryResult]) -> list[AreaResult]:
    """Unweighted mean of the country metric (and delta) per dialectal area."""
    by_area: dict[str, list[CountryResult]] = {}
    for result in results:
        by_area.setdefault(AREA_OF[check_country(result.country)], []).append(result)
    areas = []
    for area in AREAS:
        members = by_area.get(area)
        if not members:
            continue
        mean_metric = sum(r.metric for r in members) / len(members)
        deltas = [r.delta for r in members]
        mean_delta = sum(deltas) / len(deltas) if all(d is not None for d in deltas) else None
        areas.append(AreaResult(area=area, mean_metric=mean_metric, mean_delta=mean_delta))
    return areas


def _average_ranks(values) -> np.ndarray:
    return _scipy_stats.rankdata(values, method="average")


def spearman(xs, ys, *, exact_p: bool = False) -> tuple[float, float]:
    """Spearman rank correlation with a two-sided p-value.

    Ranks use the average-rank convention for ties; rho is the Pearson
    correlation of the rank vectors.  The p-value uses the t-approximation
    t = rho * sqrt((n-2) / (1-rho^2)) with n-2 degrees of freedom, with
    p = 0 at rho = +-1.  ``exact_p`` switches to the exact permutation
    distribution, supported for n <= 10.
    """
    xs = list(xs)
    ys = list(ys)
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 3:
        raise ValueError(f"need at least 3 pairs, got {n}")
    rank_x = _average_ranks(xs)
    rank_y = _average_ranks(ys)
    if np.ptp(rank_x) == 0 or np.ptp(rank_y) == 0:
        raise ValueError("zero variance in one of the inputs")
    rho = float(np.corrcoef(rank_x, rank_y)[0, 1])
    rho = max(-1.0, min(1.0, rho))
    if 1.0 - rho * rho < 1e-15:
        rho = math.copysign(1.0, rho)
    if exact_p:
        return rho, _permutation_p(rank_x, rank_y, rho)
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
    p = 2.0 * float(_scipy_stats.t.sf(abs(t), n - 2))
    return rho, p


_PERMUTATION_LIMIT = 10


def _permutation_p(rank_x: np.ndarray, rank_y: np.ndarray, rho_obs: float) -> float:
    """Exact two-sided permutation p: share of y-rank permutations with
    |rho| >= |rho observed|."""
    n = len(rank_x)
    if n > _PERMUTATION_LIMIT:
        raise ValueError(f"exact permutation p supported for n <= {_PERMUTATION_LIMIT}")
    cx = rank_x - rank_x.mean()
    cy = rank_y - rank_y.mean()
    denom = math.sqrt(float(cx @ cx) * float(cy @ cy))
    threshold = abs(rho_obs) - 1e-12
    hits = 0
    total = 0
    chunk: list = []

    def flush(chunk_rows) -> int:
        block = np.asarray(chunk_rows)
        rhos = (block @ cx) / denom
        return int(np.count_nonzero(np.abs(rhos) >= threshold))

    for perm in permutations(cy):
        chunk.append(perm)
        total += 1
        if len(chunk) == 50000:
            hits += flush(chunk)
            chunk = []
    if chunk:
        hits += flush(chunk)
    return hits / total


_RESULT_FIELDS = ("metric", "baseline", "delta", "n_q", "n_a")


def _result_column(results: list[CountryResult], selector: str) -> dict[str, float]:
    if selector not in _RESULT_FIELDS:
        raise ValueError(
            f"unknown result field {selector!r}; expected one of {_RESULT_FIELDS}"
        )
    column = {}
    for result in results:
        value = getattr(result, selector)
        if value is not None:
            column[result.country] = float(value)
    return column


def correlate(
    results: list[CountryResult],
    x: str,
    y: str,
    *,
    other: list[CountryResult] | None = None,
    covariates: dict[str, dict[str, float | None]] | None = None,
    exact_p: bool = False,
) -> CorrelationResult:
    """Pairwise-complete Spearman between two per-country columns.

    ``x`` is read from ``results``.  ``y`` is read from ``other`` when given,
    from the covariate table when it names a covariate column, and from
    ``results`` otherwise.  Countries missing either value are dropped; the
    country/value pairs actually used are returned for scatter emission.
    """
    col_x = _result_column(results, x)
    if other is not None:
        col_y = _result_column(other, y)
    elif covariates is not None and y not in _RESULT_FIELDS:
        col_y = {
            country: row[y]
            for country, row in covariates.items()
            if row.get(y) is not None
        }
    else:
        col_y = _result_column(results, y)
    common = canonical_sort(set(col_x) & set(col_y))
    if len(common) < 3:
        raise ValueError(
            f"insufficient overlap between {x!r} and {y!r}: {len(common)} countries"
        )
    xs = [col_x[c] for c in common]
    ys = [col_y[c] for c in common]
    rho, p = spearman(xs, ys, exact_p=exact_p)
    pairs = list(zip(common, xs, ys))
    return CorrelationResult(x=x, y=y, n=len(common), rho=rho, p_value=p, pairs=pairs)


# ---------------------------------------------------------------------------
# Table and report I/O


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_country_table(results: list[CountryResult], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["country", "n_q", "n_a", "metric", "baseline", "delta"])
        for r in results:
            writer.writerow(
                [r.country]
                + [_format_cell(v) for v in (r.n_q, r.n_a, r.metric, r.baseline, r.delta)]
            )


def read_country_table(path) -> list[CountryResult]:
    """Read a country table TSV; only country and metric columns are required."""
    results = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or not {"country", "metric"}.issubset(reader.fieldnames):
            raise ValueError(f"{path}: country table needs 'country' and 'metric' columns")
        for row in reader:
            def _opt_float(key):
                value = row.get(key, "")
                return float(value) if value not in (None, "") else None

            def _opt_int(key):
                value = row.get(key, "")
                return int(value) if value not in (None, "") else None

            results.append(
                CountryResult(
                    country=check_country(row["country"]),
                    n_q=_opt_int("n_q"),
                    n_a=_opt_int("n_a"),
                    metric=float(row["metric"]),
                    baseline=_opt_float("baseline"),
                    delta=_opt_float("delta"),
                )
            )
    return sorted(results, key=lambda r: COUNTRY_CODES.index(r.country))


def write_area_table(areas: list[AreaResult], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(["area", "mean_metric", "mean_delta"])
        for a in areas:
            writer.writerow([a.area, _format_cell(a.mean_metric), _format_cell(a.mean_delta)])


def load_covariates(path) -> dict[str, dict[str, float | None]]:
    """Read a covariate TSV keyed by country_code; empty cells become None."""
    table: dict[str, dict[str, float | None]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or "country_code" not in reader.fieldnames:
            raise ValueError(f"{path}: covariate table needs a 'country_code' column")
        value_columns = [c for c in reader.fieldnames if c != "country_code"]
        for row in reader:
            code = check_country(row["country_code"])
            table[code] = {
                column: float(row[column]) if row.get(column) not in (None, "") else None
                for column in value_columns
            }
    return table


def write_scatter_csv(correlation: CorrelationResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["country", "x", "y", "area"])
        for country, xv, yv in correlation.pairs:
            writer.writerow([country, repr(xv), repr(yv), AREA_OF[country]])


def emit_report(
    results: list[CountryResult],
    areas: list[AreaResult],
    correlations: list[CorrelationResult],
    out_dir,
) -> list[Path]:
    """Write the country table, area table, correlation summary, and one
    scatter CSV per correlation.  Refuses to write anything for empty
    results."""
    if not results:
        raise ValueError("no results to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    country_path = out / "country_table.tsv"
    write_country_table(results, country_path)
    written.append(country_path)
    area_path = out / "area_table.tsv"
    write_area_table(areas, area_path)
    written.append(area_path)
    corr_path = out / "correlations.json"
    with open(corr_path, "w", encoding="utf-8") as fh:
        json.dump([c.to_dict() for c in correlations], fh, ensure_ascii=False, indent=2)
        fh.write("\n")
    written.append(corr_path)
    for correlation in correlations:
        scatter_path = out / f"scatter_{correlation.x}_vs_{correlation.y}.csv"
        write_scatter_csv(correlation, scatter_path)
        written.append(scatter_path)
    return written
