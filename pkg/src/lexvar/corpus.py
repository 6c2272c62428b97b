"""Load, validate, and query the lexical-variation corpus.

A corpus is a list of lexical items, each carrying an ordered variant list
and per-country gold annotations: the set of variants judged to be in
predominant use in that country.  The on-disk format is UTF-8 JSON:

    {"items": [
        {"index": "A141",
         "description": "vehículo destinado al transporte de personas",
         "english": "CAR",
         "variants": ["auto", "automóvil", "carro", "coche", "concho", "máquina"],
         "gold": {"ES": ["coche"], "AR": ["auto", "automóvil", "coche"]},
         "meta": {...}}          # optional, opaque, preserved verbatim
    ]}

All strings are NFC-normalized at load time so that Spanish diacritics
written with combining characters cannot masquerade as distinct variants.
A country missing from an item's ``gold`` map is read as the empty set.
"""

from __future__ import annotations

import csv
import json
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .countries import COUNTRY_CODES, is_country

_EMPTY: frozenset[str] = frozenset()


class CorpusError(ValueError):
    """Raised when a corpus file or object violates the schema or invariants."""


def _nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class LexicalItem:
    """One surveyed concept with its ordered list of lexical variants."""

    index: str
    description: str
    english: str
    variants: tuple[str, ...]
    meta: Mapping[str, Any] | None = None


@dataclass(frozen=True)
class Corpus:
    """Immutable corpus: items plus (item index, country) -> predominant set."""

    items: tuple[LexicalItem, ...]
    gold: Mapping[tuple[str, str], frozenset[str]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "_by_index", {item.index: item for item in self.items})

    def item(self, index: str) -> LexicalItem:
        try:
            return self._by_index[index]
        except KeyError:
            raise CorpusError(f"unknown item index: {index!r}") from None

    def has_item(self, index: str) -> bool:
        return index in self._by_index

    def gold_set(self, index: str, country: str) -> frozenset[str]:
        """Predominant variants for (item, country); empty set when unannotated."""
        self.item(index)
        return self.gold.get((index, country), _EMPTY)

    @property
    def variant_total(self) -> int:
        return sum(len(item.variants) for item in self.items)


def gold_set(corpus: Corpus, index: str, country: str) -> frozenset[str]:
    return corpus.gold_set(index, country)


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    locus: str
    detail: str


@dataclass
class ValidationReport:
    item_count: int
    variant_total: int
    gold_counts: dict[str, int] = field(default_factory=dict)
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def summary(self) -> str:
        lines = [
            f"items: {self.item_count}",
            f"variants: {self.variant_total}",
            "gold entries per country: "
            + ", ".join(f"{c}={n}" for c, n in sorted(self.gold_counts.items())),
            f"violations: {len(self.issues)}",
        ]
        lines.extend(f"  [{i.kind}] {i.locus}: {i.detail}" for i in self.issues)
        return "\n".join(lines)


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Report corpus counts and every invariant violation (violations are data)."""
    report = ValidationReport(
        item_count=len(corpus.items), variant_total=corpus.variant_total
    )
    seen_indices: set[str] = set()
    for item in corpus.items:
        locus = f"item {item.index}"
        if item.index in seen_indices:
            report.issues.append(
                ValidationIssue("duplicate-item-index", locus, "index used by an earlier item")
            )
        seen_indices.add(item.index)
        if not item.variants:
            report.issues.append(
                ValidationIssue("empty-variants", locus, "item has no variants")
            )
        dupes = {v for v in item.variants if item.variants.count(v) > 1}
        for v in sorted(dupes):
            report.issues.append(
                ValidationIssue("duplicate-variant", locus, f"variant {v!r} listed twice")
            )
    for (index, country), variants in corpus.gold.items():
        locus = f"item {index}, country {country}"
        if not corpus.has_item(index):
            report.issues.append(
                ValidationIssue("gold-unknown-item", locus, "gold entry for missing item")
            )
            continue
        if not is_country(country):
            report.issues.append(
                ValidationIssue("gold-unknown-country", locus, f"unknown country code {country!r}")
            )
        report.gold_counts[country] = report.gold_counts.get(country, 0) + 1
        allowed = set(corpus.item(index).variants)
        for v in sorted(set(variants) - allowed):
            report.issues.append(
                ValidationIssue(
                    "gold-unknown-variant", locus, f"gold variant {v!r} not in item's variant list"
                )
            )
    return report


def _require(obj: Mapping[str, Any], key: str, kind: type, locus: str):
    if key not in obj:
        raise CorpusError(f"{locus}: missing field {key!r}")
    value = obj[key]
    if not isinstance(value, kind):
        raise CorpusError(f"{locus}: field {key!r} must be {kind.__name__}")
    return value

_ITEM_KEYS = {"index", "description", "english", "variants", "gold", "meta"}


def _item_from_record(record: Mapping[str, Any], locus: str) -> tuple[LexicalItem, dict]:
    if not isinstance(record, Mapping):
        raise CorpusError(f"{locus}: item record must be an object")
    unknown = set(record) - _ITEM_KEYS
    if unknown:
        raise CorpusError(f"{locus}: unknown field(s) {sorted(unknown)}")
    index = _nfc(_require(record, "index", str, locus))
    locus = f"{locus} (index={index})"
    description = _nfc(_require(record, "description", str, locus))
    english = _nfc(_require(record, "english", str, locus))
    raw_variants = _require(record, "variants", list, locus)
    variants = []
    for v in raw_variants:
        if not isinstance(v, str):
            raise CorpusError(f"{locus}: variants must be strings")
        variants.append(_nfc(v))
    raw_gold = record.get("gold", {})
    if not isinstance(raw_gold, Mapping):
        raise CorpusError(f"{locus}: field 'gold' must be an object")
    gold: dict[str, list[str]] = {}
    for code, listed in raw_gold.items():
        if not is_country(code):
            raise CorpusError(f"{locus}: unknown country code {code!r} in gold")
        if not isinstance(listed, list) or not all(isinstance(v, str) for v in listed):
            raise CorpusError(f"{locus}: gold[{code!r}] must be a list of strings")
        gold[code] = [_nfc(v) for v in listed]
    meta = record.get("meta")
    if meta is not None and not isinstance(meta, Mapping):
        raise CorpusError(f"{locus}: field 'meta' must be an object")
    item = LexicalItem(
        index=index,
        description=description,
        english=english,
        variants=tuple(variants),
        meta=dict(meta) if meta is not None else None,
    )
    return item, gold


def corpus_from_records(records: Iterable[Mapping[str, Any]]) -> Corpus:
    """Build and validate a Corpus from parsed item records."""
    items: list[LexicalItem] = []
    gold: dict[tuple[str, str], frozenset[str]] = {}
    for i, record in enumerate(records):
        item, item_gold = _item_from_record(record, f"items[{i}]")
        items.append(item)
        for code, variants in item_gold.items():
            gold[(item.index, code)] = frozenset(variants)
    corpus = Corpus(items=tuple(items), gold=gold)
    report = validate_corpus(corpus)
    if not report.ok:
        details = "; ".join(f"[{i.kind}] {i.locus}: {i.detail}" for i in report.issues)
        raise CorpusError(f"corpus invariant violations: {details}")
    return corpus


def load_corpus(path) -> Corpus:
    """Load and validate a corpus JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict) or set(payload) != {"items"}:
        raise CorpusError(f"{path}: top level must be an object with exactly one key 'items'")
    if not isinstance(payload["items"], list):
        raise CorpusError(f"{path}: 'items' must be a list")
    return corpus_from_records(payload["items"])


def corpus_to_records(corpus: Corpus) -> list[dict[str, Any]]:
    records = []
    for item in corpus.items:
        gold: dict[str, list[str]] = {}
        for code in COUNTRY_CODES:
            entry = corpus.gold.get((item.index, code))
            if entry is not None:
                # Serialize in the item's variant order for a stable round-trip.
                gold[code] = [v for v in item.variants if v in entry]
        record: dict[str, Any] = {
            "index": item.index,
            "description": item.description,
            "english": item.english,
            "variants": list(item.variants),
            "gold": gold,
        }
        if item.meta is not None:
            record["meta"] = dict(item.meta)
        records.append(record)
    return records


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"items": corpus_to_records(corpus)}, fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def ingest_tsv(path) -> Corpus:
    """Convert a one-row-per-cell TSV annotation matrix into a Corpus.

    Expected header: index, description, english, variant, country, label.
    Each row is one (item, variant, country) cell labeled "+" (predominant)
    or "-" (marginal/absent).  Variant order follows first appearance per
    item; description/english are taken from the first row of each item.
    """
    items: dict[str, dict[str, Any]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        required = {"index", "description", "english", "variant", "country", "label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise CorpusError(
                f"{path}: TSV header must contain {sorted(required)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            if any(row.get(column) is None for column in required):
                raise CorpusError(f"{path}:{lineno}: row has fewer columns than the header")
            index = _nfc(row["index"].strip())
            variant = _nfc(row["variant"].strip())
            country = row["country"].strip()
            label = row["label"].strip()
            if not index or not variant:
                raise CorpusError(f"{path}:{lineno}: empty index or variant")
            if not is_country(country):
                raise CorpusError(f"{path}:{lineno}: unknown country code {country!r}")
            if label not in {"+", "-"}:
                raise CorpusError(f"{path}:{lineno}: label must be '+' or '-', got {label!r}")
            entry = items.setdefault(
                index,
                {
                    "index": index,
                    "description": _nfc(row["description"].strip()),
                    "english": _nfc(row["english"].strip()),
                    "variants": [],
                    "gold": {},
                },
            )
            if variant not in entry["variants"]:
                entry["variants"].append(variant)
            if label == "+":
                entry["gold"].setdefault(country, []).append(variant)
    return corpus_from_records(list(items.values()))
