"""Accessors for data files shipped with the package.

The demo corpus is synthetic fixture data (a handful of items in the real
annotation format, with invented gold entries besides the well-known "car"
item) used by the self-test pipeline and the test suite.  It is not survey
evidence about any variety.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .corpus import Corpus, corpus_from_records


def _data_file(name: str) -> Path:
    return Path(str(resources.files("lexvar").joinpath("data", name)))


def demo_corpus_path() -> Path:
    return _data_file("demo_corpus.json")


def covariates_template_path() -> Path:
    return _data_file("covariates_template.tsv")


def demo_corpus() -> Corpus:
    payload = json.loads(demo_corpus_path().read_text(encoding="utf-8"))
    return corpus_from_records(payload["items"])
