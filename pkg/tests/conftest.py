from pathlib import Path

import pytest

from lexvar.corpus import corpus_from_records, load_corpus
from lexvar.resources import demo_corpus_path

DATA_DIR = Path(__file__).parent / "data"


def make_item(index, variants, gold=None, description="descripción de prueba", english="TEST"):
    """Compact item-record builder for fixture corpora."""
    return {
        "index": index,
        "description": description,
        "english": english,
        "variants": list(variants),
        "gold": {code: list(vs) for code, vs in (gold or {}).items()},
    }


CAR_ITEM = make_item(
    "A141",
    ["auto", "automóvil", "carro", "coche", "concho", "máquina"],
    gold={
        "ES": ["coche"],
        "GQ": ["auto", "coche"],
        "DO": ["automóvil", "carro", "concho"],
        "MX": ["auto", "automóvil", "carro", "coche"],
        "VE": ["automóvil", "carro"],
        "PE": ["auto", "automóvil", "carro"],
        "CL": ["carro", "coche"],
        "AR": ["auto", "automóvil", "coche"],
    },
    description="vehículo destinado al transporte de personas",
    english="CAR",
)


@pytest.fixture(scope="session")
def demo_corpus():
    return load_corpus(demo_corpus_path())


@pytest.fixture
def car_corpus():
    return corpus_from_records([CAR_ITEM])


@pytest.fixture
def data_dir():
    return DATA_DIR
