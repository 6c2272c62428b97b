"""The 21 Spanish-speaking survey countries and their 8 dialectal areas.

Countries are identified by ISO 3166-1 alpha-2 codes everywhere in the
harness; Puerto Rico is carried as a country in its own right ("PR") for
uniformity with the annotation scheme.  ``SPANISH_NAMES`` holds the display
names substituted into Spanish prompt templates.
"""

from __future__ import annotations

# Canonical ordering used for question generation and report rows.
COUNTRY_CODES: tuple[str, ...] = (
    "ES",  # Spain
    "GQ",  # Equatorial Guinea
    "CU",  # Cuba
    "DO",  # Dominican Republic
    "PR",  # Puerto Rico
    "MX",  # Mexico
    "GT",  # Guatemala
    "HN",  # Honduras
    "SV",  # El Salvador
    "NI",  # Nicaragua
    "CR",  # Costa Rica
    "PA",  # Panama
    "CO",  # Colombia
    "VE",  # Venezuela
    "EC",  # Ecuador
    "PE",  # Peru
    "BO",  # Bolivia
    "CL",  # Chile
    "PY",  # Paraguay
    "UY",  # Uruguay
    "AR",  # Argentina
)

ENGLISH_NAMES: dict[str, str] = {
    "ES": "Spain",
    "GQ": "Equatorial Guinea",
    "CU": "Cuba",
    "DO": "Dominican Republic",
    "PR": "Puerto Rico",
    "MX": "Mexico",
    "GT": "Guatemala",
    "HN": "Honduras",
    "SV": "El Salvador",
    "NI": "Nicaragua",
    "CR": "Costa Rica",
    "PA": "Panama",
    "CO": "Colombia",
    "VE": "Venezuela",
    "EC": "Ecuador",
    "PE": "Peru",
    "BO": "Bolivia",
    "CL": "Chile",
    "PY": "Paraguay",
    "UY": "Uruguay",
    "AR": "Argentina",
}

SPANISH_NAMES: dict[str, str] = {
    "ES": "España",
    "GQ": "Guinea Ecuatorial",
    "CU": "Cuba",
    "DO": "República Dominicana",
    "PR": "Puerto Rico",
    "MX": "México",
    "GT": "Guatemala",
    "HN": "Honduras",
    "SV": "El Salvador",
    "NI": "Nicaragua",
    "CR": "Costa Rica",
    "PA": "Panamá",
    "CO": "Colombia",
    "VE": "Venezuela",
    "EC": "Ecuador",
    "PE": "Perú",
    "BO": "Bolivia",
    "CL": "Chile",
    "PY": "Paraguay",
    "UY": "Uruguay",
    "AR": "Argentina",
}

# The 8 dialectal areas partition the 21 countries.
AREAS: dict[str, tuple[str, ...]] = {
    "Spain": ("ES",),
    "Equatorial Guinea": ("GQ",),
    "Antilles": ("CU", "DO", "PR"),
    "Mexico & Central America": ("MX", "GT", "HN", "SV", "NI"),
    "Continental Caribe": ("CR", "PA", "VE"),
    "Andes": ("CO", "EC", "PE", "BO"),
    "Chile": ("CL",),
    "La Plata River": ("AR", "UY", "PY"),
}

AREA_OF: dict[str, str] = {
    code: area for area, members in AREAS.items() for code in members
}

_ORDER_INDEX = {code: i for i, code in enumerate(COUNTRY_CODES)}


def is_country(code: str) -> bool:
    return code in _ORDER_INDEX


def check_country(code: str) -> str:
    """Return the code unchanged, raising ValueError for unknown codes."""
    if code not in _ORDER_INDEX:
        raise ValueError(f"unknown country code: {code!r}")
    return code


def canonical_sort(codes) -> list[str]:
    """Sort country codes into the canonical survey order."""
    return sorted(codes, key=_ORDER_INDEX.__getitem__)
