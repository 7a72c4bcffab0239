"""The closed ten-region chest anatomy taxonomy and name normalization.

Every routing decision in the engine goes through this enumeration; free-form
strings coming from prompts or user input must pass ``canonicalize_region``
before touching adapters, the query hub, or traces.
"""
from __future__ import annotations

import enum
import re

from .errors import UnknownRegionError


class RegionId(enum.Enum):
    TRACHEA_BRONCHI = "trachea_bronchi"
    THYROID = "thyroid"
    LUNG = "lung"
    HEART = "heart"
    MEDIASTINUM = "mediastinum"
    PLEURA = "pleura"
    ESOPHAGUS = "esophagus"
    ABDOMEN = "abdomen"
    BONE = "bone"
    BREAST = "breast"

    def __str__(self) -> str:
        return self.value


# Fixed report order: findings are always emitted in this sequence.
REPORT_ORDER: tuple[RegionId, ...] = (
    RegionId.TRACHEA_BRONCHI,
    RegionId.THYROID,
    RegionId.LUNG,
    RegionId.HEART,
    RegionId.MEDIASTINUM,
    RegionId.PLEURA,
    RegionId.ESOPHAGUS,
    RegionId.ABDOMEN,
    RegionId.BONE,
    RegionId.BREAST,
)

DISPLAY_NAMES: dict[RegionId, str] = {
    RegionId.TRACHEA_BRONCHI: "Trachea and Bronchi",
    RegionId.THYROID: "Thyroid",
    RegionId.LUNG: "Lung",
    RegionId.HEART: "Heart",
    RegionId.MEDIASTINUM: "Mediastinum",
    RegionId.PLEURA: "Pleura",
    RegionId.ESOPHAGUS: "Esophagus",
    RegionId.ABDOMEN: "Abdomen",
    RegionId.BONE: "Bone",
    RegionId.BREAST: "Breast",
}

_EXTRA_ALIASES: dict[str, RegionId] = {
    "trachea bronchi": RegionId.TRACHEA_BRONCHI,
    "trachea": RegionId.TRACHEA_BRONCHI,
    "bronchi": RegionId.TRACHEA_BRONCHI,
    "trachea and both main bronchi": RegionId.TRACHEA_BRONCHI,
    "lungs": RegionId.LUNG,
    "pulmonary": RegionId.LUNG,
    "cardiac": RegionId.HEART,
    "pericardium": RegionId.HEART,
    "pleural": RegionId.PLEURA,
    "mediastinal": RegionId.MEDIASTINUM,
    "esophageal": RegionId.ESOPHAGUS,
    "oesophagus": RegionId.ESOPHAGUS,
    "abdominal": RegionId.ABDOMEN,
    "upper abdomen": RegionId.ABDOMEN,
    "liver": RegionId.ABDOMEN,
    "bones": RegionId.BONE,
    "bone structures": RegionId.BONE,
    "skeletal": RegionId.BONE,
    "vertebrae": RegionId.BONE,
    "breasts": RegionId.BREAST,
    "thyroid gland": RegionId.THYROID,
}


def _normalize(raw: str) -> str:
    return re.sub(r"[^a-z0-9]+", " ", raw.lower()).strip()


def _build_alias_table() -> dict[str, RegionId]:
    table: dict[str, RegionId] = {}
    for region in RegionId:
        table[_normalize(region.value)] = region
        table[_normalize(DISPLAY_NAMES[region])] = region
    for alias, region in _EXTRA_ALIASES.items():
        table[_normalize(alias)] = region
    return table


_ALIASES = _build_alias_table()


def canonicalize_region(raw: str) -> RegionId:
    """Map a display name or free-form region string to the closed enum.

    Matching is case- and punctuation-insensitive ("Trachea and Bronchi",
    "HEART.", "trachea & bronchi" all resolve). Raises UnknownRegionError for
    anything outside the ten-region taxonomy.
    """
    key = _normalize(raw)
    try:
        return _ALIASES[key]
    except KeyError:
        raise UnknownRegionError(f"not a recognized anatomical region: {raw!r}") from None


def display_name(region: RegionId) -> str:
    return DISPLAY_NAMES[region]


def spoken_name(region: RegionId) -> str:
    """Lowercase form used inside question sentences ("trachea and bronchi")."""
    return DISPLAY_NAMES[region].lower()


def find_regions_in_text(text: str) -> list[RegionId]:
    """Regions mentioned in free text, ordered by first occurrence.

    Used by the deterministic planner mock; real backends do their own
    extraction. Longest aliases are tried first so "trachea and bronchi"
    wins over the bare "trachea".
    """
    normalized = " " + _normalize(text) + " "
    hits: dict[RegionId, int] = {}
    for alias, region in sorted(_ALIASES.items(), key=lambda kv: -len(kv[0])):
        pos = normalized.find(" " + alias + " ")
        if pos >= 0 and (region not in hits or pos < hits[region]):
            hits[region] = pos
    return [region for region, _ in sorted(hits.items(), key=lambda kv: kv[1])]
