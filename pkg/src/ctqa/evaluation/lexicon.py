"""Abnormality category lexicon for clinical-efficacy scoring.

The default list covers the 18 chest-CT abnormality categories commonly used
for multi-label report evaluation. It is an approximation assembled for this
engine, not a published ground truth, and any evaluation that matters should
load a reviewed lexicon file (JSON ``{category: [aliases]}``) instead.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigInvalidError


def _normalize(alias: str) -> str:
    return re.sub(r"[^a-z0-9]+", " ", alias.lower()).strip()


@dataclass(frozen=True)
class AbnormalityLexicon:
    categories: tuple[tuple[str, tuple[str, ...]], ...]

    def __post_init__(self):
        seen = set()
        for category, aliases in self.categories:
            if category in seen:
                raise ConfigInvalidError(f"duplicate lexicon category {category!r}")
            seen.add(category)
            if not aliases:
                raise ConfigInvalidError(f"category {category!r} has no aliases")
            for alias in aliases:
                if not alias or alias != _normalize(alias):
                    raise ConfigInvalidError(
                        f"alias {alias!r} in {category!r} must be normalized lowercase"
                    )

    @property
    def category_ids(self) -> list[str]:
        return [category for category, _ in self.categories]

    @classmethod
    def from_dict(cls, data: dict[str, list[str]]) -> "AbnormalityLexicon":
        return cls(
            categories=tuple(
                (category, tuple(_normalize(a) for a in aliases))
                for category, aliases in data.items()
            )
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "AbnormalityLexicon":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalidError(f"cannot read lexicon {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalidError(f"lexicon {path} must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, list[str]]:
        return {category: list(aliases) for category, aliases in self.categories}


DEFAULT_CATEGORIES: dict[str, list[str]] = {
    "medical_material": ["medical material", "surgical material", "catheter", "stent", "sternotomy"],
    "arterial_wall_calcification": [
        "arterial wall calcification",
        "arterial calcification",
        "aortic calcification",
        "atherosclerotic",
        "atherosclerosis",
    ],
    "cardiomegaly": ["cardiomegaly", "enlarged heart", "cardiac enlargement", "heart size increased"],
    "pericardial_effusion": ["pericardial effusion", "pericardial fluid", "fluid around the heart"],
    "coronary_artery_wall_calcification": [
        "coronary artery wall calcification",
        "coronary artery calcification",
        "coronary calcification",
    ],
    "hiatal_hernia": ["hiatal hernia", "hiatus hernia"],
    "lymphadenopathy": [
        "lymphadenopathy",
        "enlarged lymph node",
        "enlarged lymph nodes",
        "lymph node enlargement",
    ],
    "emphysema": ["emphysema", "emphysematous"],
    "atelectasis": ["atelectasis", "atelectatic"],
    "lung_nodule": ["lung nodule", "pulmonary nodule", "nodule", "nodular lesion"],
    "lung_opacity": [
        "lung opacity",
        "pulmonary opacity",
        "ground glass opacity",
        "ground glass opacities",
        "ground glass densities",
    ],
    "pulmonary_fibrotic_sequela": [
        "pulmonary fibrotic sequela",
        "fibrotic sequela",
        "fibrotic changes",
        "fibrosis",
    ],
    "pleural_effusion": ["pleural effusion", "pleural fluid"],
    "mosaic_attenuation_pattern": ["mosaic attenuation", "mosaic perfusion"],
    "peribronchial_thickening": ["peribronchial thickening", "peribronchial wall thickening", "bronchial wall thickening"],
    "consolidation": ["consolidation", "consolidative"],
    "bronchiectasis": ["bronchiectasis", "bronchiectatic"],
    "interlobular_septal_thickening": ["interlobular septal thickening", "septal thickening"],
}


def default_lexicon() -> AbnormalityLexicon:
    return AbnormalityLexicon.from_dict(DEFAULT_CATEGORIES)
