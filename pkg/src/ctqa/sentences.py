"""Standard clinical sentences used across the engine.

``NORMAL_SENTENCES`` holds one canonical normal-finding sentence per region:
the deterministic region mock answers with these, and the report splitter
fills missing sections with them. ``ANCHOR_SENTENCES`` maps each standard
normal-description sentence to its region so historical report text can be
segmented. Three regions (thyroid, lung, breast) have no sentence in the
standard template set; theirs are written in the same style and marked below.
"""
from __future__ import annotations

from .regions import RegionId

# The standard normal-description sentence set, in report order.
STANDARD_NORMAL_SENTENCES: tuple[str, ...] = (
    "Trachea and both main bronchi are open.",
    "No occlusive pathology was detected in the trachea and both main bronchi.",
    "Heart contour and size are normal.",
    "Pericardial effusion-thickening was not observed.",
    "Thoracic esophagus calibration was normal and no significant wall thickening was detected.",
    "Mediastinal main vascular structures, heart contour, size are normal.",
    "No enlarged lymph nodes in pathological dimensions were detected.",
    "Pleural effusion-thickening was not detected.",
    "No space-occupying lesion was detected in the liver that entered the cross-sectional area.",
    "Bone structures in the study area are natural.",
    "Vertebral corpus heights are preserved.",
)

ANCHOR_SENTENCES: dict[str, RegionId] = {
    "Trachea and both main bronchi are open.": RegionId.TRACHEA_BRONCHI,
    "No occlusive pathology was detected in the trachea and both main bronchi.": RegionId.TRACHEA_BRONCHI,
    "Heart contour and size are normal.": RegionId.HEART,
    "Pericardial effusion-thickening was not observed.": RegionId.HEART,
    "Thoracic esophagus calibration was normal and no significant wall thickening was detected.": RegionId.ESOPHAGUS,
    "Mediastinal main vascular structures, heart contour, size are normal.": RegionId.MEDIASTINUM,
    "No enlarged lymph nodes in pathological dimensions were detected.": RegionId.MEDIASTINUM,
    "Pleural effusion-thickening was not detected.": RegionId.PLEURA,
    "No space-occupying lesion was detected in the liver that entered the cross-sectional area.": RegionId.ABDOMEN,
    "Bone structures in the study area are natural.": RegionId.BONE,
    "Vertebral corpus heights are preserved.": RegionId.BONE,
    # same style, not part of the standard set:
    "Thyroid gland size and density are normal.": RegionId.THYROID,
    "Aeration of both lung parenchyma is normal and no infiltrative lesion was detected.": RegionId.LUNG,
    "No suspicious mass lesion was detected in both breasts.": RegionId.BREAST,
}

NORMAL_SENTENCES: dict[RegionId, str] = {
    RegionId.TRACHEA_BRONCHI: "Trachea and both main bronchi are open.",
    RegionId.THYROID: "Thyroid gland size and density are normal.",
    RegionId.LUNG: "Aeration of both lung parenchyma is normal and no infiltrative lesion was detected.",
    RegionId.HEART: "Pericardial effusion-thickening was not observed.",
    RegionId.MEDIASTINUM: "Mediastinal main vascular structures, heart contour, size are normal.",
    RegionId.PLEURA: "Pleural effusion-thickening was not detected.",
    RegionId.ESOPHAGUS: "Thoracic esophagus calibration was normal and no significant wall thickening was detected.",
    RegionId.ABDOMEN: "No space-occupying lesion was detected in the liver that entered the cross-sectional area.",
    RegionId.BONE: "Bone structures in the study area are natural.",
    RegionId.BREAST: "No suspicious mass lesion was detected in both breasts.",
}
