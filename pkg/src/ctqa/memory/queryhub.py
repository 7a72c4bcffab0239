"""Per-region question pool plus the canonical question used during reports."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import HubMissingRegionError
from ..regions import RegionId, spoken_name


def _presence_question(region: RegionId) -> str:
    return f"Is there any abnormality in the {spoken_name(region)}?"


def _abnormality_question(region: RegionId) -> str:
    return f"What are the abnormalities in the {spoken_name(region)}?"


@dataclass
class QueryHub:
    canonical: dict[RegionId, str]
    pool: dict[RegionId, list[str]]
    user_queries: list[str] = field(default_factory=list)

    @classmethod
    def default(cls) -> "QueryHub":
        return cls(
            canonical={region: _presence_question(region) for region in RegionId},
            pool={
                region: [_presence_question(region), _abnormality_question(region)]
                for region in RegionId
            },
        )

    def canonical_question(self, region: RegionId) -> str:
        try:
            return self.canonical[region]
        except KeyError:
            raise HubMissingRegionError(f"query hub has no entry for {region}") from None

    def questions(self, region: RegionId) -> list[str]:
        try:
            return list(self.pool[region])
        except KeyError:
            raise HubMissingRegionError(f"query hub has no pool for {region}") from None

    def add_question(self, region: RegionId, question: str) -> None:
        self.pool.setdefault(region, []).append(question)

    def record_user_query(self, query: str) -> None:
        self.user_queries.append(query)
