"""Where the engine finds study feature volumes."""
from __future__ import annotations

import threading
from pathlib import Path
from typing import Protocol, runtime_checkable

from .errors import StudyNotFoundError
from .features import VolumeFeatures, load_volume


@runtime_checkable
class StudyRepository(Protocol):
    def get(self, study_id: str) -> VolumeFeatures: ...

    def list_ids(self) -> list[str]: ...


class InMemoryStudyRepository:
    def __init__(self) -> None:
        self._studies: dict[str, VolumeFeatures] = {}
        self._lock = threading.Lock()

    def put(self, vf: VolumeFeatures) -> None:
        with self._lock:
            self._studies[vf.study_id] = vf

    def get(self, study_id: str) -> VolumeFeatures:
        with self._lock:
            try:
                return self._studies[study_id]
            except KeyError:
                raise StudyNotFoundError(f"no study loaded with id {study_id!r}") from None

    def list_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._studies)


class DirectoryStudyRepository:
    """Lazy-loading view over a directory of ``<study_id>.ctfv`` files."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._cache: dict[str, VolumeFeatures] = {}
        self._lock = threading.Lock()

    def get(self, study_id: str) -> VolumeFeatures:
        with self._lock:
            if study_id in self._cache:
                return self._cache[study_id]
        path = self.directory / f"{study_id}.ctfv"
        if not path.is_file():
            raise StudyNotFoundError(f"no file {path}")
        vf = load_volume(path)
        with self._lock:
            self._cache[study_id] = vf
        return vf

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.ctfv"))
