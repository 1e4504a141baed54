import json
from pathlib import Path
from typing import Optional, Union

from pydantic import ValidationError

from src.errors import FormatError, VersionMismatchError
from src.toy.domain import TOYSET_VERSION, ToySample, ToysetHeader


class ToysetRepository:
    """Toy dataset held in memory and persisted as line-delimited JSON (header line first)."""

    def __init__(self, header: ToysetHeader):
        self.header = header
        self._storage: list[ToySample] = []

    def add(self, sample: ToySample) -> ToySample:
        self._storage.append(sample)
        return sample

    def get(self, index: int) -> Optional[ToySample]:
        if 0 <= index < len(self._storage):
            return self._storage[index]
        return None

    def get_all(self) -> list[ToySample]:
        return list(self._storage)

    def __len__(self) -> int:
        return len(self._storage)

    def save(self, path: Union[str, Path]) -> None:
        lines = [self.header.model_dump_json()]
        lines.extend(sample.model_dump_json() for sample in self._storage)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ToysetRepository":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise FormatError(f"Dataset file '{path}' is empty", line=1)

        try:
            raw_header = json.loads(lines[0])
        except json.JSONDecodeError as e:
            raise FormatError(f"Invalid header JSON: {e.msg}", line=1)
        if not isinstance(raw_header, dict) or raw_header.get("version") != TOYSET_VERSION:
            found = raw_header.get("version") if isinstance(raw_header, dict) else None
            raise VersionMismatchError(f"Expected dataset version '{TOYSET_VERSION}', got '{found}'")
        try:
            repository = cls(ToysetHeader.model_validate(raw_header))
        except ValidationError as e:
            raise FormatError(f"Invalid dataset header: {e}", line=1)

        for number, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                repository.add(ToySample.model_validate_json(line))
            except ValidationError as e:
                raise FormatError(f"Invalid sample: {e}", line=number)
        return repository
