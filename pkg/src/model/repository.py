import json
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from src.errors import FormatError, VersionMismatchError
from src.model.domain import MODEL_VERSION, ModelSpec, RegressorModel, TrainConfig, TrainingLog


class ModelHeader(BaseModel):
    version: str = MODEL_VERSION
    layer_sizes: list[int]
    spec: ModelSpec
    config: Optional[TrainConfig] = None


class ModelRepository:
    """Stores a trained regressor as a JSON header line followed by its flat parameter array."""

    def save(
        self,
        model: RegressorModel,
        path: Union[str, Path],
        config: Optional[TrainConfig] = None,
        log: Optional[TrainingLog] = None,
        log_path: Optional[Union[str, Path]] = None,
    ) -> None:
        header = ModelHeader(layer_sizes=model.layer_sizes, spec=model.spec, config=config)
        # repr round-trips float64 exactly
        parameters = json.dumps([float(v) for v in model.flat_parameters()])
        Path(path).write_text(header.model_dump_json() + "\n" + parameters + "\n", encoding="utf-8")
        if log is not None:
            Path(log_path or self.log_path(path)).write_text(log.model_dump_json(indent=2) + "\n", encoding="utf-8")

    @staticmethod
    def log_path(path: Union[str, Path]) -> Path:
        path = Path(path)
        return path.with_name(path.name + ".log.json")

    def load(self, path: Union[str, Path]) -> tuple[RegressorModel, ModelHeader]:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if len(lines) < 2:
            raise FormatError(f"Model file '{path}' needs a header and a parameter line", line=len(lines) + 1)

        try:
            raw_header = json.loads(lines[0])
        except json.JSONDecodeError as e:
            raise FormatError(f"Invalid header JSON: {e.msg}", line=1)
        found = raw_header.get("version") if isinstance(raw_header, dict) else None
        if found != MODEL_VERSION:
            raise VersionMismatchError(f"Expected model version '{MODEL_VERSION}', got '{found}'")
        try:
            header = ModelHeader.model_validate(raw_header)
        except ValidationError as e:
            raise FormatError(f"Invalid model header: {e}", line=1)

        try:
            flat = np.asarray(json.loads(lines[1]), dtype=float)
            model = RegressorModel.from_flat(header.spec, flat.ravel())
        except (json.JSONDecodeError, TypeError, ValueError) as e:
            raise FormatError(f"Invalid parameter array: {e}", line=2)
        if header.layer_sizes != model.layer_sizes:
            raise FormatError(f"Header layer sizes {header.layer_sizes} do not match hidden_sizes and m", line=1)
        return model, header
