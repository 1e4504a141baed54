import json
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.errors import FormatError, PoseKitError
from src.rotation.domain import QuaternionList
from src.rotation.service import _to_hemisphere, normalize


class HypothesisFile(BaseModel):
    """Externally supplied hypotheses: any sign or scale, depths optional."""

    rotations: list[QuaternionList] = Field(min_length=1)
    depths: Optional[list[float]] = None


def load_hypotheses(path: Union[str, Path]) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Unit hemisphere rotations and depths (if present) from a hypothesis JSON file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"Invalid hypothesis JSON: {e.msg}", line=e.lineno)
    try:
        parsed = HypothesisFile.model_validate(raw)
    except ValidationError as e:
        raise FormatError(f"Invalid hypothesis file: {e}", line=1)
    if parsed.depths is not None and len(parsed.depths) != len(parsed.rotations):
        raise FormatError("depths must have one entry per rotation", line=1)

    try:
        rotations = _to_hemisphere(np.atleast_2d(normalize(parsed.rotations)))
    except PoseKitError as e:
        raise FormatError(str(e), line=1)
    depths = None if parsed.depths is None else np.asarray(parsed.depths, dtype=float)
    return rotations, depths


def write_json(model: BaseModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path
