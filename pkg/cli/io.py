"""
File formats of the command-line tools.

Observations are CSV rows with one label column (the last one by default, the
UCI Libras layout). Fitted models are a single JSON document whose floats are
written in shortest round-trip form, so a model read back is bitwise equal to
the one written.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from classifier.qda import QdaModel
from config import RUNTIME_CONFIG
from estimators.alternation import FitResult
from estimators.model_core import PenaltyConfig, PrecisionSet
from shared.utils.error_handling import DataFormatError, DimensionMismatchError, PersistenceError
from shared.utils.logging import get_logger

logger = get_logger("cli_io")

PathLike = Union[str, Path]
LabelColumn = Union[int, str]


class ModelDocument(BaseModel):
    """Persisted fit: tuning parameters, partition, QDA parameters and diagnostics."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    schema_version: int = RUNTIME_CONFIG["model_schema_version"]
    method: str
    p: int = Field(ge=1)
    C: int = Field(ge=1)
    classes: List[str]
    lambda1: float
    lambda2: float
    Q: int = Field(ge=1)
    partition: List[int]
    log_priors: List[float]
    mus: List[List[float]]
    omegas: List[List[List[float]]]
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_fit(cls, method: str, cfg: PenaltyConfig, model: QdaModel, fit: FitResult) -> "ModelDocument":
        return cls(
            method=method,
            p=model.p,
            C=model.C,
            classes=list(model.classes),
            lambda1=cfg.lambda1,
            lambda2=cfg.lambda2,
            Q=fit.partition.Q,
            partition=list(fit.partition.assignment),
            log_priors=model.log_priors.tolist(),
            mus=model.mus.tolist(),
            omegas=model.omegas.omegas.tolist(),
            diagnostics=fit.report.to_dict(),
        )

    def to_qda(self) -> QdaModel:
        omegas = np.array(self.omegas, dtype=float)
        if omegas.shape != (self.C, self.p, self.p):
            raise DimensionMismatchError(f"model file holds precisions of shape {omegas.shape}, "
                                         f"header says C={self.C}, p={self.p}")
        return QdaModel(PrecisionSet(omegas), np.array(self.mus, dtype=float),
                        np.array(self.log_priors, dtype=float), tuple(self.classes))


def _label_position(frame: pd.DataFrame, label_col: LabelColumn) -> int:
    if isinstance(label_col, str):
        try:
            label_col = int(label_col)
        except ValueError:
            if label_col not in frame.columns:
                raise DataFormatError(f"no column named {label_col!r}") from None
            return int(frame.columns.get_loc(label_col))
    position = label_col if label_col >= 0 else frame.shape[1] + label_col
    if not 0 <= position < frame.shape[1]:
        raise DataFormatError(f"label column {label_col} out of range for {frame.shape[1]} columns")
    return position


def read_table(path: PathLike, header: bool = False) -> pd.DataFrame:
    """Raw CSV cells as strings."""
    try:
        frame = pd.read_csv(path, header=0 if header else None, dtype=str,
                            skipinitialspace=True, keep_default_na=False)
    except FileNotFoundError:
        raise DataFormatError(f"input file {path} does not exist") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"cannot parse {path}: {e}") from e
    if frame.shape[0] == 0:
        raise DataFormatError(f"{path} has no observations")
    return frame


def _features(frame: pd.DataFrame, path: PathLike) -> np.ndarray:
    try:
        X = frame.apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as e:
        raise DataFormatError(f"non-numeric feature in {path}: {e}") from e
    if not np.all(np.isfinite(X)):
        raise DataFormatError(f"{path} contains missing or infinite feature values")
    return X


def read_labeled_csv(path: PathLike, label_col: LabelColumn = -1,
                     header: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Observation matrix and string labels from a labeled CSV file."""
    frame = read_table(path, header)
    if frame.shape[1] < 2:
        raise DataFormatError(f"{path} needs at least one feature and a label column")
    position = _label_position(frame, label_col)
    y = frame.iloc[:, position].str.strip().to_numpy(dtype=str)
    X = _features(frame.drop(columns=frame.columns[position]), path)
    logger.debug("Read labeled observations", path=str(path), rows=X.shape[0], p=X.shape[1],
                 classes=len(set(y.tolist())))
    return X, y


def read_observations(path: PathLike, p: int, label_col: LabelColumn = -1,
                      header: bool = False) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """Rows for a model of dimension p, with labels when the file has one extra column."""
    frame = read_table(path, header)
    if frame.shape[1] == p:
        return _features(frame, path), None
    if frame.shape[1] == p + 1:
        return read_labeled_csv(path, label_col, header)
    raise DimensionMismatchError(f"{path} has {frame.shape[1]} columns; the model expects {p} features "
                                 f"(or {p + 1} with a label column)")


def read_grid_file(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except FileNotFoundError:
        raise DataFormatError(f"grid file {path} does not exist") from None
    except json.JSONDecodeError as e:
        raise DataFormatError(f"grid file {path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise DataFormatError(f"grid file {path} must hold an object with lambda1, lambda2 and q lists")
    return document


def _write_text(path: PathLike, text: str):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    except OSError as e:
        raise PersistenceError(f"cannot write {path}: {e}") from e


def write_model(path: PathLike, document: ModelDocument):
    _write_text(path, json.dumps(document.model_dump(), indent=2) + "\n")
    logger.info("Model written", path=str(path), method=document.method, C=document.C, p=document.p)


def read_model(path: PathLike) -> ModelDocument:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except FileNotFoundError:
        raise DataFormatError(f"model file {path} does not exist") from None
    except json.JSONDecodeError as e:
        raise DataFormatError(f"model file {path} is not valid JSON: {e}") from e
    try:
        document = ModelDocument.model_validate(payload)
    except ValidationError as e:
        raise DataFormatError(f"model file {path} does not match the model schema: {e}") from e
    if document.schema_version != RUNTIME_CONFIG["model_schema_version"]:
        raise DataFormatError(f"model file {path} has schema version {document.schema_version}")
    return document


def write_frame(path: PathLike, frame: pd.DataFrame):
    """Tidy CSV with a fixed float format and line ending."""
    _write_text(path, frame.to_csv(index=False, lineterminator="\n", float_format="%.17g"))


def write_predictions(path: PathLike, predicted: Sequence[str], truth: Optional[Sequence[str]] = None):
    frame = pd.DataFrame({"predicted": list(predicted)})
    if truth is not None:
        frame["label"] = list(truth)
    write_frame(path, frame)
