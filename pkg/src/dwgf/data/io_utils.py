import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
import torch
from torch import Tensor

from dwgf.errors import ConfigError

pylogger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _format(value: Any) -> str:
    if isinstance(value, Tensor):
        value = value.item()
    if isinstance(value, float):
        return FLOAT_FORMAT % value
    return str(value)


def save_matrix(path: Union[str, Path], matrix: Union[Tensor, np.ndarray], columns: Sequence[str]) -> Path:
    """Write a 2-D array as CSV with a header row and 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    array = matrix.detach().cpu().numpy() if isinstance(matrix, Tensor) else np.asarray(matrix)
    array = np.atleast_2d(array)
    if array.shape[1] != len(columns):
        raise ValueError(f"{len(columns)} column names for a matrix with {array.shape[1]} columns")

    np.savetxt(path, array, fmt=FLOAT_FORMAT, delimiter=",", header=",".join(columns), comments="")
    return path


def save_records(path: Union[str, Path], records: Iterable[Dict[str, Any]], columns: Sequence[str]) -> Path:
    """Write rows of mixed text/number fields, numbers with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for record in records:
            writer.writerow([_format(record[column]) for column in columns])
    return path


def load_matrix(path: Union[str, Path]) -> Tensor:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), reason="file not found")
    return torch.as_tensor(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2), dtype=torch.get_default_dtype())


def load_vector(path: Union[str, Path]) -> Tensor:
    """Read a one-column CSV vector (header row first)."""
    matrix = load_matrix(path)
    if matrix.shape[1] != 1:
        raise ConfigError(str(path), reason=f"expected a single column, got {matrix.shape[1]}")
    return matrix[:, 0]


def indexed_columns(prefix: str, count: int) -> List[str]:
    return [f"{prefix}{i}" for i in range(count)]
