"""Choice/response-time observations and datasets"""

from typing import Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..exceptions import ValidationError


Row = Tuple[Sequence[float], Sequence[float], float, float]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array, dtype=np.float64)
    array.flags.writeable = False
    return array


class Observation(BaseModel):
    """One trial: left/right attributes, signed choice, response time (seconds)"""

    x: List[float] = Field(..., min_length=1, description="Left alternative attributes")
    y: List[float] = Field(..., min_length=1, description="Right alternative attributes")
    z: int = Field(..., description="+1 if x was chosen, -1 if y was chosen")
    t: float = Field(..., description="Response time in seconds")

    model_config = ConfigDict(frozen=True)

    @field_validator("z")
    @classmethod
    def _check_choice(cls, value: int) -> int:
        if value not in (-1, 1):
            raise ValueError("choice must be -1 or +1")
        return value

    @field_validator("t")
    @classmethod
    def _check_time(cls, value: float) -> float:
        if not np.isfinite(value) or value <= 0:
            raise ValueError("response time must be finite and strictly positive")
        return value

    @model_validator(mode="after")
    def _check_dimensions(self) -> "Observation":
        if len(self.x) != len(self.y):
            raise ValueError("x and y must have the same dimension")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("attributes must be finite")
        return self


class Dataset(BaseModel):
    """Ordered, immutable collection of observations stored column-wise.

    ``X`` and ``Y`` are ``(n, d)`` arrays, ``z`` and ``t`` are ``(n,)`` arrays.
    ``D`` is the empirical diameter ``max_i ||x_i - y_i||``.
    """

    X: np.ndarray
    Y: np.ndarray
    z: np.ndarray
    t: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @classmethod
    def from_arrays(cls, X, Y, z, t) -> "Dataset":
        """Validate column arrays and build a dataset"""
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64).reshape(-1)
        t = np.asarray(t, dtype=np.float64).reshape(-1)

        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if Y.ndim == 1:
            Y = Y.reshape(-1, 1)

        n = X.shape[0]
        if n == 0:
            raise ValidationError("empty dataset")
        if Y.shape[0] != n or z.shape[0] != n or t.shape[0] != n:
            raise ValidationError("column lengths differ")
        if X.shape[1] != Y.shape[1] or X.shape[1] < 1:
            raise ValidationError("dimension mismatch between x and y")

        _raise_first(~np.all(np.isfinite(X), axis=1) | ~np.all(np.isfinite(Y), axis=1), "non-finite attribute")
        _raise_first((z != 1.0) & (z != -1.0), "choice must be -1 or +1")
        _raise_first(~np.isfinite(t) | (t <= 0), "response time must be finite and strictly positive")

        return cls(X=_frozen(X), Y=_frozen(Y), z=_frozen(z), t=_frozen(t))

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    @property
    def diffs(self) -> np.ndarray:
        """Attribute differences x_i - y_i, shape (n, d)"""
        return self.X - self.Y

    @property
    def D(self) -> float:
        return float(np.max(np.linalg.norm(self.diffs, axis=1)))

    @property
    def observations(self) -> List[Observation]:
        return [
            Observation(x=list(self.X[i]), y=list(self.Y[i]), z=int(self.z[i]), t=float(self.t[i]))
            for i in range(self.n)
        ]

    def __len__(self) -> int:
        return self.n

    def take(self, index) -> "Dataset":
        """Sub-dataset for a slice or index array, order preserved"""
        return Dataset.from_arrays(self.X[index], self.Y[index], self.z[index], self.t[index])

    def rows(self) -> Iterable[Row]:
        for i in range(self.n):
            yield list(self.X[i]), list(self.Y[i]), int(self.z[i]), float(self.t[i])


def _raise_first(bad: np.ndarray, message: str):
    if np.any(bad):
        raise ValidationError(message, row=int(np.argmax(bad)) + 1)


def build_dataset(rows: Sequence[Row]) -> Dataset:
    """Build a dataset from (x, y, z, t) rows.

    Rows are numbered from 1 in error messages.
    """
    if len(rows) == 0:
        raise ValidationError("empty dataset")

    d = None
    for index, (x, y, z, t) in enumerate(rows, start=1):
        if d is None:
            d = len(x)
        if len(x) != d or len(y) != d:
            raise ValidationError(f"dimension mismatch (expected {d})", row=index)

    X = np.array([row[0] for row in rows], dtype=np.float64)
    Y = np.array([row[1] for row in rows], dtype=np.float64)
    z = np.array([row[2] for row in rows], dtype=np.float64)
    t = np.array([row[3] for row in rows], dtype=np.float64)
    return Dataset.from_arrays(X, Y, z, t)


def empirical_sigma(ds: Dataset) -> np.ndarray:
    """Second-moment matrix (1/n) sum_i (x_i - y_i)(x_i - y_i)^T"""
    diffs = ds.diffs
    sigma = diffs.T @ diffs / ds.n
    return 0.5 * (sigma + sigma.T)
