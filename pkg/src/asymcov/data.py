"""Observation containers: spatial/space-time point sets and datasets."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

__all__ = ["PointSet", "Dataset"]


@dataclass
class PointSet:
    """Spatial coordinates (n, d) plus optional time coordinates (n,)."""

    space: np.ndarray
    time: np.ndarray = None

    def __post_init__(self):
        self.space = np.atleast_2d(np.asarray(self.space, dtype=float))
        if self.space.ndim != 2:
            raise ValidationError("space must be (n, d)")
        if self.time is not None:
            self.time = np.asarray(self.time, dtype=float).ravel()
            if self.time.shape[0] != self.space.shape[0]:
                raise ValidationError("time length must match space")
        if not np.all(np.isfinite(self.space)):
            raise ValidationError("coordinates must be finite")

    @property
    def n(self):
        return self.space.shape[0]

    @property
    def dim(self):
        return self.space.shape[1]

    def subset(self, idx):
        return PointSet(self.space[idx], None if self.time is None else self.time[idx])

    def coords(self, time_weight=1.0, space_weight=1.0):
        """Stacked (n, d+1) coordinates under the scaled space-time metric."""
        if self.time is None:
            return self.space * space_weight
        return np.column_stack([self.space * space_weight, self.time * time_weight])


@dataclass
class Dataset:
    """PointSet + responses (+ optional integer process labels)."""

    points: PointSet
    values: np.ndarray
    process_ids: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.shape[0] != self.points.n:
            raise ValidationError("values length must match points")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("values must be finite")
        if self.process_ids is not None:
            self.process_ids = np.asarray(self.process_ids, dtype=int).ravel()
            if self.process_ids.shape[0] != self.points.n:
                raise ValidationError("process_ids length must match points")

    @property
    def n(self):
        return self.points.n

    def subset(self, idx):
        return Dataset(
            self.points.subset(idx),
            self.values[idx],
            None if self.process_ids is None else self.process_ids[idx],
            dict(self.meta),
        )

    def to_csv(self, path):
        """Full-precision CSV serialization (round-trips bit-exactly)."""
        cols = [self.points.space[:, j] for j in range(self.points.dim)]
        header = [f"x{j}" for j in range(self.points.dim)]
        if self.points.time is not None:
            cols.append(self.points.time)
            header.append("t")
        cols.append(self.values)
        header.append("value")
        if self.process_ids is not None:
            cols.append(self.process_ids.astype(float))
            header.append("process")
        np.savetxt(
            path,
            np.column_stack(cols),
            delimiter=",",
            header=",".join(header),
            comments="",
            fmt="%.17g",
        )

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        cols = {name: raw[:, j] for j, name in enumerate(header)}
        space = np.column_stack([cols[k] for k in header if k.startswith("x")])
        time = cols.get("t")
        pids = cols.get("process")
        return cls(
            PointSet(space, time),
            cols["value"],
            None if pids is None else pids.astype(int),
        )
