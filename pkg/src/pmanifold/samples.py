"""The point-set container passed between estimators, samplers and file I/O."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass
class SampleSet:
    """N x D matrix of points plus provenance metadata.

    ``meta`` holds free-form scalar entries; ``seed``, ``source`` and ``label``
    are the conventional keys and are the ones persisted by the binary format.
    """

    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2:
            raise InvalidInputError(f"sample matrix must be 2-D, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("sample matrix contains non-finite entries")
        self.points = pts

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def subset(self, index) -> "SampleSet":
        return SampleSet(self.points[index], dict(self.meta))


def as_points(samples) -> np.ndarray:
    """Return the raw float64 matrix for a SampleSet or array-like."""
    if isinstance(samples, SampleSet):
        return samples.points
    return SampleSet(samples).points
