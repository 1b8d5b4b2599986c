"""Parameter points, rectangular search grids and set-valued results.

A grid is the product of closed, equally spaced axes. The leading axes
belong to the parameter of interest (beta), the trailing axes to the
nuisance parameter (gamma). Points are enumerated in row-major order over
``beta_axes + gamma_axes``, so all gamma points that share a beta value form
one contiguous block of flat indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Raised when two masks defined on different grids are combined."""


@dataclass(frozen=True)
class ParameterPoint:
    beta: tuple[float, ...]
    gamma: tuple[float, ...]

    def __post_init__(self):
        values = np.asarray(self.beta + self.gamma, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite parameter point {self}")

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.beta + self.gamma, dtype=float)

    @classmethod
    def from_theta(cls, theta: Sequence[float], n_beta: int = 1) -> "ParameterPoint":
        theta = [float(v) for v in theta]
        return cls(tuple(theta[:n_beta]), tuple(theta[n_beta:]))


@dataclass(frozen=True)
class Axis:
    lower: float
    upper: float
    steps: int
    name: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("axis bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError(f"axis {self.name!r}: lower must be < upper")
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError(f"axis {self.name!r}: steps must be an integer >= 2")

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.steps - 1)

    def value(self, i: int) -> float:
        # one fixed formula so that index -> value is bit-reproducible
        return self.lower + i * (self.upper - self.lower) / (self.steps - 1)

    def values(self) -> np.ndarray:
        i = np.arange(self.steps, dtype=float)
        return self.lower + i * (self.upper - self.lower) / (self.steps - 1)

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "steps": self.steps, "name": self.name}


@dataclass(frozen=True)
class ParameterGrid:
    """Rectangular lattice over ``theta = (beta, gamma)``.

    Either group of axes may be empty; a grid with only gamma axes is what
    the per-beta set operations return masks over.
    """

    beta_axes: tuple[Axis, ...]
    gamma_axes: tuple[Axis, ...]

    def __post_init__(self):
        object.__setattr__(self, "beta_axes", tuple(self.beta_axes))
        object.__setattr__(self, "gamma_axes", tuple(self.gamma_axes))
        if not self.axes:
            raise ValueError("grid needs at least one axis")

    @classmethod
    def from_bounds(cls, beta=(), gamma=()) -> "ParameterGrid":
        """Build from ``(lower, upper, steps)`` triples."""
        return cls(
            tuple(Axis(*b, name=f"beta{i}") for i, b in enumerate(beta)),
            tuple(Axis(*g, name=f"gamma{i}") for i, g in enumerate(gamma)),
        )

    @property
    def axes(self) -> tuple[Axis, ...]:
        return self.beta_axes + self.gamma_axes

    @property
    def n_beta(self) -> int:
        return len(self.beta_axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.steps for a in self.axes)

    @property
    def beta_shape(self) -> tuple[int, ...]:
        return tuple(a.steps for a in self.beta_axes)

    @property
    def gamma_shape(self) -> tuple[int, ...]:
        return tuple(a.steps for a in self.gamma_axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_beta_points(self) -> int:
        return int(np.prod(self.beta_shape)) if self.beta_axes else 1

    @property
    def n_gamma_points(self) -> int:
        return int(np.prod(self.gamma_shape)) if self.gamma_axes else 1

    def __len__(self) -> int:
        return self.size

    def theta_array(self) -> np.ndarray:
        """All points as a ``(size, dim)`` array in enumeration order."""
        mesh = np.meshgrid(*[a.values() for a in self.axes], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def unravel(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def ravel(self, index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(index), self.shape))

    def point(self, index) -> ParameterPoint:
        """Point at a flat index or a multi-index."""
        if np.ndim(index) == 0:
            index = self.unravel(int(index))
        values = [ax.value(i) for ax, i in zip(self.axes, index)]
        return ParameterPoint.from_theta(values, self.n_beta)

    def enumerate(self) -> Iterator[ParameterPoint]:
        for flat in range(self.size):
            yield self.point(flat)

    def beta_values(self) -> np.ndarray:
        """``(n_beta_points, n_beta)`` array of beta values, row-major."""
        if not self.beta_axes:
            return np.zeros((1, 0))
        return ParameterGrid(self.beta_axes, ()).theta_array()

    def gamma_grid(self) -> "ParameterGrid":
        return ParameterGrid((), self.gamma_axes)

    def beta_block(self, beta_index: int) -> slice:
        """Flat indices of the gamma points that share the given beta index."""
        g = self.n_gamma_points
        return slice(beta_index * g, (beta_index + 1) * g)

    def beta_index_of(self, beta: Sequence[float], atol: float = 1e-9) -> int:
        """Flat beta index of a beta value lying on the beta axes."""
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        idx = []
        for ax, b in zip(self.beta_axes, beta):
            i = int(round((b - ax.lower) / ax.spacing))
            if not (0 <= i < ax.steps) or abs(ax.value(i) - b) > atol:
                raise ValueError(f"beta value {b} is not on axis {ax.name!r}")
            idx.append(i)
        if not idx:
            return 0
        return int(np.ravel_multi_index(tuple(idx), self.beta_shape))

    def to_dict(self) -> dict:
        return {
            "beta": [a.to_dict() for a in self.beta_axes],
            "gamma": [a.to_dict() for a in self.gamma_axes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParameterGrid":
        def axis(a):
            if isinstance(a, dict):
                return Axis(float(a["lower"]), float(a["upper"]), int(a["steps"]), a.get("name", ""))
            lower, upper, steps = a
            return Axis(float(lower), float(upper), int(steps))

        return cls(tuple(axis(a) for a in d.get("beta", ())), tuple(axis(a) for a in d.get("gamma", ())))


@dataclass(frozen=True, eq=False)
class GridMask:
    """Boolean membership flags over the points of a grid."""

    grid: ParameterGrid
    flags: np.ndarray

    def __post_init__(self):
        flags = np.asarray(self.flags, dtype=bool).ravel()
        if flags.size != self.grid.size:
            raise ValueError(f"mask has {flags.size} flags for a grid of {self.grid.size} points")
        flags.setflags(write=False)
        object.__setattr__(self, "flags", flags)

    @classmethod
    def empty(cls, grid: ParameterGrid) -> "GridMask":
        return cls(grid, np.zeros(grid.size, dtype=bool))

    @classmethod
    def full(cls, grid: ParameterGrid) -> "GridMask":
        return cls(grid, np.ones(grid.size, dtype=bool))

    def _check(self, other: "GridMask"):
        if other.grid != self.grid:
            raise GridMismatchError("masks are defined on different grids")

    def __and__(self, other: "GridMask") -> "GridMask":
        self._check(other)
        return GridMask(self.grid, self.flags & other.flags)

    def __or__(self, other: "GridMask") -> "GridMask":
        self._check(other)
        return GridMask(self.grid, self.flags | other.flags)

    def __eq__(self, other) -> bool:
        return isinstance(other, GridMask) and other.grid == self.grid and np.array_equal(self.flags, other.flags)

    def issubset(self, other: "GridMask") -> bool:
        self._check(other)
        return bool(np.all(~self.flags | other.flags))

    def count(self) -> int:
        return int(self.flags.sum())

    def is_empty(self) -> bool:
        return not self.flags.any()

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.flags)

    def points(self) -> list[ParameterPoint]:
        return [self.grid.point(i) for i in self.indices()]

    def as_array(self) -> np.ndarray:
        return self.flags.reshape(self.grid.shape)


def mask_subset(a: GridMask, b: GridMask) -> bool:
    """True iff every point flagged in ``a`` is flagged in ``b``."""
    return a.issubset(b)
