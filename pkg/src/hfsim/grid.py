"""Uniform-grid field storage: cell-centered scalars and MAC (staggered) velocities.

Conventions:
  - cell (i,j[,k]) center sits at origin + (i+1/2, j+1/2[, k+1/2])*dx
  - axis-a faces form a lattice with shape[a]+1 entries along axis a;
    face (a; i,j) of axis 0 separates cells (i-1,j) and (i,j)
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridDesc:
    dim: int
    shape: tuple[int, ...]
    dx: float
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if len(self.shape) != self.dim or len(self.origin) != self.dim:
            raise ValueError("shape/origin length must match dim")
        if any(n < 4 for n in self.shape):
            raise ValueError("need at least 4 cells per axis")
        if not self.dx > 0:
            raise ValueError("dx must be positive")
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def num_cells(self) -> int:
        return int(np.prod(self.shape))

    def face_shape(self, axis: int) -> tuple[int, ...]:
        s = list(self.shape)
        s[axis] += 1
        return tuple(s)

    def cell_center(self, idx) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(idx, dtype=float) + 0.5) * self.dx

    def cell_centers(self) -> np.ndarray:
        """(*shape, dim) array of cell-center world positions."""
        axes = [self.origin[a] + (np.arange(self.shape[a]) + 0.5) * self.dx
                for a in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    def face_center(self, axis: int, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=float)
        off = np.full(self.dim, 0.5)
        off[axis] = 0.0
        return np.asarray(self.origin) + (idx + off) * self.dx

    def face_centers(self, axis: int) -> np.ndarray:
        axes = []
        for a in range(self.dim):
            n = self.shape[a] + (1 if a == axis else 0)
            stag = 0.0 if a == axis else 0.5
            axes.append(self.origin[a] + (np.arange(n) + stag) * self.dx)
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack(grids, axis=-1)

    @property
    def extent(self) -> tuple[tuple[float, float], ...]:
        return tuple((self.origin[a], self.origin[a] + self.shape[a] * self.dx)
                     for a in range(self.dim))


@dataclass
class ScalarField:
    desc: GridDesc
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.desc.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.desc.shape}")

    @classmethod
    def zeros(cls, desc: GridDesc) -> "ScalarField":
        return cls(desc, np.zeros(desc.shape))

    @classmethod
    def from_function(cls, desc: GridDesc, fn) -> "ScalarField":
        pts = desc.cell_centers()
        return cls(desc, fn(pts))

    def copy(self) -> "ScalarField":
        return ScalarField(self.desc, self.values.copy())


@dataclass
class StaggeredVelocityField:
    desc: GridDesc
    comps: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.comps:
            self.comps = [np.zeros(self.desc.face_shape(a)) for a in range(self.desc.dim)]
        self.comps = [np.ascontiguousarray(c, dtype=np.float64) for c in self.comps]
        for a, c in enumerate(self.comps):
            if c.shape != self.desc.face_shape(a):
                raise ValueError(f"axis {a} face array shape {c.shape} != {self.desc.face_shape(a)}")

    @classmethod
    def zeros(cls, desc: GridDesc) -> "StaggeredVelocityField":
        return cls(desc)

    @classmethod
    def from_function(cls, desc: GridDesc, fn) -> "StaggeredVelocityField":
        """fn(points, axis) -> component values at axis-a face centers."""
        comps = [fn(desc.face_centers(a), a) for a in range(desc.dim)]
        return cls(desc, comps)

    def copy(self) -> "StaggeredVelocityField":
        return StaggeredVelocityField(self.desc, [c.copy() for c in self.comps])

    def max_speed_component(self) -> float:
        return max(float(np.max(np.abs(c))) if c.size else 0.0 for c in self.comps)


_KINDS = ("cell", "faceX", "faceY", "faceZ")


def write_field_dump(path, desc: GridDesc, values: np.ndarray, kind: str = "cell") -> None:
    """hfdump v1: one text header line, then little-endian float64 payload."""
    if kind not in _KINDS[: desc.dim + 1]:
        raise ValueError(f"bad dump kind {kind!r}")
    names = ["nx", "ny", "nz"][: desc.dim]
    dims = " ".join(f"{n}={s}" for n, s in zip(names, desc.shape))
    expect = desc.shape if kind == "cell" else desc.face_shape("XYZ".index(kind[4]))
    if tuple(values.shape) != expect:
        raise ValueError(f"values shape {values.shape} does not match kind {kind}")
    origin = ",".join(repr(o) for o in desc.origin)
    header = f"hfdump v1 dim={desc.dim} {dims} dx={desc.dx!r} origin={origin} kind={kind}\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_field_dump(path):
    """Returns (header dict, values array)."""
    with open(path, "rb") as f:
        header = f.readline().decode("ascii").strip()
        payload = f.read()
    parts = header.split()
    if parts[:2] != ["hfdump", "v1"]:
        raise ValueError(f"not an hfdump file: {header!r}")
    meta = dict(p.split("=", 1) for p in parts[2:])
    dim = int(meta["dim"])
    shape = tuple(int(meta[n]) for n in ["nx", "ny", "nz"][:dim])
    if meta["kind"].startswith("face"):
        axis = "XYZ".index(meta["kind"][4])
        shape = tuple(s + (1 if a == axis else 0) for a, s in enumerate(shape))
    values = np.frombuffer(payload, dtype="<f8").reshape(shape)
    meta["dx"] = float(meta["dx"])
    meta["origin"] = tuple(float(x) for x in meta["origin"].split(","))
    return meta, values
