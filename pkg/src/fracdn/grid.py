"""Truncated computational domain, region index sets and nodal fields.

The whole space is replaced by the box ``[-L, L]^dim`` carrying homogeneous
Dirichlet data on its boundary.  Only interior nodes are stored; node ``i``
has row-major multi-index ``(k_0, ..., k_{dim-1})`` and coordinate
``-L + (k + 1) h`` along each axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DataError, GeometryError

__all__ = [
    "Grid",
    "RegionMask",
    "NodeField",
    "build_grid",
    "build_regions",
    "sample_field",
]


@dataclass(frozen=True)
class Grid:
    """Uniform Cartesian grid of interior nodes on ``[-L, L]^dim``."""

    dim: int
    half_width: float
    nodes_per_axis: int

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.nodes_per_axis + 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.dim

    @property
    def n_nodes(self) -> int:
        return self.nodes_per_axis**self.dim

    @property
    def axis(self) -> np.ndarray:
        k = np.arange(self.nodes_per_axis)
        return -self.half_width + (k + 1) * self.h

    @property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(N, dim)``, row-major ordering."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def multi_index(self, i):
        return np.unravel_index(i, self.shape)

    def nearest_node(self, x) -> int:
        """Index of the node closest to the point ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.rint((x + self.half_width) / self.h - 1.0).astype(int)
        k = np.clip(k, 0, self.nodes_per_axis - 1)
        return int(np.ravel_multi_index(tuple(k), self.shape))

    def neighbours(self) -> np.ndarray:
        """Pairs ``(i, j)``, ``i < j``, of grid-adjacent nodes."""
        idx = np.arange(self.n_nodes).reshape(self.shape)
        pairs = []
        for ax in range(self.dim):
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            pairs.append(np.stack([idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()], axis=1))
        return np.concatenate(pairs, axis=0)


def build_grid(dim: int, L: float, M: int) -> Grid:
    """Build the grid with ``M`` interior nodes per axis on ``[-L, L]^dim``.

    Raises
    ------
    ConfigurationError
        If ``dim`` is not 1 or 2, ``L <= 0`` or ``M < 8``.
    """
    if dim not in (1, 2):
        raise ConfigurationError(f"dim must be 1 or 2, got {dim}")
    if not L > 0:
        raise ConfigurationError(f"half width must be positive, got {L}")
    if int(M) != M or M < 8:
        raise ConfigurationError(f"need at least 8 nodes per axis, got {M}")
    return Grid(int(dim), float(L), int(M))


Box = Sequence[Sequence[float]]


def _as_box(box, dim: int) -> np.ndarray:
    b = np.asarray(box, dtype=float)
    if b.shape == (2,) and dim == 1:
        b = b[None, :]
    if b.shape != (dim, 2):
        raise GeometryError(f"box must give (lo, hi) for each of {dim} axes, got shape {b.shape}")
    if np.any(b[:, 0] >= b[:, 1]):
        raise GeometryError(f"box has empty extent: {b.tolist()}")
    return b


def _in_box(coords: np.ndarray, box: np.ndarray) -> np.ndarray:
    tol = 1e-12
    return np.all((coords >= box[:, 0] - tol) & (coords <= box[:, 1] + tol), axis=1)


def _min_distance(a: np.ndarray, b: np.ndarray) -> float:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(d.min())


@dataclass(frozen=True)
class RegionMask:
    """Index sets of the inaccessible region, the measurement window and the exterior."""

    grid: Grid
    omega_box: np.ndarray
    w_box: np.ndarray
    idx_omega: np.ndarray
    idx_w: np.ndarray
    idx_ext: np.ndarray

    @property
    def omega_mask(self) -> np.ndarray:
        m = np.zeros(self.grid.n_nodes, dtype=bool)
        m[self.idx_omega] = True
        return m

    @property
    def idx_omega_boundary(self) -> np.ndarray:
        """Outermost layer of the region: nodes with a grid neighbour outside it."""
        return self.omega_layers()[0]

    @property
    def idx_omega_interior(self) -> np.ndarray:
        return np.setdiff1d(self.idx_omega, self.idx_omega_boundary)

    def omega_layers(self) -> list[np.ndarray]:
        """Peel the region into successive boundary layers, outermost first."""
        inside = self.omega_mask.reshape(self.grid.shape)
        layers = []
        while inside.any():
            padded = np.pad(inside, 1, constant_values=False)
            core = inside.copy()
            for ax in range(self.grid.dim):
                for shift in (-1, 1):
                    core &= np.roll(padded, shift, axis=ax)[
                        tuple(slice(1, -1) for _ in range(self.grid.dim))
                    ]
            layer = inside & ~core
            layers.append(np.flatnonzero(layer.ravel()))
            inside = core
        return layers


def build_regions(grid: Grid, omega_box: Box, w_box: Box) -> RegionMask:
    """Locate the nodes of the region and of the measurement window.

    Both boxes must lie strictly inside the grid box, each must contain at
    least one node, and every window node must be at distance ``>= 2h``
    from every region node so that the closures stay disjoint on the grid.
    """
    ob = _as_box(omega_box, grid.dim)
    wb = _as_box(w_box, grid.dim)
    L = grid.half_width
    for name, b in (("omega", ob), ("W", wb)):
        if np.any(b[:, 0] <= -L) or np.any(b[:, 1] >= L):
            raise GeometryError(f"{name} box {b.tolist()} is not strictly inside [-{L}, {L}]^{grid.dim}")
    overlap = np.all((ob[:, 0] <= wb[:, 1]) & (wb[:, 0] <= ob[:, 1]))
    if overlap:
        raise GeometryError("omega and W boxes intersect")

    coords = grid.coords
    idx_omega = np.flatnonzero(_in_box(coords, ob))
    idx_w = np.flatnonzero(_in_box(coords, wb))
    if idx_omega.size == 0:
        raise GeometryError("omega box contains no grid node")
    if idx_w.size == 0:
        raise GeometryError("W box contains no grid node")
    gap = _min_distance(coords[idx_omega], coords[idx_w])
    if gap < 2.0 * grid.h - 1e-12:
        raise GeometryError(f"omega and W nodes are {gap:.3g} apart, need at least 2h = {2 * grid.h:.3g}")
    idx_ext = np.setdiff1d(np.arange(grid.n_nodes), idx_omega)
    return RegionMask(grid, ob, wb, idx_omega, idx_w, idx_ext)


@dataclass(frozen=True)
class NodeField:
    """Nodal samples of a function on a grid."""

    values: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_nodes,):
            raise DataError(f"field has shape {v.shape}, grid has {self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(v)):
            raise DataError("field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def sample_field(grid: Grid, rule: Callable[[np.ndarray], float]) -> NodeField:
    """Evaluate ``rule`` at every node.

    ``rule`` receives the coordinate vector of a single node.  Vectorised
    rules may instead accept the ``(N, dim)`` coordinate array; both work.
    """
    coords = grid.coords
    try:
        vals = np.asarray(rule(coords), dtype=float)
        if vals.shape == (grid.n_nodes, 1):
            vals = vals[:, 0]
        if vals.shape != (grid.n_nodes,):
            raise ValueError
    except Exception:
        vals = np.array([float(np.squeeze(rule(x))) for x in coords])
    if not np.all(np.isfinite(vals)):
        raise DataError("rule produced non-finite samples")
    return NodeField(vals, grid)
