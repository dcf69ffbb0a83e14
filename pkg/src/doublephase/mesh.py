"""Uniform rectilinear grids, nodal scalar fields, per-cell gradients, quadrature.

Nodal data is stored as a flat float64 array in row-major order over the node
lattice; per-cell data likewise over the cell lattice.  Gradients live at cell
centers: each entry is the gradient of the multilinear nodal interpolant
evaluated at the center of that cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform tensor-product grid on a box in 1 or 2 dimensions."""

    dim: int
    extents: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.extents) != self.dim or len(self.resolution) != self.dim:
            raise ValueError(
                f"extents and resolution must have length {self.dim}, "
                f"got {len(self.extents)} and {len(self.resolution)}"
            )
        for lo, hi in self.extents:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"degenerate extent ({lo}, {hi})")
        for n in self.resolution:
            if n < 2:
                raise ValueError(f"resolution must be >= 2 per axis, got {n}")

    @property
    def cell_size(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / n for (lo, hi), n in zip(self.extents, self.resolution)
        )

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_size))

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.extents]))

    @property
    def node_shape(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.resolution)

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return tuple(self.resolution)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cell_shape))

    def axis_nodes(self, axis: int) -> np.ndarray:
        lo, hi = self.extents[axis]
        return np.linspace(lo, hi, self.resolution[axis] + 1)

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.cell_size[axis]
        lo = self.extents[axis][0]
        return lo + h * (np.arange(self.resolution[axis]) + 0.5)

    def node_coords(self) -> np.ndarray:
        """Coordinates of every node, shape (n_nodes, dim), row-major order."""
        axes = [self.axis_nodes(i) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def cell_centers(self) -> np.ndarray:
        """Coordinates of every cell center, shape (n_cells, dim)."""
        axes = [self.axis_centers(i) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def build_grid(dim, extents, resolution) -> Grid:
    """Validate and build a Grid from plain sequences."""
    return Grid(
        dim=int(dim),
        extents=tuple((float(lo), float(hi)) for lo, hi in extents),
        resolution=tuple(int(n) for n in resolution),
    )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real value per grid node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1).copy()
        if v.size != self.grid.n_nodes:
            raise ValueError(
                f"value count {v.size} does not match node count {self.grid.n_nodes}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.n_nodes))


@dataclass(frozen=True, eq=False)
class GradientField:
    """One gradient vector per grid cell."""

    grid: Grid
    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float).reshape(-1, self.grid.dim).copy()
        if v.shape[0] != self.grid.n_cells:
            raise ValueError(
                f"vector count {v.shape[0]} does not match cell count {self.grid.n_cells}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("gradient field contains non-finite values")
        object.__setattr__(self, "vectors", _readonly(v))

    def norms(self) -> np.ndarray:
        """Euclidean norm of the gradient, one value per cell."""
        return np.sqrt(np.sum(self.vectors**2, axis=1))


@dataclass(frozen=True, eq=False)
class BoundaryMask:
    """Boolean per node, true exactly on boundary nodes."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=bool).reshape(-1).copy()
        if v.size != self.grid.n_nodes:
            raise ValueError("mask size does not match node count")
        object.__setattr__(self, "values", _readonly(v))


def boundary_mask(grid: Grid) -> BoundaryMask:
    m = np.zeros(grid.node_shape, dtype=bool)
    if grid.dim == 1:
        m[0] = m[-1] = True
    else:
        m[0, :] = m[-1, :] = True
        m[:, 0] = m[:, -1] = True
    return BoundaryMask(grid, m.reshape(-1))


def gradient_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Per-cell gradient of the multilinear interpolant of flat nodal values."""
    if grid.dim == 1:
        (h,) = grid.cell_size
        g = (values[1:] - values[:-1]) / h
        return g.reshape(-1, 1)
    hx, hy = grid.cell_size
    v = values.reshape(grid.node_shape)
    dx = (v[1:, :-1] - v[:-1, :-1] + v[1:, 1:] - v[:-1, 1:]) / (2.0 * hx)
    dy = (v[:-1, 1:] - v[:-1, :-1] + v[1:, 1:] - v[1:, :-1]) / (2.0 * hy)
    return np.stack([dx.reshape(-1), dy.reshape(-1)], axis=-1)


def discrete_gradient(u: ScalarField) -> GradientField:
    return GradientField(u.grid, gradient_values(u.grid, u.values))


def gradient_adjoint(grid: Grid, vectors: np.ndarray) -> np.ndarray:
    """Transpose of ``gradient_values``: scatter per-cell vectors to nodes.

    Satisfies sum(gradient_values(g, v) * w) == dot(v, gradient_adjoint(g, w))
    for every nodal v and per-cell vector field w.
    """
    out = np.zeros(grid.node_shape)
    if grid.dim == 1:
        (h,) = grid.cell_size
        g = vectors[:, 0] / h
        out[:-1] -= g
        out[1:] += g
        return out.reshape(-1)
    hx, hy = grid.cell_size
    gx = vectors[:, 0].reshape(grid.cell_shape) / (2.0 * hx)
    gy = vectors[:, 1].reshape(grid.cell_shape) / (2.0 * hy)
    out[:-1, :-1] -= gx
    out[1:, :-1] += gx
    out[:-1, 1:] -= gx
    out[1:, 1:] += gx
    out[:-1, :-1] -= gy
    out[:-1, 1:] += gy
    out[1:, :-1] -= gy
    out[1:, 1:] += gy
    return out.reshape(-1)


def cell_average_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the corner nodal values, one value per cell."""
    if grid.dim == 1:
        return 0.5 * (values[1:] + values[:-1])
    v = values.reshape(grid.node_shape)
    c = 0.25 * (v[:-1, :-1] + v[1:, :-1] + v[:-1, 1:] + v[1:, 1:])
    return c.reshape(-1)


def node_to_cell(u: ScalarField) -> np.ndarray:
    return cell_average_values(u.grid, u.values)


def cell_average_adjoint(grid: Grid, cells: np.ndarray) -> np.ndarray:
    """Transpose of ``cell_average_values``: scatter cell values to corner nodes."""
    out = np.zeros(grid.node_shape)
    if grid.dim == 1:
        half = 0.5 * cells
        out[:-1] += half
        out[1:] += half
        return out.reshape(-1)
    quarter = 0.25 * cells.reshape(grid.cell_shape)
    out[:-1, :-1] += quarter
    out[1:, :-1] += quarter
    out[:-1, 1:] += quarter
    out[1:, 1:] += quarter
    return out.reshape(-1)


def integrate_cells(grid: Grid, cells: np.ndarray) -> float:
    """Midpoint-rule integral of per-cell samples: sum(c) * cell_volume."""
    c = np.asarray(cells, dtype=float).reshape(-1)
    if c.size != grid.n_cells:
        raise ValueError(
            f"cell count {c.size} does not match grid cell count {grid.n_cells}"
        )
    return float(np.sum(c) * grid.cell_volume)


def apply_dirichlet(u: ScalarField, phi: ScalarField, mask: BoundaryMask) -> ScalarField:
    """Return a field equal to phi on masked nodes and to u elsewhere."""
    if u.grid is not phi.grid and u.grid.node_shape != phi.grid.node_shape:
        raise ValueError("fields live on different grids")
    return ScalarField(u.grid, np.where(mask.values, phi.values, u.values))
