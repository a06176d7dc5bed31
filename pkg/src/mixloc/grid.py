"""Uniform interior meshes of a box domain and grid-function helpers.

Only interior nodes are stored. Every grid function is implicitly extended by
zero outside the box, so the homogeneous exterior condition never appears as
data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform interior mesh of ``(0, L_1) x ... x (0, L_dim)``.

    Attributes
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    cells_per_axis : int
        Number of interior nodes along the first axis.
    spacing : float
        Mesh width ``h``; identical along every axis.
    box_lengths : tuple of float
    shape : tuple of int
        Interior node counts per axis. Nodes are flattened in C order.
    nodes : ndarray, shape (n_nodes, dim)
    bdist : ndarray, shape (n_nodes,)
        Exact Euclidean distance from each node to the box boundary.
    """

    dim: int
    cells_per_axis: int
    spacing: float
    box_lengths: tuple
    shape: tuple
    nodes: np.ndarray = field(repr=False)
    bdist: np.ndarray = field(repr=False)

    @property
    def quad_weight(self) -> float:
        return self.spacing**self.dim

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    def reversal(self) -> np.ndarray:
        """Index permutation mapping every node to its point reflection
        through the box centre."""
        idx = np.arange(self.n_nodes).reshape(self.shape)
        return idx[(slice(None, None, -1),) * self.dim].ravel()


def build_grid(dim: int, cells: int, box_lengths=None) -> Grid:
    """Build the interior mesh with ``cells`` interior nodes on the first axis.

    The spacing is ``L_1 / (cells + 1)``. In 2D the second box length must be
    an integer multiple of that spacing so the mesh stays uniform.
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if int(cells) != cells or cells < 2:
        raise ValueError(f"cells must be an integer >= 2, got {cells}")
    cells = int(cells)
    if box_lengths is None:
        box_lengths = [1.0] * dim
    box = tuple(float(v) for v in np.atleast_1d(box_lengths))
    if len(box) != dim:
        raise ValueError(f"expected {dim} box lengths, got {len(box)}")
    if any(not np.isfinite(v) or v <= 0 for v in box):
        raise ValueError(f"box lengths must be positive, got {box}")

    h = box[0] / (cells + 1)
    counts = [cells]
    for length in box[1:]:
        k = length / h
        if abs(k - round(k)) > 1e-9 * max(1.0, k) or round(k) < 3:
            raise ValueError(
                f"box length {length} is not compatible with uniform spacing {h}"
            )
        counts.append(int(round(k)) - 1)

    axes = [h * np.arange(1, n + 1) for n in counts]
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    upper = np.asarray(box)[None, :]
    bdist = np.minimum(nodes, upper - nodes).min(axis=1)
    nodes.setflags(write=False)
    bdist.setflags(write=False)
    return Grid(
        dim=dim,
        cells_per_axis=cells,
        spacing=h,
        box_lengths=box,
        shape=tuple(counts),
        nodes=nodes,
        bdist=bdist,
    )


def check_dimension_hypothesis(p: float, grid: Grid) -> bool:
    """Warn when ``N > p`` fails; the discrete scheme is still defined."""
    if grid.dim > p:
        return True
    warnings.warn(
        f"dimension N={grid.dim} does not exceed p={p}; the analytic results "
        "assume N > p",
        stacklevel=2,
    )
    return False


def as_grid_function(values, grid: Grid) -> np.ndarray:
    """Validate nodal values against ``grid`` and return a float array."""
    u = np.asarray(values, dtype=float)
    if u.ndim == 0:
        u = np.full(grid.n_nodes, float(u))
    u = u.ravel()
    if u.shape[0] != grid.n_nodes:
        raise ValueError(f"expected {grid.n_nodes} nodal values, got {u.shape[0]}")
    if not np.all(np.isfinite(u)):
        raise ValueError("grid function has non-finite entries")
    return u


def lp_norm(u, grid: Grid, r: float = 2.0) -> float:
    """Discrete ``L^r(Omega)`` norm with the uniform quadrature weight."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    u = np.asarray(u, dtype=float)
    return float((grid.quad_weight * np.sum(np.abs(u) ** r)) ** (1.0 / r))


def l2_norm(u, grid: Grid) -> float:
    return lp_norm(u, grid, 2.0)


def envelope_fit(u, grid: Grid, exponent: float, fraction: float = 0.25) -> dict:
    """Boundary envelope constants and log-log slope of a positive state.

    Returns ``c1 = min u/d``, ``c2 = max u/d**exponent`` and the least-squares
    slope of ``log u`` against ``log d`` over the ``fraction`` of nodes
    nearest the boundary.
    """
    u = np.asarray(u, dtype=float)
    d = grid.bdist
    if np.any(u <= 0):
        raise ValueError("envelope fit requires a strictly positive state")
    c1 = float(np.min(u / d))
    c2 = float(np.max(u / d**exponent))
    k = max(2, int(np.ceil(fraction * u.size)))
    near = np.argsort(d, kind="stable")[:k]
    x = np.log(d[near])
    y = np.log(u[near])
    if np.ptp(x) == 0:
        slope = float("nan")
        intercept = float("nan")
    else:
        slope, intercept = np.polyfit(x, y, 1)
    return {
        "c1": c1,
        "c2": c2,
        "slope": float(slope),
        "intercept": float(intercept),
        "n_fit": int(k),
    }
