"""
Lattice discretization of the centered cube [-L, L]^d.

Flat index order: ``flat = component * n**d + ravel_multi_index(node, (n,) * d)``
with C ordering over the node multi-index, so the last axis varies fastest.

Operator algebra runs in weight-normalized coordinates ``phi~ = sqrt(w) * phi``
(rectangle rule, uniform weight ``w = h**d``), where L2 inner products are
plain dot products and self-adjoint operators are symmetric matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError

SUPPORTED_DIMENSIONS = (1, 2, 3)


@dataclass(frozen=True)
class Grid:
    """
    Regular lattice with ``n`` points per axis and ``N`` field components.

    Parameters
    ----------
    d : int
        Spatial dimension (1, 2 or 3).
    L : float
        Half-extent per axis.
    n : int
        Points per axis; odd, so the origin is a node.
    N : int
        Field components (1 scalar, 3 velocity).
    """

    d: int
    L: float
    n: int
    N: int = 1

    def __post_init__(self) -> None:
        if self.d not in SUPPORTED_DIMENSIONS:
            raise GridError(f"unsupported dimension d={self.d}; expected one of {SUPPORTED_DIMENSIONS}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 3:
            raise GridError(f"points per axis must be an integer >= 3, got {self.n!r}")
        if self.n % 2 == 0:
            raise GridError(f"points per axis must be odd so the origin is a node, got n={self.n}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise GridError(f"half-extent must be positive, got L={self.L}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise GridError(f"component count must be a positive integer, got N={self.N!r}")

        h = 2.0 * self.L / (self.n - 1)
        object.__setattr__(self, 'h', h)
        object.__setattr__(self, 'weight', h ** self.d)
        object.__setattr__(self, 'axis', np.linspace(-self.L, self.L, self.n))

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def n_nodes(self):
        return self.n ** self.d

    @property
    def size(self):
        """Degrees of freedom N * n**d."""
        return self.N * self.n_nodes

    @property
    def weights(self):
        """Quadrature weight per node (uniform rectangle rule)."""
        return np.full(self.n_nodes, self.weight)

    @property
    def origin(self):
        return ((self.n - 1) // 2,) * self.d

    @property
    def coordinates(self):
        """Node coordinates, shape (n**d, d), in flat node order."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing='ij')
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def flat_index(self, component, node):
        if not 0 <= component < self.N:
            raise GridError(f"component {component} out of range for N={self.N}")
        node = tuple(int(i) for i in node)
        if len(node) != self.d or any(not 0 <= i < self.n for i in node):
            raise GridError(f"node {node} is not a multi-index of this grid")
        return component * self.n_nodes + int(np.ravel_multi_index(node, self.shape))

    def unflatten(self, flat):
        if not 0 <= flat < self.size:
            raise GridError(f"flat index {flat} out of range [0, {self.size})")
        component, node_flat = divmod(int(flat), self.n_nodes)
        node = tuple(int(i) for i in np.unravel_index(node_flat, self.shape))
        return component, node

    def node_index(self, point):
        """
        Multi-index of the lattice node at ``point``; raises for off-lattice points.
        """
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.d,):
            raise GridError(f"point must have {self.d} coordinates, got {point.tolist()}")
        steps = (point + self.L) / self.h
        node = np.rint(steps)
        if np.any(np.abs(steps - node) > 1e-9) or np.any(node < 0) or np.any(node > self.n - 1):
            raise GridError(f"point {point.tolist()} is not a lattice node")
        return tuple(int(i) for i in node)

    def origin_flat(self, component=0):
        return self.flat_index(component, self.origin)

    def is_interior(self, node, axis):
        return 0 < node[axis] < self.n - 1

    def field_from_function(self, fn):
        """
        Sample ``fn(coords) -> (n**d,) or (n**d, N)`` into the flat physical layout
        """
        values = np.asarray(fn(self.coordinates))
        if self.N == 1 and values.ndim == 1:
            return values.copy()
        if values.shape != (self.n_nodes, self.N):
            raise GridError(f"function returned shape {values.shape}, expected ({self.n_nodes}, {self.N})")
        return values.T.reshape(-1).copy()

    def components(self, field):
        """Physical field as an array of shape (N, n, ..., n)."""
        return np.asarray(field).reshape((self.N,) + self.shape)

    def to_normalized(self, field):
        return np.sqrt(self.weight) * np.asarray(field)

    def from_normalized(self, field):
        return np.asarray(field) / np.sqrt(self.weight)


@dataclass(frozen=True)
class Functional:
    """
    Linear functional in weight-normalized coordinates, stored sparsely.

    ``apply(phi~)`` returns ``<l, phi~>``; the support is a set of flat indices.
    """

    size: int
    support: np.ndarray
    coefficients: np.ndarray

    def dense(self):
        vector = np.zeros(self.size)
        np.add.at(vector, self.support, self.coefficients)
        return vector

    def apply(self, field):
        field = np.asarray(field)
        return np.tensordot(self.coefficients, field[self.support], axes=(0, 0))


def build_grid(d, L, n, N=1):
    """
    Validated grid constructor (see ``Grid`` for the invariants)
    """
    return Grid(d=int(d), L=float(L), n=n, N=int(N))


def point_functional(grid, point, component=0, kind='value', axis=None):
    """
    Nodal evaluation or second-order central-difference functional.

    ``kind='value'`` gives ``phi_component(point)``; ``kind='derivative'``
    gives ``(phi(x + h e_axis) - phi(x - h e_axis)) / 2h``. Coefficients are
    scaled by ``1/sqrt(w)`` so the functional acts on normalized coordinates.
    """
    node = grid.node_index(point)
    scale = 1.0 / np.sqrt(grid.weight)

    if kind == 'value':
        support = np.array([grid.flat_index(component, node)])
        return Functional(grid.size, support, np.array([scale]))

    if kind != 'derivative':
        raise GridError(f"unknown functional kind {kind!r}")
    if axis is None or not 0 <= axis < grid.d:
        raise GridError(f"derivative functional needs an axis in [0, {grid.d}), got {axis!r}")
    if not grid.is_interior(node, axis):
        raise GridError(f"derivative along axis {axis} requested at boundary node {node}")

    forward = list(node)
    backward = list(node)
    forward[axis] += 1
    backward[axis] -= 1
    support = np.array([grid.flat_index(component, forward), grid.flat_index(component, backward)])
    coefficient = scale / (2.0 * grid.h)
    return Functional(grid.size, support, np.array([coefficient, -coefficient]))
