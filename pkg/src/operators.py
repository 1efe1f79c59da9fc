"""
Discretized covariance operator, observables and the operator M = C^1/2 O C^1/2.

Every matrix here lives in weight-normalized coordinates (see ``grid``):
C~[(i,a),(j,b)] = sqrt(w_a) C_ij(x_a, x_b) sqrt(w_b), and a functional l acts
as <l, phi~>. Batches of fields are stored one field per row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import DimensionError, IndefiniteMatrixError, ResourceCapError, SymmetryError
from .grid import Functional, point_functional
from .kernels import ScalarKernel, TurbulenceKernel, eval_tensor

logger = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
IMAG_TOL = 1e-10
BLOCK_NODES = 16384


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix with provenance and structure flags."""

    matrix: np.ndarray
    label: str = ''
    symmetric: bool = False
    psd: Optional[bool] = None

    @property
    def dim(self):
        return self.matrix.shape[0]

    def columns(self, index):
        return self.matrix[:, index]

    def block(self, rows, cols):
        return self.matrix[np.ix_(rows, cols)]


def as_array(A):
    return A.matrix if isinstance(A, OperatorMatrix) else np.asarray(A)


class KernelCovariance:
    """
    Matrix-free view of C~ built from kernel evaluations.

    Only the requested columns or blocks are ever evaluated, so the low-rank
    spectral path works on grids whose dense C~ would not fit in memory.
    """

    def __init__(self, grid, kernel):
        _check_compatible(grid, kernel)
        self.grid = grid
        self.kernel = kernel
        self.label = f"C[{type(kernel).__name__}]"
        self._coords = grid.coordinates

    @property
    def dim(self):
        return self.grid.size

    def _split(self, index):
        index = np.atleast_1d(np.asarray(index, dtype=int))
        component, node = np.divmod(index, self.grid.n_nodes)
        nodes, at = np.unique(node, return_inverse=True)
        return component, nodes, at

    def block(self, rows, cols):
        row_comp, row_nodes, row_at = self._split(rows)
        col_comp, col_nodes, col_at = self._split(cols)
        col_x = self._coords[col_nodes]
        values = np.empty((row_comp.size, col_comp.size))
        # kernel evaluations are done per node pair, in chunks of rows
        order = np.argsort(row_at, kind='stable')
        bounds = np.searchsorted(row_at[order], np.arange(0, row_nodes.size + BLOCK_NODES, BLOCK_NODES))
        for chunk, start in enumerate(range(0, row_nodes.size, BLOCK_NODES)):
            picked = order[bounds[chunk]:bounds[chunk + 1]]
            local = row_at[picked] - start
            diff = self._coords[row_nodes[start:start + BLOCK_NODES]][:, None, :] - col_x[None, :, :]
            if isinstance(self.kernel, ScalarKernel):
                table = self.kernel.of_distance(np.sqrt(np.sum(diff * diff, axis=-1)))
                values[picked] = table[local][:, col_at]
            else:
                tensor = eval_tensor(self.kernel, diff)
                values[picked] = tensor[local[:, None], col_at[None, :], row_comp[picked][:, None], col_comp[None, :]]
        return self.grid.weight * values

    def columns(self, index):
        return self.block(np.arange(self.dim), index)

    def dense(self, max_dim=None):
        return assemble_covariance(self.grid, self.kernel, max_dim=max_dim)


def _check_compatible(grid, kernel):
    if isinstance(kernel, ScalarKernel):
        if grid.N != 1:
            raise DimensionError(f"scalar kernel needs N = 1 components, grid has N = {grid.N}")
    elif isinstance(kernel, TurbulenceKernel):
        if grid.N != 3 or grid.d != 3:
            raise DimensionError(f"turbulence kernel needs d = 3 and N = 3, grid has d = {grid.d}, N = {grid.N}")
    else:
        raise DimensionError(f"unsupported kernel type {type(kernel).__name__}")


def _check_cap(dim, max_dim):
    if max_dim is not None and dim > max_dim:
        raise ResourceCapError(f"dense dimension {dim} exceeds the configured cap {max_dim}")


def assemble_covariance(grid, kernel, max_dim=None, verify_psd=False):
    """
    Dense C~ for a grid and a scalar or turbulence kernel
    """
    _check_compatible(grid, kernel)
    _check_cap(grid.size, max_dim)

    coords = grid.coordinates
    diff = coords[:, None, :] - coords[None, :, :]
    if isinstance(kernel, ScalarKernel):
        matrix = kernel.of_distance(np.sqrt(np.sum(diff * diff, axis=-1)))
    else:
        P = grid.n_nodes
        tensor = eval_tensor(kernel, diff)
        # (a, b, i, j) -> (i, a, j, b) to match the component-major flat order
        matrix = tensor.transpose(2, 0, 3, 1).reshape(3 * P, 3 * P)
    matrix = grid.weight * matrix
    matrix = 0.5 * (matrix + matrix.T)

    psd = None
    if verify_psd:
        eigenvalues = linalg.eigvalsh(matrix)
        psd = bool(eigenvalues[0] >= -PSD_TOL * max(eigenvalues[-1], 0.0))
        if not psd:
            logger.warning("assembled covariance has eigenvalue %.3e below round-off", eigenvalues[0])
    logger.debug("assembled %s covariance of dimension %d", type(kernel).__name__, matrix.shape[0])
    return OperatorMatrix(matrix, label=f"C[{type(kernel).__name__}]", symmetric=True, psd=psd)


@dataclass(frozen=True)
class LowRankForm:
    """
    Observable O^S = F S F^T with F stored on its (small) support.

    ``coefficients`` has one row per support index and one column per
    functional; ``core`` is the symmetric r x r matrix S.
    """

    size: int
    support: np.ndarray
    coefficients: np.ndarray
    core: np.ndarray
    label: str = ''

    @property
    def dim(self):
        return self.size

    @property
    def rank(self):
        return self.core.shape[0]

    @property
    def F(self):
        dense = np.zeros((self.size, self.rank))
        dense[self.support] = self.coefficients
        return dense

    def dense(self):
        F = self.F
        return OperatorMatrix(F @ self.core @ F.T, label=self.label, symmetric=True)

    def project(self, fields):
        """F^T phi for one field or a batch (rows)."""
        fields = np.asarray(fields)
        return fields[..., self.support] @ self.coefficients


def low_rank_from_functionals(functionals, core, label=''):
    core = np.asarray(core, dtype=float)
    if core.shape != (len(functionals), len(functionals)):
        raise DimensionError(f"core shape {core.shape} does not match {len(functionals)} functionals")
    if not np.allclose(core, core.T, rtol=0.0, atol=SYMMETRY_TOL * max(np.abs(core).max(), 1.0)):
        raise SymmetryError("low-rank core must be symmetric")
    size = functionals[0].size
    support = np.unique(np.concatenate([fn.support for fn in functionals]))
    position = {int(index): row for row, index in enumerate(support)}
    coefficients = np.zeros((support.size, len(functionals)))
    for column, fn in enumerate(functionals):
        for index, value in zip(fn.support, fn.coefficients):
            coefficients[position[int(index)], column] += value
    return LowRankForm(size, support, coefficients, 0.5 * (core + core.T), label)


def observable_point_intensity(grid, point):
    """
    Q(phi) = sum_i |phi_i(point)|^2 as a rank-N form with S = I
    """
    functionals = [point_functional(grid, point, component=i) for i in range(grid.N)]
    return low_rank_from_functionals(functionals, np.eye(grid.N), label='point-intensity')


def curl_functionals(grid, point):
    """
    Functionals for (curl v)_i at ``point`` from central differences
    """
    def derivative(component, axis):
        return point_functional(grid, point, component=component, kind='derivative', axis=axis)

    curls = []
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        plus = derivative(k, j)
        minus = derivative(j, k)
        # (curl v)_i = d_j v_k - d_k v_j with (i, j, k) cyclic
        curls.append(Functional(
            grid.size,
            np.concatenate([plus.support, minus.support]),
            np.concatenate([plus.coefficients, -minus.coefficients]),
        ))
    return curls


def observable_helicity(grid):
    """
    Local helicity h(0) = v(0) . (curl v)(0) as a rank-6 form.

    F = [a_1, a_2, a_3, c_1, c_2, c_3] with a_i = v_i(0), c_i = (curl v)_i(0);
    S = [[0, I/2], [I/2, 0]], signature (3, 3).
    """
    if grid.d != 3 or grid.N != 3:
        raise DimensionError(f"helicity needs d = 3 and N = 3, grid has d = {grid.d}, N = {grid.N}")
    origin = np.zeros(3)
    values = [point_functional(grid, origin, component=i) for i in range(3)]
    curls = curl_functionals(grid, origin)
    half = 0.5 * np.eye(3)
    zero = np.zeros((3, 3))
    core = np.block([[zero, half], [half, zero]])
    return low_rank_from_functionals(values + curls, core, label='helicity')


def local_helicity(grid, field):
    """
    Direct stencil value of v(0) . (curl v)(0) for a physical field (flat layout)
    """
    v = grid.components(field)
    o = grid.origin
    h = grid.h

    def d(component, axis):
        forward = list(o)
        backward = list(o)
        forward[axis] += 1
        backward[axis] -= 1
        return (v[component][tuple(forward)] - v[component][tuple(backward)]) / (2.0 * h)

    v0 = [v[i][o] for i in range(3)]
    return (np.conj(v0[0]) * (d(2, 1) - d(1, 2))
            + np.conj(v0[1]) * (d(0, 2) - d(2, 0))
            + np.conj(v0[2]) * (d(1, 0) - d(0, 1)))


def symmetrize(O):
    """
    Symmetric part (O + O^T) / 2; quadratic-form values are unchanged
    """
    if isinstance(O, LowRankForm):
        return O
    matrix = as_array(O)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"symmetrize needs a square matrix, got shape {matrix.shape}")
    label = O.label if isinstance(O, OperatorMatrix) else ''
    return OperatorMatrix(0.5 * (matrix + matrix.T), label=label, symmetric=True)


def negate(O):
    """
    -O, so that lower-tail conditioning Q < -u becomes upper-tail conditioning
    """
    if isinstance(O, LowRankForm):
        return LowRankForm(O.size, O.support, O.coefficients, -O.core, f"-{O.label}")
    matrix = as_array(O)
    label = O.label if isinstance(O, OperatorMatrix) else ''
    symmetric = O.symmetric if isinstance(O, OperatorMatrix) else False
    return OperatorMatrix(-matrix, label=f"-{label}", symmetric=symmetric)


def check_symmetric(matrix, what='matrix'):
    matrix = as_array(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DimensionError(f"{what} must be square, got shape {matrix.shape}")
    scale = max(np.abs(matrix).max(), np.finfo(float).tiny)
    defect = np.abs(matrix - matrix.T).max()
    if defect > SYMMETRY_TOL * scale:
        raise SymmetryError(f"{what} is not symmetric (defect {defect:.3e})")
    return matrix


def sqrt_psd(C):
    """
    Symmetric PSD square root by eigendecomposition, clipping round-off negatives
    """
    matrix = check_symmetric(C, 'covariance')
    eigenvalues, vectors = linalg.eigh(matrix)
    top = max(eigenvalues[-1], 0.0)
    if eigenvalues[0] < -PSD_TOL * top:
        raise IndefiniteMatrixError(
            f"matrix is materially indefinite: min eigenvalue {eigenvalues[0]:.3e}, max {top:.3e}")
    roots = np.sqrt(np.clip(eigenvalues, 0.0, None))
    root = (vectors * roots) @ vectors.T
    root = 0.5 * (root + root.T)
    label = C.label if isinstance(C, OperatorMatrix) else 'C'
    return OperatorMatrix(root, label=f"sqrt({label})", symmetric=True, psd=True)


def build_M(C, O, C_half=None):
    """
    M = C^1/2 O^S C^1/2; for a low-rank O this is (C^1/2 F) S (C^1/2 F)^T
    """
    if C_half is None:
        C_half = sqrt_psd(C)
    root = as_array(C_half)
    if O.dim != root.shape[0]:
        raise DimensionError(f"observable dimension {O.dim} does not match covariance dimension {root.shape[0]}")

    if isinstance(O, LowRankForm):
        B = root[:, O.support] @ O.coefficients
        matrix = B @ O.core @ B.T
    else:
        matrix = root @ check_symmetric(O, 'observable') @ root
    matrix = 0.5 * (matrix + matrix.T)
    label = getattr(O, 'label', '')
    return OperatorMatrix(matrix, label=f"M[{label}]", symmetric=True)


def quadratic_form(O, phi):
    """
    Q = <phi| O |phi> (conjugate on the left) for one field or a batch of rows
    """
    phi = np.asarray(phi)
    if phi.shape[-1] != O.dim:
        raise DimensionError(f"field dimension {phi.shape[-1]} does not match operator dimension {O.dim}")

    if isinstance(O, LowRankForm):
        y = O.project(phi)
        value = np.einsum('...a,ab,...b->...', np.conj(y), O.core, y)
        scale = np.sum(np.abs(y) ** 2, axis=-1) * np.abs(O.core).max()
    else:
        matrix = as_array(O)
        value = np.einsum('...a,ab,...b->...', np.conj(phi), matrix, phi)
        scale = np.sum(np.abs(phi) ** 2, axis=-1) * np.abs(matrix).max()

    if np.iscomplexobj(value):
        residue = np.abs(value.imag)
        if np.any(residue > IMAG_TOL * np.maximum(scale, np.finfo(float).tiny)):
            raise SymmetryError("quadratic form has a non-negligible imaginary part; operator is not Hermitian")
        value = value.real
    return value if value.ndim else float(value)
