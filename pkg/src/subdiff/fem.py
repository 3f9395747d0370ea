"""P1 finite elements on a uniform triangulation of the square (-1, 1)^2.

The square is cut into K x K cells of side h = 2/K and every cell is split
along its bottom-left to top-right diagonal, giving 2 K^2 triangles.  Zero
Dirichlet values are eliminated at assembly, so matrices and nodal vectors
live on the (K-1)^2 interior nodes, numbered lexicographically (x fastest).
Grid functions are plain float ndarrays of that length.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, NumericsError

__all__ = [
    "Mesh2D",
    "FemSystem",
    "build_mesh",
    "assemble",
    "load_vector",
    "load_vector_from_cell_values",
    "l2_project",
    "ritz_project",
    "l2_norm",
    "weighted_norm",
    "l2_error_vs_function",
    "write_matrix_coo",
]

# 6-point triangle rule, exact for polynomials of degree <= 4.
_QUAD_BARY = np.array([
    [0.108103018168070, 0.445948490915965, 0.445948490915965],
    [0.445948490915965, 0.108103018168070, 0.445948490915965],
    [0.445948490915965, 0.445948490915965, 0.108103018168070],
    [0.816847572980459, 0.091576213509771, 0.091576213509771],
    [0.091576213509771, 0.816847572980459, 0.091576213509771],
    [0.091576213509771, 0.091576213509771, 0.816847572980459],
])
_QUAD_W = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


class Mesh2D:
    """Uniform triangulation of (-1,1)^2 with K subdivisions per side.

    Attributes
    ----------
    K, h : resolution and mesh size h = 2/K.
    coords : (K+1)^2 x 2 node coordinates, node q = iy*(K+1) + ix.
    triangles : (2K^2, 3) vertex indices, counterclockwise.
    interior_of_full : full-node index -> interior index, -1 on the boundary.
    full_of_interior : interior index -> full-node index.
    """

    def __init__(self, K: int):
        if not (isinstance(K, (int, np.integer)) and K >= 2 and K % 2 == 0):
            raise ConfigurationError(f"K must be an even integer >= 2, got {K}")
        self.K = int(K)
        self.h = 2.0 / K
        xs = -1.0 + self.h * np.arange(K + 1)
        X, Y = np.meshgrid(xs, xs, indexing="xy")
        self.coords = np.column_stack([X.ravel(), Y.ravel()])

        ix, iy = np.meshgrid(np.arange(K), np.arange(K), indexing="xy")
        ix = ix.ravel()
        iy = iy.ravel()
        n00 = iy * (K + 1) + ix
        n10 = n00 + 1
        n01 = n00 + (K + 1)
        n11 = n01 + 1
        tris = np.empty((2 * K * K, 3), dtype=np.int64)
        tris[0::2] = np.column_stack([n00, n10, n11])  # below the diagonal
        tris[1::2] = np.column_stack([n00, n11, n01])  # above the diagonal
        self.triangles = tris

        fx = np.arange((K + 1) ** 2) % (K + 1)
        fy = np.arange((K + 1) ** 2) // (K + 1)
        interior = (fx > 0) & (fx < K) & (fy > 0) & (fy < K)
        self.interior_of_full = np.where(
            interior, np.cumsum(interior) - 1, -1).astype(np.int64)
        self.full_of_interior = np.flatnonzero(interior)
        self.n_interior = int(interior.sum())

    def interior_coords(self) -> np.ndarray:
        return self.coords[self.full_of_interior]

    def _geometry(self):
        """Per-triangle gradient coefficients and areas.

        For vertices p0,p1,p2 the P1 basis gradients are
        grad(phi_k) = (b_k, c_k) / (2 A); b, c come from edge differences.
        """
        p = self.coords[self.triangles]
        x = p[:, :, 0]
        y = p[:, :, 1]
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
        return p, b, c, area


def build_mesh(K: int) -> Mesh2D:
    return Mesh2D(K)


@dataclass(frozen=True)
class FemSystem:
    """Interior-node mass and stiffness matrices for A = -c_A * Laplacian."""

    mesh: Mesh2D
    c_A: float
    M: sp.csr_matrix
    S: sp.csr_matrix

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    def system_matrix(self, tau: float, alpha: float) -> sp.csr_matrix:
        """Per-step operator M + tau^alpha S."""
        return (self.M + tau ** alpha * self.S).tocsr()


def assemble(mesh: Mesh2D, c_A: float) -> FemSystem:
    """Assemble mass and stiffness over interior nodes.

    Element matrices are the exact P1 formulas: mass area/12 * (1 + I),
    stiffness (b b' + c c')/(4 area) scaled by c_A.  Assembly order is fixed,
    so results are bit-reproducible.
    """
    if not c_A > 0.0:
        raise ConfigurationError(f"diffusivity must be positive, got {c_A}")
    _, b, c, area = mesh._geometry()
    Ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :])
    Ke = c_A * Ke / (4.0 * area)[:, None, None]
    Me = area[:, None, None] * ((np.ones((3, 3)) + np.eye(3)) / 12.0)[None, :, :]

    idx = mesh.interior_of_full[mesh.triangles]
    rows = np.repeat(idx, 3, axis=1).ravel()
    cols = np.tile(idx, (1, 3)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = mesh.n_interior
    S = sp.coo_matrix((Ke.ravel()[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel()[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    S.sum_duplicates()
    M.sum_duplicates()
    S.sort_indices()
    M.sort_indices()
    return FemSystem(mesh=mesh, c_A=float(c_A), M=M, S=S)


def _quad_points(mesh: Mesh2D):
    """Physical quadrature points, shape (nq, ntri, 2)."""
    p = mesh.coords[mesh.triangles]
    return np.einsum("qk,ekd->qed", _QUAD_BARY, p)


def load_vector(mesh: Mesh2D, g) -> np.ndarray:
    """Interior load vector F_i = integral of g * phi_i, 6-point rule per triangle.

    ``g(x, y)`` must accept equal-shaped arrays and return an array; values
    must be finite.
    """
    p, _, _, area = mesh._geometry()
    pts = _quad_points(mesh)
    Fe = np.zeros((len(mesh.triangles), 3))
    for q, w in enumerate(_QUAD_W):
        gv = np.asarray(g(pts[q, :, 0], pts[q, :, 1]), dtype=float)
        if gv.shape != (len(mesh.triangles),):
            gv = np.broadcast_to(gv, (len(mesh.triangles),))
        Fe += (w * area * gv)[:, None] * _QUAD_BARY[q][None, :]
    if not np.all(np.isfinite(Fe)):
        raise ValueError("load function produced non-finite values")
    return _scatter_to_interior(mesh, Fe)


def load_vector_from_cell_values(mesh: Mesh2D, values: np.ndarray) -> np.ndarray:
    """Load vector for a function that is constant on each triangle.

    Exact: integral of phi_i over a triangle is area/3 for each vertex.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (len(mesh.triangles),):
        raise ValueError(
            f"expected one value per triangle ({len(mesh.triangles)}), got {values.shape}")
    _, _, _, area = mesh._geometry()
    Fe = (values * area / 3.0)[:, None] * np.ones((1, 3))
    return _scatter_to_interior(mesh, Fe)


def _scatter_to_interior(mesh: Mesh2D, Fe: np.ndarray) -> np.ndarray:
    F = np.zeros(mesh.n_interior)
    idx = mesh.interior_of_full[mesh.triangles]
    keep = idx >= 0
    np.add.at(F, idx[keep], Fe[keep])
    return F


def _solve_spd(A: sp.csr_matrix, rhs: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    x = spla.splu(A.tocsc()).solve(rhs)
    nrhs = np.linalg.norm(rhs)
    if nrhs > 0 and np.linalg.norm(rhs - A @ x) > rel_tol * nrhs:
        raise NumericsError("projection solve missed its residual tolerance")
    return x


def l2_project(sys: FemSystem, g) -> np.ndarray:
    """L2 projection of g onto the interior P1 space: solve M x = F(g)."""
    return _solve_spd(sys.M, load_vector(sys.mesh, g))


def ritz_project(sys: FemSystem, av=None, grad=None) -> np.ndarray:
    """Energy projection of v, from either Av or grad v.

    Exactly one of ``av`` (the full operator -c_A Lap v applied to v) or
    ``grad`` must be given; the two right-hand sides agree by integration by
    parts for v vanishing on the boundary.  ``grad`` is either a callable
    returning the pair (dv/dx, dv/dy) or an (ntriangles, 2) array of
    cellwise-constant gradients.
    """
    if (av is None) == (grad is None):
        raise ConfigurationError("pass exactly one of av= or grad=")
    if av is not None:
        G = load_vector(sys.mesh, av)
    else:
        mesh = sys.mesh
        _, b, c, area = mesh._geometry()
        Ge = np.zeros((len(mesh.triangles), 3))
        if callable(grad):
            pts = _quad_points(mesh)
            for q, w in enumerate(_QUAD_W):
                gx, gy = grad(pts[q, :, 0], pts[q, :, 1])
                gx = np.asarray(gx, dtype=float)
                gy = np.asarray(gy, dtype=float)
                # area * grad(phi_k) = (b_k, c_k)/2 cancels the rule's area factor
                Ge += (w / 2.0) * (gx[:, None] * b + gy[:, None] * c)
        else:
            gc = np.asarray(grad, dtype=float)
            if gc.shape != (len(mesh.triangles), 2):
                raise ValueError(
                    f"cellwise gradient must have shape ({len(mesh.triangles)}, 2), "
                    f"got {gc.shape}")
            Ge = 0.5 * (gc[:, :1] * b + gc[:, 1:] * c)
        if not np.all(np.isfinite(Ge)):
            raise ValueError("gradient data produced non-finite values")
        G = sys.c_A * _scatter_to_interior(mesh, Ge)
    return _solve_spd(sys.S, G)


def l2_norm(sys: FemSystem, x: np.ndarray) -> float:
    """Mass-matrix norm, equal to the L2 norm of the P1 interpolant."""
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(max(x @ (sys.M @ x), 0.0)))


def weighted_norm(sys: FemSystem, tau: float, alpha: float, x: np.ndarray) -> float:
    """Energy-like norm sqrt(x' (M + tau^alpha S) x) used by the inner solver."""
    x = np.asarray(x, dtype=float)
    val = x @ (sys.M @ x) + tau ** alpha * (x @ (sys.S @ x))
    return float(np.sqrt(max(val, 0.0)))


def l2_error_vs_function(sys: FemSystem, x: np.ndarray, u) -> float:
    """L2 distance between the P1 function with nodal values x and u(x, y)."""
    mesh = sys.mesh
    _, _, _, area = mesh._geometry()
    pts = _quad_points(mesh)
    full = np.zeros(len(mesh.coords))
    full[mesh.full_of_interior] = x
    nodal = full[mesh.triangles]
    acc = np.zeros(len(mesh.triangles))
    for q, w in enumerate(_QUAD_W):
        uh = nodal @ _QUAD_BARY[q]
        ue = np.asarray(u(pts[q, :, 0], pts[q, :, 1]), dtype=float)
        acc += w * (uh - ue) ** 2
    return float(np.sqrt(np.sum(acc * area)))


def write_matrix_coo(mat: sp.spmatrix, path) -> None:
    """Dump a sparse matrix as text: 'rows cols nnz' header then 'i j value' lines."""
    coo = mat.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
