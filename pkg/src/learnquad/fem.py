"""Lowest-order Raviart-Thomas / P0 mixed finite elements for the flow cell.

The flow cell is Darcy flow on ``[-1, 1]**2`` with pressure ``(1 - x) / 2``
prescribed on the left and right sides, no flow through top and bottom and
no source. Flux unknowns live on edges: the degree of freedom of an edge is
the total flux across it in the direction of its global normal, which is the
edge tangent (from lower to higher vertex index) rotated clockwise.
"""

import csv
import os
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import EllipticityError, InvalidArgumentError, SolverError
from .levy import interpolate_bilinear

__all__ = [
    "Mesh",
    "MixedSystem",
    "FemSolution",
    "FlowCellProblem",
    "MESH_LEVELS",
    "generate_mesh",
    "mesh_for_level",
    "assemble",
    "solve",
    "qoi_flux",
    "boundary_fluxes",
    "solve_realization",
    "write_mesh",
    "append_result_csv",
]

INTERIOR, DIRICHLET_LEFT, DIRICHLET_RIGHT, NEUMANN_TOP, NEUMANN_BOTTOM = range(5)
TAG_NAMES = ("interior", "dirichlet_left", "dirichlet_right", "neumann_top", "neumann_bottom")

# Structured n x n meshes: 128, 2048 and 32768 triangles.
MESH_LEVELS = {"coarse": 8, "medium": 32, "fine": 128}

RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation with RT0 edge bookkeeping.

    Attributes
    ----------
    vertices : (nv, 2) array
    triangles : (nt, 3) int array, counterclockwise
    edges : (ne, 2) int array, ``edges[e, 0] < edges[e, 1]``
    tri_edges : (nt, 3) int array
        Global edge opposite each local vertex.
    tri_signs : (nt, 3) array of +-1
        +1 where the global edge normal points out of the triangle.
    edge_tags : (ne,) int array
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    tri_edges: np.ndarray
    tri_signs: np.ndarray
    edge_tags: np.ndarray

    @property
    def n_elements(self):
        return len(self.triangles)

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def edge_lengths(self):
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def edge_midpoints(self):
        return self.vertices[self.edges].mean(axis=1)

    @cached_property
    def quadrature_points(self):
        """Edge midpoints of every triangle, shape ``(nt, 3, 2)``."""
        return self.edge_midpoints[self.tri_edges]

    @cached_property
    def boundary_signs(self):
        """+1 where an edge's global normal is the outward domain normal, 0 inside."""
        signs = np.zeros(len(self.edges))
        boundary = self.edge_tags != INTERIOR
        # Boundary edges belong to exactly one triangle, so this assignment is unique.
        mask = boundary[self.tri_edges]
        signs[self.tri_edges[mask]] = self.tri_signs[mask]
        return signs

    @cached_property
    def _mass_geometry(self):
        # phi_k(x) = s_k (x - P_k) / (2|T|); tensor G[t, q, k, l] holds
        # (|T|/3) phi_k(m_q) . phi_l(m_q) so that A_T = sum_q a^-1(m_q) G[t, q].
        p = self.vertices[self.triangles]
        m = self.quadrature_points
        diff = m[:, :, None, :] - p[:, None, :, :]
        phi = self.tri_signs[:, None, :, None] * diff / (2 * self.areas[:, None, None, None])
        return (self.areas[:, None, None, None] / 3) * np.einsum("tqkd,tqld->tqkl", phi, phi)

    def summary(self):
        return {
            "vertices": len(self.vertices),
            "edges": len(self.edges),
            "triangles": len(self.triangles),
        }


def generate_mesh(n):
    """Uniform ``n x n`` squares on ``[-1, 1]**2``, each cut along the same diagonal."""
    if isinstance(n, bool) or int(n) != n or n < 2:
        raise InvalidArgumentError(f"mesh needs at least 2 cells per side, got {n!r}")
    n = int(n)
    x = np.linspace(-1.0, 1.0, n + 1)
    xx, yy = np.meshgrid(x, x, indexing="xy")
    vertices = np.stack([xx.ravel(), yy.ravel()], axis=1)
    # exact boundary coordinates for tagging
    vertices[np.isclose(vertices, 1.0)] = 1.0
    vertices[np.isclose(vertices, -1.0)] = -1.0

    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    p00 = (j * (n + 1) + i).ravel()
    p10, p01, p11 = p00 + 1, p00 + n + 1, p00 + n + 2
    triangles = np.concatenate([np.stack([p00, p10, p11], 1), np.stack([p00, p11, p01], 1)])

    local = np.stack(
        [triangles[:, [1, 2]], triangles[:, [2, 0]], triangles[:, [0, 1]]], axis=1
    )  # (nt, 3, 2): edge opposite local vertex k, traversed counterclockwise
    keyed = np.sort(local, axis=2).reshape(-1, 2)
    edges, inverse = np.unique(keyed, axis=0, return_inverse=True)
    tri_edges = inverse.reshape(-1, 3)
    # Counterclockwise traversal has the outward normal on its clockwise side,
    # the same rule that defines the global normal.
    tri_signs = np.where(local[:, :, 0] < local[:, :, 1], 1.0, -1.0)

    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    tags = np.full(len(edges), INTERIOR)
    mid = vertices[edges].mean(axis=1)
    on_boundary = counts == 1
    tags[on_boundary & (mid[:, 0] == -1.0)] = DIRICHLET_LEFT
    tags[on_boundary & (mid[:, 0] == 1.0)] = DIRICHLET_RIGHT
    tags[on_boundary & (mid[:, 1] == 1.0)] = NEUMANN_TOP
    tags[on_boundary & (mid[:, 1] == -1.0)] = NEUMANN_BOTTOM
    return Mesh(vertices, triangles, edges, tri_edges, tri_signs, tags)


@lru_cache(maxsize=8)
def mesh_for_level(level):
    """Mesh for ``"coarse"``, ``"medium"``, ``"fine"`` or an explicit cell count."""
    if isinstance(level, str):
        if level not in MESH_LEVELS:
            raise InvalidArgumentError(f"unknown mesh level {level!r}; expected {sorted(MESH_LEVELS)}")
        level = MESH_LEVELS[level]
    return generate_mesh(level)


def _dirichlet_pressure(points):
    return 0.5 * (1.0 - points[..., 0])


@dataclass(frozen=True, eq=False)
class FlowCellProblem:
    """Flow-cell boundary value problem on a given mesh.

    ``conductivity`` maps an ``(n, 2)`` array of points to ``n`` positive
    values.
    """

    mesh: Mesh
    conductivity: object
    dirichlet: object = _dirichlet_pressure

    @classmethod
    def constant(cls, mesh, value=1.0):
        return cls(mesh, lambda pts: np.full(len(pts), float(value)))


@dataclass(frozen=True, eq=False)
class MixedSystem:
    """Saddle-point blocks restricted to the free (non-Neumann) flux dofs.

    ``A`` is ``(nf, nf)``, ``B`` is ``(nf, nt)``; ``free`` lists the global
    edge numbers of the rows.
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    rhs_g: np.ndarray
    rhs_f: np.ndarray
    free: np.ndarray
    n_edges: int


@dataclass(frozen=True, eq=False)
class FemSolution:
    u_h: np.ndarray
    sigma_h: np.ndarray
    residual_norm: float


def assemble(problem):
    """Assemble the RT0/P0 saddle-point system.

    The coefficient ``1/a`` in the flux mass matrix is sampled at the three
    edge midpoints of each triangle (exact for quadratics when ``a`` is
    constant).

    Raises
    ------
    EllipticityError
        If the conductivity is not positive at some quadrature point.
    """
    mesh = problem.mesh
    nt = mesh.n_elements
    qp = mesh.quadrature_points.reshape(-1, 2)
    a = np.asarray(problem.conductivity(qp), dtype=float).reshape(-1)
    bad = np.flatnonzero(~(a > 0) | ~np.isfinite(a))
    if bad.size:
        raise EllipticityError(qp[bad[0]], float(a[bad[0]]))
    local = np.einsum("tq,tqkl->tkl", (1.0 / a).reshape(nt, 3), mesh._mass_geometry)

    ne = len(mesh.edges)
    rows = np.repeat(mesh.tri_edges, 3, axis=1).ravel()
    cols = np.tile(mesh.tri_edges, (1, 3)).ravel()
    a_full = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(ne, ne)).tocsr()
    # Integral over T of div(phi_k) is the outward flux s_k.
    b_full = sp.coo_matrix(
        (mesh.tri_signs.ravel(), (mesh.tri_edges.ravel(), np.repeat(np.arange(nt), 3))), shape=(ne, nt)
    ).tocsr()

    g = np.zeros(ne)
    dirichlet = np.isin(mesh.edge_tags, (DIRICHLET_LEFT, DIRICHLET_RIGHT))
    ends = mesh.vertices[mesh.edges[dirichlet]]
    # Simpson's rule for the edge mean of g_D; phi . n_out = sign / |e| on the edge.
    mean_g = (
        problem.dirichlet(ends[:, 0]) + 4 * problem.dirichlet(ends.mean(axis=1)) + problem.dirichlet(ends[:, 1])
    ) / 6
    g[dirichlet] = mesh.boundary_signs[dirichlet] * mean_g

    free = np.flatnonzero(~np.isin(mesh.edge_tags, (NEUMANN_TOP, NEUMANN_BOTTOM)))
    return MixedSystem(
        A=a_full[free][:, free],
        B=b_full[free],
        rhs_g=g[free],
        rhs_f=np.zeros(nt),
        free=free,
        n_edges=ne,
    )


def solve(system):
    """Solve ``[[A, B], [B^T, 0]] [sigma; u] = [g; -f]`` by sparse LU.

    One step of iterative refinement is applied if the first solve misses
    the residual tolerance.
    """
    nf, nt = system.B.shape
    k = sp.bmat([[system.A, system.B], [system.B.T, None]], format="csc")
    rhs = np.concatenate([system.rhs_g, -system.rhs_f])
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        x = np.zeros(nf + nt)
        residual = 0.0
    else:
        try:
            lu = spla.splu(k)
        except RuntimeError as exc:
            raise SolverError(f"factorization failed: {exc}") from exc
        x = lu.solve(rhs)
        residual = np.linalg.norm(k @ x - rhs) / scale
        if residual > RESIDUAL_TOL:
            x = x + lu.solve(rhs - k @ x)
            residual = np.linalg.norm(k @ x - rhs) / scale
        if not np.isfinite(residual) or residual > RESIDUAL_TOL:
            raise SolverError("saddle-point solve missed the residual tolerance", residual)
    sigma = np.zeros(system.n_edges)
    sigma[system.free] = x[:nf]
    return FemSolution(u_h=x[nf:], sigma_h=sigma, residual_norm=float(residual))


def boundary_fluxes(solution, problem):
    """Outward flux of ``sigma_h`` through each boundary side, keyed by tag name."""
    mesh = problem.mesh
    outward = mesh.boundary_signs * solution.sigma_h
    return {TAG_NAMES[t]: float(outward[mesh.edge_tags == t].sum()) for t in range(1, 5)}


def qoi_flux(solution, problem):
    """Return ``-integral of sigma_h . n`` over the right (outflow) side."""
    mesh = problem.mesh
    right = mesh.edge_tags == DIRICHLET_RIGHT
    return float(-np.sum(mesh.boundary_signs[right] * solution.sigma_h[right]))


def solve_realization(field, mesh_level="coarse", return_solution=False):
    """Flux QoI for the conductivity ``exp(field)``.

    ``field`` is a :class:`~learnquad.levy.LatticeField` on the torus
    covering the domain; it is bilinearly interpolated to the quadrature
    points. ``mesh_level`` is a level name, a cell count or a :class:`Mesh`.
    """
    mesh = mesh_level if isinstance(mesh_level, Mesh) else mesh_for_level(mesh_level)
    problem = FlowCellProblem(mesh, lambda pts: np.exp(interpolate_bilinear(field, pts)))
    solution = solve(assemble(problem))
    q = qoi_flux(solution, problem)
    return (q, solution, problem) if return_solution else q


def write_mesh(mesh, path):
    """Plain-text export with ``vertices``, ``triangles`` and ``edge-tags`` sections."""
    with open(path, "w") as fh:
        fh.write(f"vertices {len(mesh.vertices)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"triangles {len(mesh.triangles)}\n")
        for tri in mesh.triangles:
            fh.write(" ".join(map(str, tri)) + "\n")
        fh.write(f"edge-tags {len(mesh.edges)}\n")
        for (v0, v1), tag in zip(mesh.edges, mesh.edge_tags):
            fh.write(f"{v0} {v1} {TAG_NAMES[tag]}\n")


def append_result_csv(path, seed, mesh_level, q):
    """Append one ``seed,mesh_level,Q`` line, writing the header for a new file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new:
            writer.writerow(["seed", "mesh_level", "Q"])
        writer.writerow([seed, mesh_level, f"{q:.17g}"])
