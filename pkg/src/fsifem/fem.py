"""Reference-element machinery for the P2/P1 Taylor-Hood pair.

Shape functions live on the reference triangle {xi >= 0, eta >= 0,
xi + eta <= 1}; all element matrices are computed with quadrature rules
that are exact for the (polynomial) integrands.  Vector degrees of freedom
interleave the two components per node: dof = 2*node + component, with
component 0 = x and 1 = y.  This convention is fixed and shows up in every
exported coefficient file.

Bundled rules: degree 6 for system matrices (integrands are at most
degree 4 under affine maps), degree 12 for manufactured-data load vectors
(cross-checked against a higher-order rule; the residual effect sits at
the direct-solver tolerance), and degree 38 for error norms (exact for
squared manufactured-solution errors).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import mesh as meshmod

SYSTEM_QUAD_DEGREE = 6
DATA_QUAD_DEGREE = 12
# squared manufactured-solution errors are polynomials of degree 38; the
# error-norm rule is exact for them
ERROR_QUAD_DEGREE = 38

FORMS = ("fluid_mass", "fluid_strain", "divergence", "solid_mass", "solid_stiffness")


@dataclass(frozen=True)
class MaterialParams:
    """Lame moduli of the solid and the resolvent shift."""

    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    shift: float = 1.0

    def __post_init__(self):
        if not self.lame_mu > 0:
            raise ValueError(f"lame_mu must be positive, got {self.lame_mu}")
        if self.lame_lambda < 0:
            raise ValueError(f"lame_lambda must be nonnegative, got {self.lame_lambda}")
        if not self.shift > 0:
            raise ValueError(f"shift must be positive, got {self.shift}")


@dataclass(frozen=True)
class QuadratureRule:
    """Points in barycentric coordinates, weights summing to area 1/2."""

    degree: int
    points: np.ndarray   # (nq, 3)
    weights: np.ndarray  # (nq,)


def gauss_legendre_01(npts):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Quadrature exact for total degree `degree`, via the collapsed
    (Duffy) tensor product of Gauss-Legendre rules.

    With xi = s*(1-t), eta = t the Jacobian is (1-t), so exactness needs
    ceil((degree+1)/2) points in s and ceil((degree+2)/2) in t.
    """
    if degree < 0:
        raise ValueError("quadrature degree must be nonnegative")
    ns = (degree + 2) // 2
    nt = (degree + 3) // 2
    s, ws = gauss_legendre_01(ns)
    t, wt = gauss_legendre_01(nt)
    S, T = np.meshgrid(s, t, indexing="ij")
    WS, WT = np.meshgrid(ws, wt, indexing="ij")
    xi = (S * (1.0 - T)).ravel()
    eta = T.ravel()
    w = (WS * WT * (1.0 - T)).ravel()
    bary = np.column_stack([1.0 - xi - eta, xi, eta])
    return QuadratureRule(degree=degree, points=bary, weights=w)


def p2_values(bary):
    """P2 shape values at barycentric points; order v0 v1 v2 m01 m12 m20."""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
    ])


_GRAD_L = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # d(lambda_k)/d(xi,eta)


def p2_grads(bary):
    """Reference gradients of the P2 basis, shape (nq, 6, 2)."""
    nq = bary.shape[0]
    g = np.empty((nq, 6, 2))
    for k in range(3):
        g[:, k, :] = (4 * bary[:, k, None] - 1) * _GRAD_L[k]
    pairs = [(0, 1), (1, 2), (2, 0)]
    for m, (a, b) in enumerate(pairs):
        g[:, 3 + m, :] = 4 * (bary[:, a, None] * _GRAD_L[b] + bary[:, b, None] * _GRAD_L[a])
    return g


def p1_values(bary):
    return bary.copy()


def p1_grads():
    return _GRAD_L.copy()


class TaylorHoodSpace:
    """DOF bookkeeping for the coupled discretization.

    Fluid velocity: vector P2 on fluid triangles, rows on Gamma_f
    constrained to zero.  Pressure: scalar P1 on fluid vertices, constants
    included.  Solid displacement: vector P2 on solid triangles.  The
    interface map pairs fluid and solid P2 nodes on Gamma_s (they share the
    global node numbering of the conforming mesh, so the map is a common
    sorted node list with per-field local indices).
    """

    def __init__(self, mesh: meshmod.TriMesh):
        self.mesh = mesh
        self._cache = {}
        nv = mesh.num_vertices

        # global scalar P2 nodes: vertices then edge midpoints
        edge_key = mesh.edges[:, 0] * nv + mesh.edges[:, 1]
        order = np.argsort(edge_key)
        self._edge_key_sorted = edge_key[order]
        self._edge_perm = order
        mid_xy = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
        self.node_xy = np.vstack([mesh.vertices, mid_xy])
        self.num_nodes = nv + mesh.edges.shape[0]

        tri = mesh.triangles
        self.tri_nodes = np.column_stack([
            tri,
            nv + self._edge_index(tri[:, 0], tri[:, 1]),
            nv + self._edge_index(tri[:, 1], tri[:, 2]),
            nv + self._edge_index(tri[:, 2], tri[:, 0]),
        ])

        self.fluid_tris = np.flatnonzero(mesh.tri_region == meshmod.FLUID)
        self.solid_tris = np.flatnonzero(mesh.tri_region == meshmod.SOLID)

        self.fluid_nodes = np.unique(self.tri_nodes[self.fluid_tris])
        self.solid_nodes = np.unique(self.tri_nodes[self.solid_tris])
        self.fluid_loc = _inverse_map(self.fluid_nodes, self.num_nodes)
        self.solid_loc = _inverse_map(self.solid_nodes, self.num_nodes)

        self.num_velocity_dofs = 2 * self.fluid_nodes.size
        self.num_solid_dofs = 2 * self.solid_nodes.size

        # pressure space: P1 on fluid vertices
        self.pressure_nodes = self.fluid_nodes[self.fluid_nodes < nv]
        self.pressure_loc = _inverse_map(self.pressure_nodes, nv)
        self.num_pressure_dofs = self.pressure_nodes.size

        # boundary node sets from edge tags
        gf = mesh.edge_tag == meshmod.GAMMA_F
        gs = mesh.edge_tag == meshmod.GAMMA_S
        self.gamma_f_nodes = np.unique(np.concatenate([
            mesh.edges[gf].ravel(), nv + np.flatnonzero(gf)]))
        self.iface_nodes = np.unique(np.concatenate([
            mesh.edges[gs].ravel(), nv + np.flatnonzero(gs)]))

        constrained = np.zeros(self.num_velocity_dofs, dtype=bool)
        gf_loc = self.fluid_loc[self.gamma_f_nodes]
        constrained[2 * gf_loc] = True
        constrained[2 * gf_loc + 1] = True
        self.constrained_mask = constrained
        self.free_velocity_dofs = np.flatnonzero(~constrained)
        self.free_loc = _inverse_map(self.free_velocity_dofs, self.num_velocity_dofs)
        self.num_free_velocity_dofs = self.free_velocity_dofs.size

        # interface dofs in each field's numbering (interleaved x,y)
        fl = self.fluid_loc[self.iface_nodes]
        sl = self.solid_loc[self.iface_nodes]
        if np.any(fl < 0) or np.any(sl < 0):
            raise RuntimeError("interface node missing from a region's node set")
        self.iface_velocity_dofs = np.column_stack([2 * fl, 2 * fl + 1]).ravel()
        self.iface_solid_dofs = np.column_stack([2 * sl, 2 * sl + 1]).ravel()
        self.iface_free_dofs = self.free_loc[self.iface_velocity_dofs]
        if np.any(self.iface_free_dofs < 0):
            raise RuntimeError("interface dof unexpectedly constrained (Gamma_f and "
                               "Gamma_s are disjoint)")
        self.num_iface_dofs = self.iface_velocity_dofs.size

        solid_iface_mask = np.zeros(self.num_solid_dofs, dtype=bool)
        solid_iface_mask[self.iface_solid_dofs] = True
        self.solid_interior_dofs = np.flatnonzero(~solid_iface_mask)

        # interface edges: scalar node triplets, outward (fluid-side) normals
        self._build_iface_edges(gs)

    def _edge_index(self, a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key = lo * self.mesh.num_vertices + hi
        pos = np.searchsorted(self._edge_key_sorted, key)
        return self._edge_perm[pos]

    def _build_iface_edges(self, gs_mask):
        m = self.mesh
        n, s = m.n, m.n // 3
        eids = np.flatnonzero(gs_mask)
        v0, v1 = m.edges[eids, 0], m.edges[eids, 1]
        i0, j0 = m.vertex_ij(v0)
        normals = np.zeros((eids.size, 2))
        vertical = i0 == (m.edges[eids, 1] % (n + 1))
        # normal points out of the fluid, into the solid
        normals[vertical & (i0 == s)] = (1.0, 0.0)
        normals[vertical & (i0 == 2 * s)] = (-1.0, 0.0)
        horizontal = ~vertical
        normals[horizontal & (j0 == s)] = (0.0, 1.0)
        normals[horizontal & (j0 == 2 * s)] = (0.0, -1.0)
        self.iface_edge_nodes = np.column_stack([
            v0, v1, m.num_vertices + eids])          # scalar global nodes
        self.iface_edge_normals = normals
        self.iface_edge_length = 1.0 / n
        # position of each edge node inside self.iface_nodes
        self.iface_node_pos = _inverse_map(self.iface_nodes, self.num_nodes)

    # -- convenience views -------------------------------------------------

    def velocity_dofs_of_tris(self, tris):
        """(ntris, 12) full-velocity dof table, interleaved components."""
        loc = self.fluid_loc[self.tri_nodes[tris]]
        return np.stack([2 * loc, 2 * loc + 1], axis=2).reshape(len(tris), 12)

    def solid_dofs_of_tris(self, tris):
        loc = self.solid_loc[self.tri_nodes[tris]]
        return np.stack([2 * loc, 2 * loc + 1], axis=2).reshape(len(tris), 12)

    def expand_velocity(self, u_free):
        """Scatter a free-dof vector to the full velocity layout."""
        u = np.zeros(self.num_velocity_dofs)
        u[self.free_velocity_dofs] = u_free
        return u


def _inverse_map(ids, size):
    inv = np.full(size, -1, dtype=np.int64)
    inv[ids] = np.arange(ids.size)
    return inv


def build_space(mesh: meshmod.TriMesh) -> TaylorHoodSpace:
    """Number all degrees of freedom of the coupled Taylor-Hood space."""
    return TaylorHoodSpace(mesh)


# ---------------------------------------------------------------------------
# element geometry and batched local matrices
# ---------------------------------------------------------------------------

def _tri_geometry(space, tris):
    """Jacobian data for a batch of triangles."""
    v = space.mesh.vertices[space.mesh.triangles[tris]]   # (nt, 3, 2)
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    inv = np.empty((len(tris), 2, 2))
    inv[:, 0, 0] = e2[:, 1]
    inv[:, 0, 1] = -e2[:, 0]
    inv[:, 1, 0] = -e1[:, 1]
    inv[:, 1, 1] = e1[:, 0]
    inv /= det[:, None, None]
    return v, det, inv


def _phys_grads(space, tris, rule):
    v, det, inv = _tri_geometry(space, tris)
    gref = p2_grads(rule.points)                 # (nq, 6, 2)
    g = np.einsum("qib,tba->tqia", gref, inv)    # physical gradients
    return v, det, g


def _local_vector_mass(det, mref):
    nt = det.size
    out = np.zeros((nt, 12, 12))
    m = det[:, None, None] * mref[None, :, :]
    out[:, 0::2, 0::2] = m
    out[:, 1::2, 1::2] = m
    return out


def _local_strain(det, g, w, mu_factor=1.0):
    """eps(u):eps(v) local matrices, (nt, 12, 12)."""
    e1 = np.einsum("q,tqic,tqjc->tij", w, g, g)       # grad . grad
    t2 = np.einsum("q,tqib,tqja->tiajb", w, g, g)     # d_b Ni d_a Nj at (ia, jb)
    nt = det.size
    out = np.zeros((nt, 12, 12))
    half = 0.5 * mu_factor
    for a in range(2):
        for b in range(2):
            blk = half * t2[:, :, a, :, b]
            if a == b:
                blk = blk + half * e1
            out[:, a::2, b::2] = blk
    return out * det[:, None, None]


def _local_div_div(det, g, w):
    d = np.einsum("q,tqia,tqjb->tiajb", w, g, g)
    nt = det.size
    out = np.zeros((nt, 12, 12))
    for a in range(2):
        for b in range(2):
            out[:, a::2, b::2] = d[:, :, a, :, b]
    return out * det[:, None, None]


def _local_divergence(det, g, rule):
    """b(v, mu) = -(mu, div v) local blocks, (nt, 3, 12)."""
    p1 = p1_values(rule.points)                        # (nq, 3)
    b = -np.einsum("q,qp,tqia->tpia", rule.weights, p1, g)
    nt = det.size
    return (b * det[:, None, None, None]).reshape(nt, 3, 12)


@lru_cache(maxsize=None)
def _p2_mass_ref(degree=SYSTEM_QUAD_DEGREE):
    rule = triangle_rule(degree)
    n = p2_values(rule.points)
    return np.einsum("q,qi,qj->ij", rule.weights, n, n)


def _local_matrices(space, tris, params, form):
    rule = triangle_rule(SYSTEM_QUAD_DEGREE)
    if form in ("fluid_mass", "solid_mass"):
        _, det, _ = _tri_geometry(space, tris)
        return _local_vector_mass(det, _p2_mass_ref())
    _, det, g = _phys_grads(space, tris, rule)
    if form == "fluid_strain":
        return _local_strain(det, g, rule.weights)
    if form == "divergence":
        return _local_divergence(det, g, rule)
    if form == "solid_stiffness":
        # (sigma(u), eps(v)) = lambda (div u, div v) + 2 mu (eps u, eps v)
        return (params.lame_lambda * _local_div_div(det, g, rule.weights)
                + _local_strain(det, g, rule.weights, mu_factor=2.0 * params.lame_mu))
    raise ValueError(f"unknown form {form!r}")


def element_matrices(space, tri, params: MaterialParams, form: str):
    """Local matrix of one bilinear form on one triangle.

    Vector forms give a 12x12 matrix in the interleaved layout; the mixed
    `divergence` form gives 3x12 (pressure rows, velocity columns).
    """
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}, got {form!r}")
    region = space.mesh.tri_region[tri]
    wants_solid = form.startswith("solid")
    if wants_solid != (region == meshmod.SOLID):
        raise ValueError(
            f"form {form!r} incompatible with triangle {tri} in region "
            f"{meshmod.REGION_NAMES[region]}")
    return _local_matrices(space, np.array([tri]), params, form)[0]


# ---------------------------------------------------------------------------
# global assembly
# ---------------------------------------------------------------------------

def _scatter_square(local, dofs, size):
    nt, nl, _ = local.shape
    rows = np.repeat(dofs, nl, axis=1).ravel()
    cols = np.tile(dofs, (1, nl)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def _scatter_rect(local, row_dofs, col_dofs, shape):
    nt, nr, nc = local.shape
    rows = np.repeat(row_dofs, nc, axis=1).ravel()
    cols = np.tile(col_dofs, (1, nr)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    mat.sort_indices()
    return mat


def assemble_fluid_mass(space, params=None):
    tris = space.fluid_tris
    local = _local_matrices(space, tris, params, "fluid_mass")
    return _scatter_square(local, space.velocity_dofs_of_tris(tris), space.num_velocity_dofs)


def assemble_fluid_strain(space, params=None):
    tris = space.fluid_tris
    local = _local_matrices(space, tris, params, "fluid_strain")
    return _scatter_square(local, space.velocity_dofs_of_tris(tris), space.num_velocity_dofs)


def assemble_fluid_grad(space):
    """Full-gradient Gram matrix (grad u, grad v) on the fluid, for H1 norms."""
    tris = space.fluid_tris
    rule = triangle_rule(SYSTEM_QUAD_DEGREE)
    _, det, g = _phys_grads(space, tris, rule)
    e1 = np.einsum("q,tqic,tqjc->tij", rule.weights, g, g) * det[:, None, None]
    local = np.zeros((len(tris), 12, 12))
    local[:, 0::2, 0::2] = e1
    local[:, 1::2, 1::2] = e1
    return _scatter_square(local, space.velocity_dofs_of_tris(tris), space.num_velocity_dofs)


def assemble_divergence(space):
    tris = space.fluid_tris
    local = _local_matrices(space, tris, None, "divergence")
    rows = space.pressure_loc[space.mesh.triangles[tris]]
    return _scatter_rect(local, rows, space.velocity_dofs_of_tris(tris),
                         (space.num_pressure_dofs, space.num_velocity_dofs))


def assemble_solid_mass(space, params=None):
    tris = space.solid_tris
    local = _local_matrices(space, tris, params, "solid_mass")
    return _scatter_square(local, space.solid_dofs_of_tris(tris), space.num_solid_dofs)


def assemble_solid_stiffness(space, params: MaterialParams):
    tris = space.solid_tris
    local = _local_matrices(space, tris, params, "solid_stiffness")
    return _scatter_square(local, space.solid_dofs_of_tris(tris), space.num_solid_dofs)


def assemble_solid_grad(space):
    """Full-gradient Gram matrix on the solid, for the standard H1 norm."""
    tris = space.solid_tris
    rule = triangle_rule(SYSTEM_QUAD_DEGREE)
    _, det, g = _phys_grads(space, tris, rule)
    e1 = np.einsum("q,tqic,tqjc->tij", rule.weights, g, g) * det[:, None, None]
    local = np.zeros((len(tris), 12, 12))
    local[:, 0::2, 0::2] = e1
    local[:, 1::2, 1::2] = e1
    return _scatter_square(local, space.solid_dofs_of_tris(tris), space.num_solid_dofs)


def assemble_pressure_mass(space):
    tris = space.fluid_tris
    rule = triangle_rule(SYSTEM_QUAD_DEGREE)
    _, det, _ = _tri_geometry(space, tris)
    p1 = p1_values(rule.points)
    mref = np.einsum("q,qi,qj->ij", rule.weights, p1, p1)
    local = det[:, None, None] * mref[None, :, :]
    rows = space.pressure_loc[space.mesh.triangles[tris]]
    return _scatter_rect(local, rows, rows,
                         (space.num_pressure_dofs, space.num_pressure_dofs))


def quadrature_points(space, tris, rule):
    """Physical quadrature points, (nt, nq, 2)."""
    v = space.mesh.vertices[space.mesh.triangles[tris]]
    return np.einsum("qk,tkd->tqd", rule.points, v)


def assemble_fluid_load(space, field, degree=DATA_QUAD_DEGREE):
    """Load vector (f, phi_i) over the fluid for a vector field f(x, y).

    `field` must accept coordinate arrays and return the component pair
    (f_x, f_y)."""
    tris = space.fluid_tris
    rule = triangle_rule(degree)
    _, det, _ = _tri_geometry(space, tris)
    pts = quadrature_points(space, tris, rule)
    fx, fy = field(pts[..., 0], pts[..., 1])
    n = p2_values(rule.points)                       # (nq, 6)
    lx = np.einsum("q,qi,tq->ti", rule.weights, n, fx) * det[:, None]
    ly = np.einsum("q,qi,tq->ti", rule.weights, n, fy) * det[:, None]
    load = np.zeros(space.num_velocity_dofs)
    dofs = space.velocity_dofs_of_tris(tris)
    np.add.at(load, dofs[:, 0::2], lx)
    np.add.at(load, dofs[:, 1::2], ly)
    return load


def interpolate(space, field, target: str):
    """Nodal interpolant: point evaluation at the P2/P1 nodes of `target`.

    Vector fields return (f_x, f_y) component arrays; scalar fields return
    one array.  target is 'velocity', 'pressure' or 'displacement'.
    """
    if target == "velocity":
        xy = space.node_xy[space.fluid_nodes]
        fx, fy = field(xy[:, 0], xy[:, 1])
        out = np.empty(space.num_velocity_dofs)
        out[0::2] = fx
        out[1::2] = fy
        return out
    if target == "displacement":
        xy = space.node_xy[space.solid_nodes]
        fx, fy = field(xy[:, 0], xy[:, 1])
        out = np.empty(space.num_solid_dofs)
        out[0::2] = fx
        out[1::2] = fy
        return out
    if target == "pressure":
        xy = space.node_xy[space.pressure_nodes]
        return np.asarray(field(xy[:, 0], xy[:, 1]), dtype=float)
    raise ValueError(f"unknown interpolation target {target!r}")


# ---------------------------------------------------------------------------
# interface-edge integrals (quadratic traces on Gamma_s)
# ---------------------------------------------------------------------------

def _edge_rule(npts=4):
    return gauss_legendre_01(npts)


def _edge_shape(t):
    """1D quadratic shapes for nodes (end0, end1, midpoint) at t in [0,1]."""
    return np.column_stack([
        2.0 * (t - 0.5) * (t - 1.0),
        2.0 * t * (t - 0.5),
        4.0 * t * (1.0 - t),
    ])


def iface_trace_mass(space):
    """Vector-P2 mass matrix of the interface curve, interleaved layout."""
    ni = space.iface_nodes.size
    t, w = _edge_rule()
    n = _edge_shape(t)
    mloc = space.iface_edge_length * np.einsum("q,qi,qj->ij", w, n, n)
    m = np.zeros((ni, ni))
    for enodes in space.iface_edge_nodes:
        pos = space.iface_node_pos[enodes]
        m[np.ix_(pos, pos)] += mloc
    out = np.zeros((2 * ni, 2 * ni))
    out[0::2, 0::2] = m
    out[1::2, 1::2] = m
    return out


def iface_normal_moments(space):
    """Vector r with r_i = integral over Gamma_s of nu . phi_i ds."""
    ni = space.iface_nodes.size
    t, w = _edge_rule()
    shape_int = space.iface_edge_length * (w @ _edge_shape(t))   # (3,)
    r = np.zeros(2 * ni)
    for enodes, nu in zip(space.iface_edge_nodes, space.iface_edge_normals):
        pos = space.iface_node_pos[enodes]
        for comp in range(2):
            r[2 * pos + comp] += nu[comp] * shape_int
    return r


def iface_pressure_integral(space, pressure):
    """Integral of a P1 pressure field over Gamma_s."""
    total = 0.0
    h = space.iface_edge_length
    for enodes in space.iface_edge_nodes:
        pv = space.pressure_loc[enodes[:2]]
        total += 0.5 * h * (pressure[pv[0]] + pressure[pv[1]])
    return total


def iface_pressure_normal_moments(space, pressure):
    """Vector m with m_i = integral over Gamma_s of p (nu . phi_i) ds."""
    ni = space.iface_nodes.size
    t, w = _edge_rule()
    n = _edge_shape(t)
    h = space.iface_edge_length
    m = np.zeros(2 * ni)
    for enodes, nu in zip(space.iface_edge_nodes, space.iface_edge_normals):
        pv = space.pressure_loc[enodes[:2]]
        pvals = pressure[pv[0]] * (1.0 - t) + pressure[pv[1]] * t
        contrib = h * np.einsum("q,q,qi->i", w, pvals, n)
        pos = space.iface_node_pos[enodes]
        for comp in range(2):
            m[2 * pos + comp] += nu[comp] * contrib
    return m


def iface_perimeter(space):
    return space.iface_edge_nodes.shape[0] * space.iface_edge_length


# ---------------------------------------------------------------------------
# cached operator bundles (spaces own their assembled matrices)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluidOperators:
    mass: sp.csr_matrix
    strain: sp.csr_matrix
    grad: sp.csr_matrix
    div: sp.csr_matrix
    pressure_mass: sp.csr_matrix


@dataclass(frozen=True)
class SolidOperators:
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix   # (sigma(u), eps(v)) with the given Lame moduli
    grad: sp.csr_matrix


def fluid_operators(space) -> FluidOperators:
    if "fluid_ops" not in space._cache:
        space._cache["fluid_ops"] = FluidOperators(
            mass=assemble_fluid_mass(space),
            strain=assemble_fluid_strain(space),
            grad=assemble_fluid_grad(space),
            div=assemble_divergence(space),
            pressure_mass=assemble_pressure_mass(space),
        )
    return space._cache["fluid_ops"]


def solid_operators(space, params: MaterialParams) -> SolidOperators:
    key = ("solid_ops", params.lame_lambda, params.lame_mu)
    if key not in space._cache:
        if "solid_mass" not in space._cache:
            space._cache["solid_mass"] = assemble_solid_mass(space)
            space._cache["solid_grad"] = assemble_solid_grad(space)
        space._cache[key] = SolidOperators(
            mass=space._cache["solid_mass"],
            stiffness=assemble_solid_stiffness(space, params),
            grad=space._cache["solid_grad"],
        )
    return space._cache[key]
