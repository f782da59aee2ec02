"""P1 finite element assembly for the Q-tensor gradient flow.

Fields are nodal coefficient arrays over the symmetric traceless basis
(node-major, basis-minor when flattened).  This module provides:

  * interpolation of pointwise tensor maps onto the mesh,
  * the six-term energy breakdown

        F = L1/2 |S1 div Q|^2 + L2/2 |S1 curl Q|^2
          + L3/2 |S2 div Q|^2 + L4/2 |S2 curl Q|^2
          + L5/2 int |Q|^2 |grad Q|^2 + int W(Q),

    with S1(Q) = s0/3 I + Q, S2(Q) = 2 s0/3 I - Q,
  * the consistent interior mass operator (scalar P1 mass tensorized
    with the basis Gram matrix),
  * the midpoint load vector h_load_vector(X, Qn): the linearized
    half-step variation H^{n+1/2} tested against every interior nodal
    basis field psi_i R_alpha.  At the fixed point X = Q^{n+1} the sum
    of the linearized terms reproduces the midpoint scheme exactly,
    which is what yields the discrete dissipation identity.

All element integrals use a symmetric triangle rule of degree >= 4;
every integrand here is piecewise polynomial of degree <= 4, so the
default rule is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels
from .mesh import Mesh, QuadratureRule, locate_point, triangle_quadrature
from .qtensor import BasisSet, ModelParams, project_st

DEFAULT_QUAD_DEGREE = 4

# compiled element kernels when numba is importable; the numpy reference
# path stays available and the tests pin the two against each other
USE_KERNELS = _kernels.HAVE_KERNELS


@dataclass
class NodalField:
    """P1 tensor field: one coefficient vector per node.

    Boundary rows are Dirichlet data: they are stored separately and
    every operation that produces a new field copies them verbatim, so
    they stay bitwise identical along a flow trajectory.
    """

    mesh: Mesh
    basis: BasisSet
    coeffs: np.ndarray
    boundary_values: np.ndarray = field(default=None)

    def __post_init__(self):
        v, m = self.mesh.n_nodes, self.basis.size
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (v, m):
            raise ValueError(f"coeffs must have shape {(v, m)}, got {self.coeffs.shape}")
        if self.boundary_values is None:
            self.boundary_values = self.coeffs[self.mesh.boundary_ids].copy()
        else:
            self.boundary_values = np.asarray(self.boundary_values, dtype=float)
            if not np.array_equal(self.coeffs[self.mesh.boundary_ids], self.boundary_values):
                raise ValueError("boundary rows of coeffs differ from boundary_values")

    @property
    def interior(self) -> np.ndarray:
        return self.coeffs[self.mesh.interior_ids]

    def with_interior(self, interior_coeffs: np.ndarray) -> "NodalField":
        """New field with the given interior rows and identical boundary rows."""
        out = np.empty_like(self.coeffs)
        out[self.mesh.interior_ids] = interior_coeffs
        out[self.mesh.boundary_ids] = self.boundary_values
        return NodalField(mesh=self.mesh, basis=self.basis, coeffs=out,
                          boundary_values=self.boundary_values)

    def copy(self) -> "NodalField":
        return NodalField(mesh=self.mesh, basis=self.basis, coeffs=self.coeffs.copy(),
                          boundary_values=self.boundary_values)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Per-term energy values; total is their sum (f1..f5 are nonnegative)."""

    f1: float
    f2: float
    f3: float
    f4: float
    f5: float
    f6: float
    total: float

    @classmethod
    def from_terms(cls, f1, f2, f3, f4, f5, f6) -> "EnergyBreakdown":
        return cls(f1=f1, f2=f2, f3=f3, f4=f4, f5=f5, f6=f6,
                   total=f1 + f2 + f3 + f4 + f5 + f6)

    def as_tuple(self) -> tuple:
        return (self.f1, self.f2, self.f3, self.f4, self.f5, self.f6, self.total)


def interpolate_field(f, mesh: Mesh, basis: BasisSet, boundary=None) -> NodalField:
    """Nodal interpolant of a pointwise map f: x -> d x d matrix.

    Values are projected onto the symmetric traceless subspace before
    taking coefficients.  Boundary rows come from `boundary` (same
    calling convention) when given, else from f itself.
    """
    v = mesh.n_nodes
    coeffs = np.empty((v, basis.size))
    for i in range(v):
        coeffs[i] = basis.coeffs(np.asarray(f(mesh.nodes[i]), dtype=float))
    if boundary is not None:
        for i in mesh.boundary_ids:
            coeffs[i] = basis.coeffs(np.asarray(boundary(mesh.nodes[i]), dtype=float))
    return NodalField(mesh=mesh, basis=basis, coeffs=coeffs)


def _curl_tensors(basis: BasisSet) -> np.ndarray:
    """C[m] maps grad psi to the 2D row-curl of psi * B_m: curl = C_m @ grad."""
    b = basis.tensors
    c = np.empty_like(b)
    c[:, :, 0] = b[:, :, 1]
    c[:, :, 1] = -b[:, :, 0]
    return c


def _check_2d(q: NodalField):
    if q.basis.dim != 2:
        raise ValueError("assembly supports planar fields (2D basis) only")


class _ElemData:
    """Per-element and per-quadrature-point values of one field."""

    def __init__(self, q: NodalField, quad: QuadratureRule):
        mesh = q.mesh
        basis = q.basis
        ce = q.coeffs[mesh.elements]                       # (L, 3, m)
        self.cgrad = np.einsum("lak,lam->lmk", mesh.grads, ce)   # coefficient gradients
        t = basis.tensors
        self.div = np.einsum("mik,lmk->li", t, self.cgrad)
        self.curl = np.einsum("mik,lmk->li", _curl_tensors(basis), self.cgrad)
        self.grad2 = np.einsum("lmk,mn,lnk->l", self.cgrad, basis.gram, self.cgrad)
        # per quadrature point: coefficient values and matrices
        self.cq = [np.einsum("a,lam->lm", bp, ce) for bp in quad.bary]
        self.mat = [np.einsum("lm,mij->lij", c, t) for c in self.cq]
        self.norm2 = [np.einsum("lm,mn,ln->l", c, basis.gram, c) for c in self.cq]


def total_energy(q: NodalField, p: ModelParams,
                 quad: QuadratureRule | None = None) -> EnergyBreakdown:
    """Exact elementwise energy of a P1 field (all terms polynomial degree <= 4)."""
    _check_2d(q)
    if quad is None:
        quad = triangle_quadrature(DEFAULT_QUAD_DEGREE)
    if USE_KERNELS:
        mesh = q.mesh
        b = q.basis
        f = _kernels.energy_terms(
            mesh.areas, mesh.grads, q.coeffs[mesh.elements], b.tensors,
            _curl_tensors(b), b.gram, quad.bary, quad.weights,
            p.s0, p.L1, p.L2, p.L3, p.L4, p.L5, p.a, p.b, p.c)
        return EnergyBreakdown.from_terms(*f)
    return _total_energy_reference(q, p, quad)


def _total_energy_reference(q: NodalField, p: ModelParams,
                            quad: QuadratureRule) -> EnergyBreakdown:
    """Vectorized numpy implementation (kept as the kernel reference)."""
    mesh = q.mesh
    d = _ElemData(q, quad)
    s0 = p.s0
    eye = np.eye(2)
    a_w = mesh.areas
    f = np.zeros(6)
    for ip, w in enumerate(quad.weights):
        m = d.mat[ip]
        s1 = (s0 / 3.0) * eye + m
        s2 = (2.0 * s0 / 3.0) * eye - m
        s1d = np.einsum("lij,lj->li", s1, d.div)
        s1c = np.einsum("lij,lj->li", s1, d.curl)
        s2d = np.einsum("lij,lj->li", s2, d.div)
        s2c = np.einsum("lij,lj->li", s2, d.curl)
        tr2 = d.norm2[ip]
        tr3 = np.einsum("lij,ljk,lki->l", m, m, m)
        wq = w * a_w
        f[0] += 0.5 * p.L1 * wq @ np.einsum("li,li->l", s1d, s1d)
        f[1] += 0.5 * p.L2 * wq @ np.einsum("li,li->l", s1c, s1c)
        f[2] += 0.5 * p.L3 * wq @ np.einsum("li,li->l", s2d, s2d)
        f[3] += 0.5 * p.L4 * wq @ np.einsum("li,li->l", s2c, s2c)
        f[4] += 0.5 * p.L5 * wq @ (tr2 * d.grad2)
        f[5] += wq @ (p.a * tr2 - (2.0 * p.b / 3.0) * tr3 + 0.5 * p.c * tr2 ** 2)
    return EnergyBreakdown.from_terms(*f)


def _scalar_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix: element blocks (A/12)(1 + delta_ab)."""
    if "scalar_mass" in mesh._cache:
        return mesh._cache["scalar_mass"]
    tri = mesh.elements
    l = tri.shape[0]
    rows = np.repeat(tri, 3, axis=1).ravel()          # a index
    cols = np.tile(tri, (1, 3)).ravel()               # b index
    block = (np.ones((3, 3)) + np.eye(3)) / 12.0
    vals = (mesh.areas[:, None] * block.ravel()[None, :]).ravel()
    m = sp.coo_matrix((vals, (rows, cols)), shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    mesh._cache["scalar_mass"] = m
    return m


class MassOperator:
    """Interior mass operator: scalar P1 mass tensorized with the Gram matrix.

    Acts on interior coefficient vectors flattened node-major,
    basis-minor.  The solve exploits the Kronecker structure:
    (M x G) vec(X) = vec(R)  <=>  M X G = R  <=>  X = M^-1 R G^-1,
    with M factorized once by SuperLU.
    """

    def __init__(self, mesh: Mesh, basis: BasisSet):
        self.mesh = mesh
        self.basis = basis
        ids = mesh.interior_ids
        m_full = _scalar_mass(mesh)
        self._m_int = m_full[ids][:, ids].tocsc()
        self._lu = splu(self._m_int)
        self._gram = basis.gram
        self._gram_inv = basis.gram_inv
        self.n_interior = len(ids)

    @property
    def matrix(self) -> sp.csr_matrix:
        """Assembled sparse (N m) x (N m) SPD matrix (for inspection/tests)."""
        return sp.kron(self._m_int, sp.csr_matrix(self._gram), format="csr")

    def _as_mat(self, vec: np.ndarray) -> np.ndarray:
        return np.asarray(vec, dtype=float).reshape(self.n_interior, self.basis.size)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """(M x G) @ u for a flat interior coefficient vector."""
        a = self._as_mat(u)
        return ((self._m_int @ a) @ self._gram).reshape(-1)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        r = self._as_mat(rhs)
        x = self._lu.solve(r) @ self._gram_inv
        return x.reshape(-1)

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        a = self._as_mat(u)
        b = self._as_mat(v)
        return float(np.einsum("im,im->", self._m_int @ a, b @ self._gram))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(u, u), 0.0)))


def mass_operator(mesh: Mesh, basis: BasisSet) -> MassOperator:
    return MassOperator(mesh, basis)


def h_load_vector(x: NodalField, qn: NodalField, p: ModelParams,
                  quad: QuadratureRule | None = None,
                  qn_data: "_ElemData | None" = None) -> np.ndarray:
    """Linearized midpoint variation H^{n+1/2}(X, Qn) against interior test fields.

    Returns the flat vector of H tested with phi = psi_i R_alpha for every
    interior node i and basis index alpha (node-major, basis-minor).  X is
    the current fixed-point iterate; passing qn_data (from _ElemData) lets
    the numpy path reuse the Qn-side element values across iterations.
    """
    _check_2d(x)
    if x.mesh is not qn.mesh or x.basis is not qn.basis:
        raise ValueError("X and Qn must live on the same mesh and basis")
    if quad is None:
        quad = triangle_quadrature(DEFAULT_QUAD_DEGREE)
    if USE_KERNELS:
        mesh = x.mesh
        b = x.basis
        contrib = _kernels.hload_contrib(
            mesh.areas, mesh.grads, x.coeffs[mesh.elements], qn.coeffs[mesh.elements],
            b.tensors, _curl_tensors(b), b.gram, quad.bary, quad.weights,
            p.s0, p.L1, p.L2, p.L3, p.L4, p.L5, p.a, p.b, p.c)
        acc = np.zeros((mesh.n_nodes, b.size))
        for al in range(b.size):
            acc[:, al] = np.bincount(mesh.elements.ravel(),
                                     weights=contrib[:, :, al].ravel(),
                                     minlength=mesh.n_nodes)
        return acc[mesh.interior_ids].reshape(-1)
    return _h_load_reference(x, qn, p, quad, qn_data)


def _h_load_reference(x: NodalField, qn: NodalField, p: ModelParams,
                      quad: QuadratureRule,
                      qn_data: "_ElemData | None" = None) -> np.ndarray:
    """Vectorized numpy implementation (kept as the kernel reference)."""
    mesh = x.mesh
    basis = x.basis
    t = basis.tensors
    ct = _curl_tensors(basis)
    gram = basis.gram
    s0 = p.s0
    eye = np.eye(2)

    dx = _ElemData(x, quad)
    dn = qn_data if qn_data is not None else _ElemData(qn, quad)

    nelem = mesh.n_elements
    msize = basis.size
    divsum = dx.div + dn.div
    curlsum = dx.curl + dn.curl
    gradsum = dx.cgrad + dn.cgrad
    grad2sum = dx.grad2 + dn.grad2

    vd = np.zeros((nelem, 2))      # gradient-type div weights
    vc = np.zeros((nelem, 2))      # gradient-type curl weights
    s5 = np.zeros(nelem)           # accumulated |X|^2 + |Qn|^2
    zacc = np.zeros((nelem, 3, msize))

    for ip, w in enumerate(quad.weights):
        mx, mn_ = dx.mat[ip], dn.mat[ip]
        s1x = (s0 / 3.0) * eye + mx
        s1n = (s0 / 3.0) * eye + mn_
        s2x = (2.0 * s0 / 3.0) * eye - mx
        s2n = (2.0 * s0 / 3.0) * eye - mn_
        s1sum = s1x + s1n
        s2sum = s2x + s2n
        u1 = np.einsum("lij,lj->li", s1x, dx.div) + np.einsum("lij,lj->li", s1n, dn.div)
        u2 = np.einsum("lij,lj->li", s1x, dx.curl) + np.einsum("lij,lj->li", s1n, dn.curl)
        u3 = np.einsum("lij,lj->li", s2x, dx.div) + np.einsum("lij,lj->li", s2n, dn.div)
        u4 = np.einsum("lij,lj->li", s2x, dx.curl) + np.einsum("lij,lj->li", s2n, dn.curl)

        vd += w * (0.25 * p.L1 * np.einsum("lji,lj->li", s1sum, u1)
                   + 0.25 * p.L3 * np.einsum("lji,lj->li", s2sum, u3))
        vc += w * (0.25 * p.L2 * np.einsum("lji,lj->li", s1sum, u2)
                   + 0.25 * p.L4 * np.einsum("lji,lj->li", s2sum, u4))

        scal = dx.norm2[ip] + dn.norm2[ip]
        s5 += w * scal

        msum = mx + mn_
        z = (0.25 * p.L1 * np.einsum("li,lj->lij", u1, divsum)
             - 0.25 * p.L3 * np.einsum("li,lj->lij", u3, divsum)
             + 0.25 * p.L2 * np.einsum("li,lj->lij", u2, curlsum)
             - 0.25 * p.L4 * np.einsum("li,lj->lij", u4, curlsum)
             + (0.25 * p.L5 * grad2sum + p.a + 0.5 * p.c * scal)[:, None, None] * msum
             - (2.0 * p.b / 3.0) * (np.einsum("lij,ljk->lik", mx, mx)
                                    + np.einsum("lij,ljk->lik", mn_, mn_)
                                    + np.einsum("lij,ljk->lik", mx, mn_)))
        zb = np.einsum("lij,mij->lm", z, t)
        zacc += w * np.einsum("lm,a->lam", zb, quad.bary[ip])

    # gradient-type: (B_m^T vd + C_m^T vc + L5/4 s5 (gram Gsum)) . grad psi_a
    gother = (np.einsum("mik,li->lmk", t, vd)
              + np.einsum("mik,li->lmk", ct, vc)
              + 0.25 * p.L5 * s5[:, None, None] * np.einsum("mn,lnk->lmk", gram, gradsum))
    contrib = np.einsum("lmk,lak->lam", gother, mesh.grads) + zacc
    contrib *= mesh.areas[:, None, None]

    acc = np.zeros((mesh.n_nodes, msize))
    np.add.at(acc, mesh.elements.ravel(), contrib.reshape(-1, msize))
    return acc[mesh.interior_ids].reshape(-1)


def make_qn_data(qn: NodalField, quad: QuadratureRule | None = None) -> _ElemData:
    """Precompute the Qn-side element values for repeated h_load_vector calls."""
    if quad is None:
        quad = triangle_quadrature(DEFAULT_QUAD_DEGREE)
    return _ElemData(qn, quad)


def l2_norm(q: NodalField) -> float:
    """L2 norm of the P1 tensor field (exact, via the consistent mass matrix)."""
    m = _scalar_mass(q.mesh)
    c = q.coeffs
    val = np.einsum("im,im->", m @ c, c @ q.basis.gram)
    return float(np.sqrt(max(val, 0.0)))


def l2_inner(q1: NodalField, q2: NodalField) -> float:
    m = _scalar_mass(q1.mesh)
    return float(np.einsum("im,im->", m @ q1.coeffs, q2.coeffs @ q1.basis.gram))


def l2_error(q: NodalField, qref: NodalField,
             quad: QuadratureRule | None = None) -> float:
    """L2 distance between q and a reference field on a (possibly) finer mesh.

    Same-mesh fields are compared exactly through the mass matrix.
    Otherwise the difference is integrated with the coarse-mesh rule,
    sampling the reference by point location (exact for the coarse field;
    nested structured meshes locate exactly).
    """
    if qref.mesh is q.mesh:
        diff = NodalField(mesh=q.mesh, basis=q.basis, coeffs=q.coeffs - qref.coeffs)
        return l2_norm(diff)
    if quad is None:
        quad = triangle_quadrature(DEFAULT_QUAD_DEGREE)
    mesh = q.mesh
    gram = q.basis.gram
    ce = q.coeffs[mesh.elements]
    tri_ref = qref.mesh.elements
    total = 0.0
    for ip, w in enumerate(quad.weights):
        bp = quad.bary[ip]
        pts = np.einsum("a,lak->lk", bp, mesh.nodes[mesh.elements])
        vals = np.einsum("a,lam->lm", bp, ce)
        ref_vals = np.empty_like(vals)
        for l in range(pts.shape[0]):
            elem, bary = locate_point(qref.mesh, pts[l])
            ref_vals[l] = bary @ qref.coeffs[tri_ref[elem]]
        d = vals - ref_vals
        total += w * float(mesh.areas @ np.einsum("lm,mn,ln->l", d, gram, d))
    return float(np.sqrt(max(total, 0.0)))


def h1_norm_sq(q: NodalField, quad: QuadratureRule | None = None) -> float:
    """int |Q|^2 + |grad Q|^2 (exact for P1)."""
    if quad is None:
        quad = triangle_quadrature(DEFAULT_QUAD_DEGREE)
    d = _ElemData(q, quad)
    val = float(q.mesh.areas @ d.grad2)
    for ip, w in enumerate(quad.weights):
        val += w * float(q.mesh.areas @ d.norm2[ip])
    return val
