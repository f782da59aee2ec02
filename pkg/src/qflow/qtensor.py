"""Pointwise algebra for symmetric traceless Q-tensors.

A Q-tensor is expanded in a fixed coefficient basis of the space of
symmetric traceless d x d matrices (d = 2 or 3).  Everything downstream
(interpolation, assembly, the flow solver) works on coefficient vectors;
this module owns the basis bookkeeping and the pointwise operations:
projection onto the symmetric traceless subspace, the bulk potential

    W(Q) = a tr(Q^2) - (2b/3) tr(Q^3) + (c/2) tr(Q^2)^2,

first-derivative contractions (div / curl of a tensor field given its
gradient), norm truncation, and the scalar order parameter / director
extraction used by the 2D experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np


def _basis_tensors(dim: int) -> np.ndarray:
    if dim == 2:
        b1 = np.array([[1.0, 0.0], [0.0, -1.0]])
        b2 = np.array([[0.0, 1.0], [1.0, 0.0]])
        return np.stack([b1, b2])
    if dim == 3:
        def e(i, j):
            m = np.zeros((3, 3))
            m[i, j] = 1.0
            return m

        r1 = e(0, 0) - e(2, 2)
        r2 = e(1, 1) - e(2, 2)
        r3 = e(0, 1) + e(1, 0)
        r4 = e(0, 2) + e(2, 0)
        r5 = e(1, 2) + e(2, 1)
        return np.stack([r1, r2, r3, r4, r5])
    raise ValueError(f"dim must be 2 or 3, got {dim}")


@dataclass(frozen=True)
class BasisSet:
    """Coefficient basis of the symmetric traceless d x d matrices.

    tensors has shape (m, d, d) and gram[i, j] = tensors[i] : tensors[j].
    The 2D basis is orthogonal (gram = 2 I); the 3D one is not.
    """

    dim: int
    tensors: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    gram_inv: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.tensors.shape[0]

    def matrix(self, coeffs: np.ndarray) -> np.ndarray:
        """Reconstruct matrices from coefficients; coeffs shape (..., m)."""
        return np.einsum("...m,mij->...ij", np.asarray(coeffs, dtype=float), self.tensors)

    def coeffs(self, mat: np.ndarray) -> np.ndarray:
        """Coefficients of the symmetric traceless projection of mat."""
        p = project_st(np.asarray(mat, dtype=float))
        rhs = np.einsum("...ij,mij->...m", p, self.tensors)
        return rhs @ self.gram_inv.T

    def norm_sq(self, coeffs: np.ndarray) -> np.ndarray:
        """|Q|^2 = c^T G c for coefficient vectors (..., m)."""
        c = np.asarray(coeffs, dtype=float)
        return np.einsum("...m,mn,...n->...", c, self.gram, c)


_BASIS_CACHE: dict[int, BasisSet] = {}


def make_basis(dim: int) -> BasisSet:
    if dim not in _BASIS_CACHE:
        tensors = _basis_tensors(dim)
        gram = np.einsum("mij,nij->mn", tensors, tensors)
        _BASIS_CACHE[dim] = BasisSet(dim=dim, tensors=tensors, gram=gram,
                                     gram_inv=np.linalg.inv(gram))
    return _BASIS_CACHE[dim]


@dataclass(frozen=True)
class SymTraceless:
    """A single Q-tensor value: coefficient vector over a BasisSet."""

    coeffs: np.ndarray
    basis: BasisSet

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (self.basis.size,):
            raise ValueError(f"expected {self.basis.size} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def matrix(self) -> np.ndarray:
        return self.basis.matrix(self.coeffs)

    @property
    def norm(self) -> float:
        return math.sqrt(float(self.basis.norm_sq(self.coeffs)))


@dataclass(frozen=True)
class ModelParams:
    """Elastic constants, bulk coefficients and the mobility.

    s0 is the equilibrium uniaxial order parameter derived from (a, b, c);
    it enters the elastic operators through S1(Q) = s0/3 I + Q and
    S2(Q) = 2 s0/3 I - Q.  The 2D reduction keeps the 3D factors s0/3
    and 2 s0/3 unchanged.
    """

    L1: float
    L2: float
    L3: float
    L4: float
    L5: float
    a: float
    b: float
    c: float
    M: float = 1.0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"bulk coefficient c must be positive, got c={self.c}")
        if self.M <= 0:
            raise ValueError(f"mobility M must be positive, got M={self.M}")
        for name in ("L1", "L2", "L3", "L4", "L5"):
            if getattr(self, name) < 0:
                raise ValueError(f"elastic constant {name} must be nonnegative, "
                                 f"got {getattr(self, name)}")

    @property
    def s0(self) -> float:
        return equilibrium_s0(self.a, self.b, self.c)


def equilibrium_s0(a: float, b: float, c: float) -> float:
    """Equilibrium order parameter s0 = (b + sqrt(b^2 - 24 a c)) / (4 c)."""
    disc = b * b - 24.0 * a * c
    if disc < 0:
        raise ValueError(
            f"no real equilibrium order parameter: b^2 - 24 a c = {disc} < 0 "
            f"for a={a}, b={b}, c={c}")
    return (b + math.sqrt(disc)) / (4.0 * c)


def project_st(mat: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto symmetric traceless: (A + A^T)/2 - tr(A)/d I."""
    a = np.asarray(mat, dtype=float)
    d = a.shape[-1]
    if a.shape[-2] != d:
        raise ValueError(f"expected square matrices, got shape {a.shape}")
    sym = 0.5 * (a + np.swapaxes(a, -1, -2))
    tr = np.trace(a, axis1=-2, axis2=-1)
    out = sym.copy()
    idx = np.arange(d)
    out[..., idx, idx] -= tr[..., None] / d
    return out


def bulk_potential(q: SymTraceless | np.ndarray, p: ModelParams) -> float | np.ndarray:
    """W(Q) = a tr Q^2 - (2b/3) tr Q^3 + (c/2) (tr Q^2)^2.

    Accepts a SymTraceless value or a batch of matrices (..., d, d).
    The cubic term is computed from the matrix; in 2D it vanishes
    identically, no special case.
    """
    mat = q.matrix if isinstance(q, SymTraceless) else np.asarray(q, dtype=float)
    tr2 = np.einsum("...ij,...ji->...", mat, mat)
    tr3 = np.einsum("...ij,...jk,...ki->...", mat, mat, mat)
    w = p.a * tr2 - (2.0 * p.b / 3.0) * tr3 + (0.5 * p.c) * tr2 ** 2
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class GradientTensor:
    """Spatial gradient of a Q-tensor field at a point.

    entries[i, j, k] = d_k Q_ij, with d the tensor dimension and the last
    axis the spatial dimension (2 for the planar experiments).  Symmetric
    and traceless in (i, j) for every k.
    """

    entries: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.entries, dtype=float)
        if g.ndim != 3 or g.shape[0] != g.shape[1]:
            raise ValueError(f"expected (d, d, k) gradient entries, got shape {g.shape}")
        if not np.allclose(g, np.swapaxes(g, 0, 1), atol=1e-12):
            raise ValueError("gradient entries are not symmetric in the tensor indices")
        if not np.allclose(np.einsum("iik->k", g), 0.0, atol=1e-12):
            raise ValueError("gradient entries are not trace-free in the tensor indices")
        object.__setattr__(self, "entries", g)

    @classmethod
    def from_coeff_grads(cls, coeff_grads: np.ndarray, basis: BasisSet) -> "GradientTensor":
        """Build from per-coefficient spatial gradients, shape (m, k)."""
        cg = np.asarray(coeff_grads, dtype=float)
        return cls(np.einsum("mij,mk->ijk", basis.tensors, cg))

    @property
    def norm_sq(self) -> float:
        return float(np.einsum("ijk,ijk->", self.entries, self.entries))


def _grad_entries(g) -> np.ndarray:
    return g.entries if isinstance(g, GradientTensor) else np.asarray(g, dtype=float)


def pointwise_div(g) -> np.ndarray:
    """(div Q)_i = sum_k d_k Q_ik, from gradient entries g[i, j, k] = d_k Q_ij."""
    e = _grad_entries(g)
    return np.einsum("ikk->i", e)


def pointwise_curl(g) -> np.ndarray:
    """Row-wise curl of the tensor field.

    3D: (curl Q)_{ij} = eps_{ikl} d_k Q_jl, curl applied to every row.
    2D: scalar curl per row, (curl Q)_j = d_1 Q_j2 - d_2 Q_j1, so the
    result is a d-vector (one scalar per row).
    """
    e = _grad_entries(g)
    k = e.shape[2]
    if k == 2:
        return e[:, 1, 0] - e[:, 0, 1]
    if k == 3:
        eps = np.zeros((3, 3, 3))
        for (i, j, l), s in (((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                             ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)):
            eps[i, j, l] = s
        # (curl Q)_{ij}: i-th component of the curl of row j
        return np.einsum("ikl,jlk->ij", eps, e)
    raise ValueError(f"spatial dimension must be 2 or 3, got {k}")


def truncate(q: SymTraceless, radius: float) -> SymTraceless:
    """Radial truncation T_R: rescale Q onto the ball of radius R if |Q| > R."""
    if radius <= 0:
        raise ValueError(f"truncation radius must be positive, got {radius}")
    n = q.norm
    if n <= radius:
        return q
    return SymTraceless(coeffs=(radius / n) * q.coeffs, basis=q.basis)


def order_parameter_2d(q: SymTraceless | np.ndarray) -> tuple[float, np.ndarray, bool]:
    """Largest eigenvalue and unit director of a 2D Q-tensor.

    For Q = q1 B1 + q2 B2 the eigenvalues are +/- lambda with
    lambda = sqrt(q1^2 + q2^2).  Returns (lambda, director, degenerate);
    the director is the +lambda eigenvector normalized so its first
    nonzero component is nonnegative (ties broken toward nonnegative
    second component).  Q = 0 is flagged degenerate with director (1, 0).
    """
    if isinstance(q, SymTraceless):
        if q.basis.dim != 2:
            raise ValueError("order_parameter_2d needs a 2D tensor")
        q1, q2 = q.coeffs
    else:
        c = np.asarray(q, dtype=float)
        q1, q2 = float(c[0]), float(c[1])
    lam = math.hypot(q1, q2)
    if lam == 0.0:
        return 0.0, np.array([1.0, 0.0]), True
    # (Q - lam I) v = 0: v along (q2, lam - q1), or (lam + q1, q2).
    v = np.array([lam + q1, q2])
    if v @ v < 1e-24 * lam * lam:
        v = np.array([q2, lam - q1])
    v = v / math.sqrt(v @ v)
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return lam, v, False
