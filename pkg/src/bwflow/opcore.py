"""Matrix kernel for one-particle operators.

Conventions used throughout the package, for a complex square matrix X:

* transpose  X^t
* conjugate  X~   (entrywise)
* adjoint    X* = (X~)^t

Omega-type operators are hermitian positive semidefinite, B-type operators
are complex symmetric (B = B^t).  The Hilbert-Schmidt norm is
``||X||_2 = sqrt(tr(X* X))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import KernelOverlap, NotPSD, RoleViolation

# Relative tolerances for structural checks.  All of them are scaled by the
# Hilbert-Schmidt norm of the matrix being tested (floored at 1).
SYM_TOL = 1e-10
PSD_TOL = 1e-10
KER_TOL = 1e-10

_ROLES = ("hermitian", "symmetric", "general")


def as_matrix(x) -> np.ndarray:
    """Return a fresh complex128 square matrix from x.

    Accepts an ndarray, a nested list or an OneParticleOperator.
    """
    if isinstance(x, OneParticleOperator):
        return np.array(x.mat, dtype=np.complex128)
    m = np.array(x, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def hs_norm(x) -> float:
    """Hilbert-Schmidt norm sqrt(tr(X* X)) = Frobenius norm."""
    m = x.mat if isinstance(x, OneParticleOperator) else np.asarray(x)
    return float(np.linalg.norm(m))


def hs_scale(x) -> float:
    """Norm floored at 1, used to make tolerances relative."""
    return max(1.0, hs_norm(x))


def _defect(m: np.ndarray, role: str) -> float:
    if role == "hermitian":
        return hs_norm(m - m.conj().T) / hs_scale(m)
    if role == "symmetric":
        return hs_norm(m - m.T) / hs_scale(m)
    return 0.0


def _project(m: np.ndarray, role: str) -> np.ndarray:
    if role == "hermitian":
        return (m + m.conj().T) / 2
    if role == "symmetric":
        return (m + m.T) / 2
    return m


@dataclass(frozen=True, eq=False)
class OneParticleOperator:
    """A square matrix tagged with the structural role it plays.

    The matrix is projected onto its role (hermitized or symmetrized) on
    construction and the relative deviation of the input is recorded in
    ``defect``.  Inputs whose deviation exceeds ``sym_tol`` are rejected.
    """

    mat: np.ndarray
    role: str = "general"
    defect: float = field(default=0.0, compare=False)

    def __init__(self, mat, role: str = "general", sym_tol: float = SYM_TOL):
        if role not in _ROLES:
            raise ValueError(f"unknown role {role!r}")
        m = as_matrix(mat)
        d = _defect(m, role)
        if d > sym_tol:
            raise RoleViolation(
                f"matrix violates role {role!r}: relative defect {d:.3e} > {sym_tol:.1e}")
        m = _project(m, role)
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)
        object.__setattr__(self, "role", role)
        object.__setattr__(self, "defect", d)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @classmethod
    def hermitian(cls, mat, sym_tol: float = SYM_TOL) -> "OneParticleOperator":
        return cls(mat, role="hermitian", sym_tol=sym_tol)

    @classmethod
    def symmetric(cls, mat, sym_tol: float = SYM_TOL) -> "OneParticleOperator":
        return cls(mat, role="symmetric", sym_tol=sym_tol)


@dataclass(frozen=True, eq=False)
class QuadraticSpec:
    """Coefficient data (Omega, B, C) of a quadratic boson Hamiltonian.

    Omega is hermitian, B is symmetric, C is a real scalar.  ``dim`` is the
    dimension of the one-particle space.
    """

    omega0: OneParticleOperator
    b0: OneParticleOperator
    c0: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.omega0.role != "hermitian":
            raise RoleViolation("omega0 must carry the hermitian role")
        if self.b0.role != "symmetric":
            raise RoleViolation("b0 must carry the symmetric role")
        if self.omega0.dim != self.b0.dim:
            raise ValueError("omega0 and b0 must have equal dimensions")
        object.__setattr__(self, "c0", float(self.c0))

    @property
    def dim(self) -> int:
        return self.omega0.dim

    @property
    def omega(self) -> np.ndarray:
        return self.omega0.mat

    @property
    def b(self) -> np.ndarray:
        return self.b0.mat

    @classmethod
    def from_matrices(cls, omega, b, c0: float = 0.0, label: str = "",
                      sym_tol: float = SYM_TOL) -> "QuadraticSpec":
        return cls(OneParticleOperator.hermitian(omega, sym_tol),
                   OneParticleOperator.symmetric(b, sym_tol), c0, label)


def involution(x, kind: str):
    """Apply transpose, conjugate or adjoint.

    Parameters
    ----------
    x : matrix or OneParticleOperator
    kind : {'transpose', 'conjugate', 'adjoint'}

    Returns
    -------
    Same wrapper kind as the input.  All three involutions preserve the
    hermitian and symmetric roles, so the role is carried through.
    """
    wrapped = isinstance(x, OneParticleOperator)
    m = as_matrix(x)
    if kind == "transpose":
        r = m.T
    elif kind == "conjugate":
        r = m.conj()
    elif kind == "adjoint":
        r = m.conj().T
    else:
        raise ValueError(f"unknown involution {kind!r}")
    if wrapped:
        return OneParticleOperator(r, role=x.role)
    return r.copy()


def min_eig_hermitian(x) -> float:
    """Smallest eigenvalue of the hermitian part of x."""
    m = as_matrix(x)
    m = (m + m.conj().T) / 2
    if m.shape[0] == 0:
        raise ValueError("empty matrix")
    return float(np.linalg.eigvalsh(m)[0])


def psd_sqrt(x, psd_tol: float = PSD_TOL) -> OneParticleOperator:
    """Principal square root of a hermitian PSD matrix.

    Eigenvalues below ``-psd_tol * ||M||_2`` raise NotPSD; small negative
    eigenvalues within the tolerance are clamped to zero.
    """
    m = as_matrix(x)
    m = (m + m.conj().T) / 2
    vals, vecs = np.linalg.eigh(m)
    floor = -psd_tol * hs_scale(m)
    if vals[0] < floor:
        raise NotPSD(f"min eigenvalue {vals[0]:.3e} below {floor:.3e}")
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.conj().T
    return OneParticleOperator.hermitian((root + root.conj().T) / 2, sym_tol=np.inf)


def psd_power(x, alpha: float, ker_tol: float = KER_TOL) -> np.ndarray:
    """M^alpha for hermitian PSD M and alpha >= 0, kernel clamped to zero."""
    if alpha < 0:
        raise ValueError("alpha must be nonnegative; use sandwich for inverses")
    m = as_matrix(x)
    m = (m + m.conj().T) / 2
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    r = (vecs * vals**alpha) @ vecs.conj().T
    return (r + r.conj().T) / 2


def sandwich(b, omega, p=1, ker_tol: float = KER_TOL) -> OneParticleOperator:
    """Hermitian PSD matrix B (Omega^t)^{-p} B~.

    The inverse power is taken on the orthogonal complement of the kernel of
    Omega^t (eigenvalues below ``ker_tol * max(1, ||Omega||_2)``).  If any
    kernel eigenvector w of Omega^t fails B w = 0 within tolerance, the
    expression is genuinely singular and KernelOverlap is raised.

    ``p`` may be any positive real; the case of interest is integer p.
    """
    bm = as_matrix(b)
    om = as_matrix(omega)
    if p <= 0:
        raise ValueError("p must be positive")
    omt = om.T
    omt = (omt + omt.conj().T) / 2  # hermitian when omega is
    vals, vecs = np.linalg.eigh(omt)
    thresh = ker_tol * hs_scale(om)
    kernel = vals <= thresh
    if np.any(kernel):
        bnorm = hs_norm(bm)
        overlap = np.linalg.norm(bm @ vecs[:, kernel], axis=0)
        if np.any(overlap > ker_tol * max(1.0, bnorm)):
            worst = float(np.max(overlap))
            raise KernelOverlap(
                f"B has overlap {worst:.3e} with the kernel of Omega^t "
                f"(threshold {thresh:.3e})")
    inv_vals = np.where(kernel, 0.0, 1.0 / np.where(kernel, 1.0, vals)**p)
    core = (vecs * inv_vals) @ vecs.conj().T
    r = bm @ core @ bm.conj()
    return OneParticleOperator.hermitian((r + r.conj().T) / 2, sym_tol=np.inf)
