"""Truncated Fock-space oracle.

Everything the flow claims about (Omega, B, C) can be checked against dense
matrices on the boson Fock space over C^n truncated at a total occupation
cutoff.  The basis is the occupation basis ordered by total number and then
lexicographically.  Annihilation operators act exactly on the truncated
space (they only move down in total number) and creation operators are
their adjoints, so identities that push states above the cutoff only hold
on interior sectors; residuals here are therefore evaluated against
projections P onto low total number.  Algebraic identities (CCR, G = i[N,H])
are exact up to total number cutoff - 2; propagated quantities keep a wider
guard band, cutoff - 4, because the pair terms couple sectors n -> n + 2.

Operator dictionary, for coefficients (Omega, B, C):

    H = sum_kl Omega_kl adag_k a_l + B_kl adag_k adag_l + B~_kl a_k a_l + C
    G = 2i sum_kl (B_kl adag_k adag_l - B~_kl a_k a_l)

and the propagator solves dU/dt = -i G_t U.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Optional

import numpy as np

from .errors import PathGap, SizeLimit
from .opcore import QuadraticSpec, as_matrix, hs_norm
from .stepping import drive_rk45

SIZE_LIMIT = 20000
OFFDIAG_CONST = 4.0 + np.sqrt(2.0)


@dataclass
class TruncatedFock:
    """Occupation basis of n_modes bosons with total number <= cutoff."""

    n_modes: int
    cutoff: int
    occs: np.ndarray            # (dim, n_modes) int occupation rows
    index: dict                 # occupation tuple -> row
    ntot: np.ndarray            # (dim,) total occupation per row
    _ladders: dict = field(default_factory=dict, repr=False)
    _pairs: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.occs.shape[0]

    def sector_mask(self, max_total: int) -> np.ndarray:
        return self.ntot <= max_total


def build_basis(n_modes: int, cutoff: int, size_limit: int = SIZE_LIMIT) -> TruncatedFock:
    """Build the truncated occupation basis, graded by total number."""
    if n_modes < 1 or cutoff < 0:
        raise ValueError("need n_modes >= 1 and cutoff >= 0")
    dim = comb(n_modes + cutoff, n_modes)
    if dim > size_limit:
        raise SizeLimit(f"basis dimension {dim} exceeds limit {size_limit}")
    occs = sorted(
        (occ for occ in itertools.product(range(cutoff + 1), repeat=n_modes)
         if sum(occ) <= cutoff),
        key=lambda occ: (sum(occ), occ))
    occ_arr = np.array(occs, dtype=int).reshape(len(occs), n_modes)
    index = {occ: i for i, occ in enumerate(occs)}
    return TruncatedFock(n_modes=n_modes, cutoff=cutoff, occs=occ_arr,
                         index=index, ntot=occ_arr.sum(axis=1))


def ladder(fock: TruncatedFock, k: int, kind: str = "annihilate") -> np.ndarray:
    """Ladder matrix for mode k (0-based).

    "annihilate" is exact on the truncated space; "create" is its adjoint,
    which silently drops amplitudes raised past the cutoff.
    """
    if not 0 <= k < fock.n_modes:
        raise ValueError(f"mode index {k} out of range")
    if kind not in ("annihilate", "create"):
        raise ValueError("kind must be 'annihilate' or 'create'")
    if k not in fock._ladders:
        a = np.zeros((fock.dim, fock.dim))
        for j, occ in enumerate(map(tuple, fock.occs)):
            if occ[k] >= 1:
                lower = occ[:k] + (occ[k] - 1,) + occ[k + 1:]
                a[fock.index[lower], j] = np.sqrt(occ[k])
        a.setflags(write=False)
        fock._ladders[k] = a
    a = fock._ladders[k]
    return a.T if kind == "create" else a


def number_op(fock: TruncatedFock) -> np.ndarray:
    """Total number operator, diagonal in the occupation basis."""
    return np.diag(fock.ntot.astype(float))


def _pair(fock: TruncatedFock, k: int, l: int) -> np.ndarray:
    """adag_k adag_l on the truncated space."""
    if (k, l) not in fock._pairs:
        fock._pairs[(k, l)] = ladder(fock, k, "create") @ ladder(fock, l, "create")
    return fock._pairs[(k, l)]


def _pair_sum(fock: TruncatedFock, b: np.ndarray) -> np.ndarray:
    """S = sum_kl B_kl adag_k adag_l."""
    s = np.zeros((fock.dim, fock.dim), dtype=complex)
    for k in range(fock.n_modes):
        for l in range(fock.n_modes):
            if b[k, l] != 0:
                s = s + b[k, l] * _pair(fock, k, l)
    return s


def hamiltonian_op(fock: TruncatedFock, spec: QuadraticSpec) -> np.ndarray:
    """Dense matrix of H(spec) on the truncated space.

    Built from ladder products, so the pair term and its adjoint match
    exactly and the result is hermitian to roundoff; hermiticity_residual
    reports the defect rather than assuming it.
    """
    if spec.dim != fock.n_modes:
        raise ValueError("spec dimension does not match mode count")
    h = np.zeros((fock.dim, fock.dim), dtype=complex)
    for k in range(fock.n_modes):
        adag_k = ladder(fock, k, "create")
        for l in range(fock.n_modes):
            if spec.omega[k, l] != 0:
                h = h + spec.omega[k, l] * (adag_k @ ladder(fock, l))
    s = _pair_sum(fock, spec.b)
    h = h + s + s.conj().T
    h = h + spec.c0 * np.eye(fock.dim)
    return h


def hermiticity_residual(m: np.ndarray) -> float:
    """||M - M*||_2."""
    return hs_norm(m - m.conj().T)


def generator_op(fock: TruncatedFock, b) -> np.ndarray:
    """G = 2i (S - S*) with S = sum_kl B_kl adag_k adag_l.

    On sectors with total number <= cutoff - 2 this equals i [N, H] entry
    for entry.
    """
    s = _pair_sum(fock, as_matrix(b))
    return 2j * (s - s.conj().T)


def propagate(fock: TruncatedFock, trajectory, s: float, t: float,
              tol: float = 1e-10) -> np.ndarray:
    """Solve dU/dtau = -i G_tau U over [s, t], U_{s,s} = 1.

    trajectory is either a flow trajectory (its interpolated B_tau is used)
    or any callable path tau -> B matrix carrying t0/t1 bounds.
    """
    bpath = trajectory.b_path() if hasattr(trajectory, "b_path") else trajectory
    if t < s:
        raise ValueError("require s <= t")
    if s < bpath.t0 - 1e-9 or t > bpath.t1 + 1e-9:
        raise PathGap(
            f"[{s:.6g}, {t:.6g}] not covered by path window "
            f"[{bpath.t0:.6g}, {bpath.t1:.6g}]")
    dim = fock.dim
    if t == s:
        return np.eye(dim, dtype=complex)
    nn = fock.n_modes
    pair_stack = np.stack([_pair(fock, k, l).astype(complex)
                           for k in range(nn) for l in range(nn)])

    def gen(tau):
        b = np.asarray(bpath(min(max(tau, bpath.t0), bpath.t1)), dtype=complex)
        s_op = np.tensordot(b.ravel(), pair_stack, axes=([0], [0]))
        return 2j * (s_op - s_op.conj().T)

    d2 = dim * dim

    def fun(tau, y):
        u = y[:d2].reshape(dim, dim) + 1j * y[d2:].reshape(dim, dim)
        du = -1j * (gen(tau) @ u)
        return np.concatenate([du.real.ravel(), du.imag.ravel()])

    eye = np.eye(dim, dtype=complex)
    y0 = np.concatenate([eye.real.ravel(), eye.imag.ravel()])
    solver = drive_rk45(fun, s, y0, t, rtol=tol, atol=tol, h_min=1e-12)
    y = solver.y
    return y[:d2].reshape(dim, dim) + 1j * y[d2:].reshape(dim, dim)


def unitarity_residual(fock: TruncatedFock, u_mat: np.ndarray,
                       sector_cut: Optional[int] = None) -> float:
    """||P (U* U - 1) P||_2 on interior sectors (default cutoff - 4)."""
    if sector_cut is None:
        sector_cut = fock.cutoff - 4
    mask = fock.sector_mask(sector_cut)
    defect = u_mat.conj().T @ u_mat - np.eye(fock.dim)
    return hs_norm(defect[np.ix_(mask, mask)])


def conjugation_residual(fock: TruncatedFock, u_mat: np.ndarray,
                         spec_s: QuadraticSpec, spec_t: QuadraticSpec,
                         sector_cut: int) -> float:
    """Relative residual of U H(spec_s) U* = H(spec_t) on low sectors.

    The projection keeps total occupation <= sector_cut, which must leave a
    guard band below the cutoff (sector_cut <= cutoff - 4) so truncation
    leakage does not contaminate the comparison.
    """
    if sector_cut > fock.cutoff - 4:
        raise ValueError("sector_cut must be at most cutoff - 4")
    mask = fock.sector_mask(sector_cut)
    h_s = hamiltonian_op(fock, spec_s)
    h_t = hamiltonian_op(fock, spec_t)
    diff = u_mat @ h_s @ u_mat.conj().T - h_t
    num = hs_norm(diff[np.ix_(mask, mask)])
    den = hs_norm(h_t[np.ix_(mask, mask)])
    if den == 0:
        return np.inf if num > 0 else 0.0
    return float(num / den)


def n_diag_residual(fock: TruncatedFock, h, sector_cut: Optional[int] = None) -> float:
    """||P [H, N] P||_2 on interior sectors; exactly zero when B = 0.

    h may be a dense operator or a QuadraticSpec to build one from.
    """
    if isinstance(h, QuadraticSpec):
        h = hamiltonian_op(fock, h)
    if sector_cut is None:
        sector_cut = fock.cutoff - 2
    mask = fock.sector_mask(sector_cut)
    n_op = number_op(fock)
    comm = h @ n_op - n_op @ h
    return hs_norm(comm[np.ix_(mask, mask)])


def ground_energy(fock: TruncatedFock, spec: QuadraticSpec) -> float:
    """Lowest eigenvalue of the truncated H(spec)."""
    h = hamiltonian_op(fock, spec)
    h = (h + h.conj().T) / 2
    return float(np.linalg.eigvalsh(h)[0])


def ground_truncation_shift(fock: TruncatedFock, spec: QuadraticSpec) -> float:
    """Truncation-convergence estimate |E0(cutoff) - E0(cutoff - 4)|."""
    if fock.cutoff < 4:
        raise ValueError("need cutoff >= 4 for the comparison basis")
    smaller = build_basis(fock.n_modes, fock.cutoff - 4)
    return abs(ground_energy(fock, spec) - ground_energy(smaller, spec))


def offdiag_relative_norm(fock: TruncatedFock, b) -> tuple:
    """Check ||(S + S*)(N+1)^{-1}||_op <= (4 + sqrt 2) ||B||_2, as
    (lhs, rhs, holds).

    The left side restricts inputs to total occupation <= cutoff - 2, where
    the truncated pair operators agree with the untruncated ones.
    """
    bm = as_matrix(b)
    s = _pair_sum(fock, bm)
    w = s + s.conj().T
    weights = 1.0 / (fock.ntot.astype(float) + 1.0)
    m = w * weights[np.newaxis, :]
    mask = fock.sector_mask(fock.cutoff - 2)
    sing = np.linalg.svd(m[:, mask], compute_uv=False)
    lhs = float(sing[0]) if sing.size else 0.0
    rhs = float(OFFDIAG_CONST * hs_norm(bm))
    return lhs, rhs, bool(lhs <= rhs * (1 + 1e-9))
