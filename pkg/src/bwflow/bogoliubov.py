"""Transformation pairs (u, v) generated by the flow.

Along a B-path the pair solves, for t >= s with u_{s,s} = 1, v_{s,s} = 0,

    d/dt u_{t,s} = -4 v_{t,s} B_t~
    d/dt v_{t,s} = -4 u_{t,s} B_t

and satisfies the symplectic relations

    u u* - v v* = 1        u v^t = v u^t
    u* u - v^t v~ = 1      u* v = v^t u~

The inverse pair is (u*, -v^t) and composition over s -> x -> t reads
u_{t,s} = u_{t,x} u_{x,s} + v_{t,x} v_{x,s}~.

The same pair has a convergent iterated-integral series with even orders
feeding u and odd orders feeding v; order n keeps all terms with at most n
time integrals.  Norm growth is hyperbolic:

    1 + ||u - 1||_2 <= cosh(4 int_s^t ||B||_2),
    ||v||_2 <= sinh(4 int_s^t ||B||_2).

Every map with ||v||_2 < oo factors through a one-mode squeeze form: with
the singular values lambda_k = sinh(alpha_k) of v and frames g_k, h_k,

    u = sum_k cosh(alpha_k) |g_k><h_k|,   v = sum_k sinh(alpha_k) |g_k><h_k~|,

and u_hat = sum_k |h_k><g_k| = exp(i h) for a hermitian h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.linalg import expm, logm, sqrtm

from .errors import LogBranch, MapInvalid, PathGap
from .flow import Controls
from .opcore import QuadraticSpec, hs_norm
from .stepping import drive_rk45

MAP_TOL = 1e-7
DECOMP_TOL = 1e-7
BRANCH_TOL = 1e-8


@dataclass
class BogoliubovMap:
    """Pair (u, v) labelled by its time span (s, t).

    shift carries the displacement part of an affine map; the flow studied
    here never produces one, so it stays None throughout.  stats collects
    per-construction diagnostics such as series tail bounds.
    """

    u: np.ndarray
    v: np.ndarray
    s: float = 0.0
    t: float = 0.0
    shift: Optional[np.ndarray] = None
    stats: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.u.shape[0]


def symplectic_residuals(m: BogoliubovMap) -> dict:
    """Hilbert-Schmidt residuals of the four symplectic relations."""
    u, v = m.u, m.v
    eye = np.eye(m.dim)
    return {
        "uu_vv": hs_norm(u @ u.conj().T - v @ v.conj().T - eye),
        "u_u_vv": hs_norm(u.conj().T @ u - v.T @ v.conj() - eye),
        "uv_sym": hs_norm(u @ v.T - v @ u.T),
        "u_v_sym": hs_norm(u.conj().T @ v - v.T @ u.conj()),
    }


def _require_valid(m: BogoliubovMap, tol: float) -> None:
    res = symplectic_residuals(m)
    worst = max(res.values())
    if worst > tol:
        raise MapInvalid(f"symplectic residual {worst:.3e} exceeds {tol:.1e}")


def inverse(m: BogoliubovMap) -> BogoliubovMap:
    """Inverse pair (u*, -v^t)."""
    return BogoliubovMap(u=m.u.conj().T.copy(), v=-m.v.T.copy(), s=m.t, t=m.s)


def compose(later: BogoliubovMap, earlier: BogoliubovMap) -> BogoliubovMap:
    """Composition over s -> x -> t given earlier: s -> x and later: x -> t."""
    u = later.u @ earlier.u + later.v @ earlier.v.conj()
    v = later.u @ earlier.v + later.v @ earlier.u.conj()
    return BogoliubovMap(u=u, v=v, s=earlier.s, t=later.t)


def _check_span(bpath, s: float, t: float) -> None:
    if hasattr(bpath, "b_path"):
        raise TypeError("got a trajectory; pass trajectory.b_path() instead")
    if t < s:
        raise ValueError("require s <= t")
    if s < bpath.t0 - 1e-9 or t > bpath.t1 + 1e-9:
        raise PathGap(
            f"requested span [{s:.6g}, {t:.6g}] outside path coverage "
            f"[{bpath.t0:.6g}, {bpath.t1:.6g}]")


def integrate_uv(bpath, s: float, t: float,
                 controls: Optional[Controls] = None) -> BogoliubovMap:
    """Integrate the (u, v) system along a B-path with the embedded pair."""
    controls = controls or Controls()
    _check_span(bpath, s, t)
    # path dimension probed once; clamped evaluation guards the endpoints
    b0 = np.asarray(bpath(s), dtype=complex)
    n = b0.shape[0]
    if t == s:
        return BogoliubovMap(u=np.eye(n, dtype=complex), v=np.zeros((n, n), complex), s=s, t=t)

    n2 = n * n

    def unpack(y):
        u = y[:n2].reshape(n, n) + 1j * y[n2:2 * n2].reshape(n, n)
        v = y[2 * n2:3 * n2].reshape(n, n) + 1j * y[3 * n2:].reshape(n, n)
        return u, v

    def pack(u, v):
        return np.concatenate([u.real.ravel(), u.imag.ravel(),
                               v.real.ravel(), v.imag.ravel()])

    def fun(tau, y):
        b = bpath(min(max(tau, bpath.t0), bpath.t1))
        u, v = unpack(y)
        du = -4.0 * v @ b.conj()
        dv = -4.0 * u @ b
        return pack(du, dv)

    y0 = pack(np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex))
    solver = drive_rk45(fun, s, y0, t, rtol=controls.tol, atol=controls.tol,
                        h_min=controls.h_min)
    u, v = unpack(solver.y)
    return BogoliubovMap(u=u, v=v, s=s, t=t)


def dyson_uv(bpath, s: float, t: float, order: int, n_nodes: int = 513) -> BogoliubovMap:
    """Truncated iterated-integral series for (u, v).

    Runs `order` rounds of the integral map

        u <- 1 - 4 int_s^x v B~,   v <- -4 int_s^x u B,

    each round extending the kept series order by one (even orders live in
    u, odd in v).  Cumulative integrals are taken through piecewise-cubic
    antiderivatives on a uniform grid of n_nodes points.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    _check_span(bpath, s, t)
    b0 = np.asarray(bpath(s), dtype=complex)
    n = b0.shape[0]
    if t == s or order == 0:
        return BogoliubovMap(u=np.eye(n, dtype=complex), v=np.zeros((n, n), complex), s=s, t=t)
    m = max(8, int(n_nodes) - 1)  # panels
    xs = np.linspace(s, t, m + 1)
    bs = np.stack([np.asarray(bpath(min(max(x, bpath.t0), bpath.t1)), dtype=complex)
                   for x in xs])
    bbars = bs.conj()

    def cumint(values):
        # values: (m+1, n, n) complex; returns the running integral from s
        flat = values.reshape(m + 1, -1)
        parts = np.concatenate([flat.real, flat.imag], axis=1)
        spline = CubicSpline(xs, parts, axis=0)
        anti = spline.antiderivative()(xs)
        anti -= anti[0]
        re, im = anti[:, :n * n], anti[:, n * n:]
        return (re + 1j * im).reshape(m + 1, n, n)

    eye = np.broadcast_to(np.eye(n, dtype=complex), (m + 1, n, n))
    u = eye.copy()
    v = np.zeros((m + 1, n, n), dtype=complex)
    for _ in range(order):
        new_v = -4.0 * cumint(np.matmul(u, bs))
        new_u = eye - 4.0 * cumint(np.matmul(v, bbars))
        u, v = new_u, new_v

    # dropped-tail estimate: the series is dominated term by term by the
    # cosh/sinh expansions in x = 4 int ||B||, so the remainder past the
    # kept order bounds the truncation error
    x = 4.0 * float(np.trapezoid([hs_norm(b) for b in bs], xs))
    kept_u = sum(x ** k / math.factorial(k) for k in range(0, order + 1, 2))
    kept_v = sum(x ** k / math.factorial(k) for k in range(1, order + 1, 2))
    stats = {"u_tail_bound": float(max(np.cosh(x) - kept_u, 0.0)),
             "v_tail_bound": float(max(np.sinh(x) - kept_v, 0.0))}
    return BogoliubovMap(u=u[-1], v=v[-1], s=s, t=t, stats=stats)


def path_hs_integral(bpath, s: float, t: float) -> float:
    """Quadrature of int_s^t ||B_tau||_2 dtau along a path."""
    _check_span(bpath, s, t)
    val, _ = quad(lambda tau: float(np.linalg.norm(
        bpath(min(max(tau, bpath.t0), bpath.t1)))), s, t, limit=200)
    return float(val)


def norm_bounds(m: BogoliubovMap, int_b: float) -> tuple:
    """Hyperbolic growth bounds in terms of int_b = int_s^t ||B||_2 dtau.

    Returns (holds1, holds2) for 1 + ||u - 1|| <= cosh(4 int_b) and
    ||v|| <= sinh(4 int_b), each checked with slack 1e-10 so equality
    cases (the trivial map at int_b = 0) pass.
    """
    tol = 1e-10
    lhs_u = 1.0 + hs_norm(m.u - np.eye(m.dim))
    rhs_u = float(np.cosh(4.0 * int_b))
    lhs_v = hs_norm(m.v)
    rhs_v = float(np.sinh(4.0 * int_b))
    return (bool(lhs_u <= rhs_u + tol * max(1.0, rhs_u)),
            bool(lhs_v <= rhs_v + tol * max(1.0, rhs_v)))


def transform_spec(m: BogoliubovMap, spec: QuadraticSpec,
                   map_tol: float = MAP_TOL) -> QuadraticSpec:
    """Coefficients of the Hamiltonian conjugated by the map.

    Substituting the transformed modes into the normal-ordered quadratic form
    and re-normal-ordering gives

        Omega' = u* Omega u + v^t Omega^t v~ + 2 u* B v~ + 2 v^t B~ u
        B'     = sym(u* Omega v + u* B u~ + v^t B~ v)
        C'     = C + Re tr(v* Omega v) + 2 Re tr(v* B u~)

    The scalar shift produced here is what fixes the sign convention of the
    flow's C equation (see flow.SCALAR_SIGN).
    """
    _require_valid(m, map_tol)
    if m.dim != spec.dim:
        raise ValueError("map and spec dimensions differ")
    u, v = m.u, m.v
    om, b = spec.omega, spec.b
    ustar = u.conj().T
    vt = v.T
    omega_new = (ustar @ om @ u + vt @ om.T @ v.conj()
                 + 2.0 * ustar @ b @ v.conj() + 2.0 * vt @ b.conj() @ u)
    omega_new = (omega_new + omega_new.conj().T) / 2
    b_new = ustar @ om @ v + ustar @ b @ u.conj() + vt @ b.conj() @ v
    b_new = (b_new + b_new.T) / 2
    c_shift = (np.trace(v.conj().T @ om @ v).real
               + 2.0 * np.trace(v.conj().T @ b @ u.conj()).real)
    return QuadraticSpec.from_matrices(
        omega_new, b_new, c0=spec.c0 + float(c_shift),
        label=(spec.label + "-transformed") if spec.label else "transformed",
        sym_tol=np.inf)


@dataclass
class GeneratorDecomposition:
    """Squeeze factorization of a map: frames, angles and the rotation log."""

    alphas: np.ndarray          # squeeze parameters, descending
    g_frame: np.ndarray         # columns g_k
    h_frame: np.ndarray         # columns h_k
    uhat: np.ndarray            # sum_k |h_k><g_k|, unitary
    h_matrix: np.ndarray        # hermitian log of uhat: uhat = exp(i h)
    shift: np.ndarray           # displacement part; zero for homogeneous maps
    residuals: dict = field(default_factory=dict)


def _takagi_symmetric(mat: np.ndarray) -> tuple:
    """Factor a complex symmetric matrix as Y diag(s) Y^t with Y unitary.

    Route: SVD mat = A S B*; then Z = A* B~ is unitary, block diagonal
    over distinct singular values and symmetric on the nonzero blocks, so
    its principal square root W satisfies A W S (A W)^t = mat.  This keeps
    the left/right pairing intact through repeated singular values, where
    plain SVD frames are only determined up to a block rotation.
    """
    a, sig, bh = np.linalg.svd(mat)
    z = a.conj().T @ bh.T
    w = sqrtm(z)
    y = a @ w
    return y, sig


def decompose_generator(m: BogoliubovMap, decomp_tol: float = DECOMP_TOL,
                        map_tol: float = MAP_TOL,
                        branch_tol: float = BRANCH_TOL) -> GeneratorDecomposition:
    """Factor a valid map into squeeze angles and two orthonormal frames.

    The singular values of u are cosh(alpha_k) and those of v are
    sinh(alpha_k), but the two SVDs cannot be taken independently: inside a
    degenerate singular block the frames must be gauged jointly or the
    reconstruction u = sum cosh(alpha_k)|g_k><h_k| breaks.  With the SVD
    u = G0 D K0* the matrix G0* v K0~ is symmetric for any valid map; its
    Takagi factorization Y diag(lambda) Y^t fixes the shared gauge, and
    g_k, h_k are the columns of G0 Y and K0 Y.  Raises MapInvalid when the
    symplectic relations or the reconstruction fail, LogBranch when uhat
    has an eigenvalue at -1 within branch_tol (the hermitian log branch is
    then ambiguous).
    """
    _require_valid(m, map_tol)
    u, v = m.u, m.v
    n = m.dim
    g0, cosh_a, k0h = np.linalg.svd(u)
    k0 = k0h.conj().T
    mid = g0.conj().T @ v @ k0.conj()
    sym_defect = hs_norm(mid - mid.T)
    if sym_defect > map_tol * max(1.0, hs_norm(v)):
        raise MapInvalid(f"gauge matrix asymmetry {sym_defect:.3e}; map is not symplectic")
    y, lam = _takagi_symmetric((mid + mid.T) / 2)
    g = g0 @ y
    h = k0 @ y
    # frames must come out orthonormal; defects feed the residual report
    g_defect = hs_norm(g.conj().T @ g - np.eye(n))
    h_defect = hs_norm(h.conj().T @ h - np.eye(n))
    uhat = h @ g.conj().T
    eigs = np.linalg.eigvals(uhat)
    if np.any(np.abs(eigs + 1.0) < branch_tol):
        raise LogBranch("uhat has an eigenvalue at -1; hermitian log branch ambiguous")
    h_log = logm(uhat)
    h_matrix = (-1j * h_log)
    h_matrix = (h_matrix + h_matrix.conj().T) / 2
    exp_check = hs_norm(expm(1j * h_matrix) - uhat)

    u_rec = (g * cosh_a[np.newaxis, :]) @ h.conj().T
    v_rec = (g * lam[np.newaxis, :]) @ h.T
    u_res = hs_norm(u_rec - u)
    v_res = hs_norm(v_rec - v)
    scale = max(1.0, hs_norm(v))
    if v_res > decomp_tol * scale or u_res > decomp_tol * max(1.0, hs_norm(u)):
        raise MapInvalid(
            f"squeeze reconstruction failed: |du| = {u_res:.3e}, |dv| = {v_res:.3e}")
    return GeneratorDecomposition(
        alphas=np.arcsinh(lam),
        g_frame=g, h_frame=h, uhat=uhat, h_matrix=h_matrix,
        shift=np.zeros(n),
        residuals={"u_recon": u_res, "v_recon": v_res,
                   "g_frame": g_defect, "h_frame": h_defect,
                   "exp_check": exp_check})
