"""Initial-data conditions and their margins.

The ladder of conditions on a spec (Omega_0, B_0):

* A1: Omega_0 hermitian with Omega_0 >= 0.
* A2: B_0 symmetric.
* A3: Omega_0 invertible on the range of B_0 and
      Omega_0 >= 4 B_0 (Omega_0^t)^{-1} B_0~.
* A4: ||Omega_0^{-1/2} B_0||_2 finite.
* A5: 1 > 4 B_0 (Omega_0^t)^{-2} B_0~ strictly, and
      ||Omega_0^{-1-eps} B_0||_2 finite for some eps > 0; the relaxed form
      asks for the largest r with 1 >= (4 + r) B_0 (Omega_0^t)^{-2} B_0~.
* A6: A3 with a spectral gap nu > 0:  Omega_0 - 4 B_0 (Omega_0^t)^{-1} B_0~ >= nu.

Two sufficient real-matrix criteria:

* FB: Omega_0 +- 2 B_0 >= 0 with positive margin implies A1 and A6.
* KM: Omega_0 + 2 B_0 >= nu_- > 0 and Omega_0 - 2 B_0 + P >= nu_+ > 0,
  where P projects onto the subspace on which Omega_0 - 2 B_0 vanishes;
  together these give Omega_0 >= nu_-/2.

Every check returns a partial ConditionReport with verdicts, margins (the
minimum eigenvalue of the tested inequality) and auxiliary values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import KernelOverlap, NotReal
from .opcore import (QuadraticSpec, hs_norm, hs_scale,
                     min_eig_hermitian, sandwich)

DEFAULT_TOL = 1e-10
DEFAULT_EPS = 0.5

_VERDICTS = ("holds", "fails", "undetermined")


@dataclass
class ConditionReport:
    """Partial or merged outcome of condition checks."""

    verdicts: dict = field(default_factory=dict)
    margins: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def merge(self, other: "ConditionReport") -> "ConditionReport":
        self.verdicts.update(other.verdicts)
        self.margins.update(other.margins)
        self.values.update(other.values)
        return self

    def holds(self, name: str) -> bool:
        return self.verdicts.get(name) == "holds"


def check_a1_a2(spec: QuadraticSpec, tol: float = DEFAULT_TOL) -> ConditionReport:
    """A1 (Omega_0 hermitian PSD) and A2 (B_0 symmetric)."""
    rep = ConditionReport()
    scale = hs_scale(spec.omega)
    me = min_eig_hermitian(spec.omega)
    rep.margins["A1"] = me
    rep.verdicts["A1"] = "holds" if me >= -tol * scale else "fails"
    rep.values["omega_defect"] = spec.omega0.defect

    hsb = hs_norm(spec.b)
    rep.margins["A2"] = hsb
    sym_ok = spec.b0.defect <= tol
    rep.verdicts["A2"] = "holds" if sym_ok else "fails"
    rep.values["b_defect"] = spec.b0.defect
    rep.values["hs_b0"] = hsb
    return rep


def check_a3_a6(spec: QuadraticSpec, tol: float = DEFAULT_TOL) -> ConditionReport:
    """A3 and A6 through D = Omega_0 - 4 B_0 (Omega_0^t)^{-1} B_0~."""
    rep = ConditionReport()
    scale = hs_scale(spec.omega)
    try:
        frak_b = sandwich(spec.b, spec.omega, p=1, ker_tol=tol)
    except KernelOverlap as exc:
        rep.verdicts["A3"] = "fails"
        rep.verdicts["A6"] = "fails"
        rep.margins["A3"] = -np.inf
        rep.values["gap_nu"] = 0.0
        rep.values["kernel_overlap"] = str(exc)
        return rep
    d = spec.omega - 4.0 * frak_b.mat
    margin = min_eig_hermitian(d)
    rep.margins["A3"] = margin
    rep.margins["A6"] = margin
    gap_nu = max(margin, 0.0)
    rep.values["gap_nu"] = gap_nu
    rep.verdicts["A3"] = "holds" if margin >= -tol * scale else "fails"
    rep.verdicts["A6"] = "holds" if margin > tol * scale else "fails"
    return rep


def check_a4_a5(spec: QuadraticSpec, eps: float = DEFAULT_EPS,
                tol: float = DEFAULT_TOL) -> ConditionReport:
    """A4 and A5 with the relaxed constant r and weighted norms.

    values carries a4_norm = ||Omega^{-1/2} B||_2, a5_norm =
    ||Omega^{-1-eps} B||_2, r_const (largest r with 1 >= (4+r) E, E the
    p = 2 sandwich; +inf when B vanishes on the relevant subspace) and eps.
    """
    rep = ConditionReport()
    rep.values["eps"] = float(eps)
    scale = 1.0  # the tested inequality 1 >= 4 E is already scale-free
    try:
        e1 = sandwich(spec.b, spec.omega, p=1, ker_tol=tol)
        e2 = sandwich(spec.b, spec.omega, p=2, ker_tol=tol)
        efrac = sandwich(spec.b, spec.omega, p=2.0 + 2.0 * eps, ker_tol=tol)
    except KernelOverlap as exc:
        rep.verdicts["A4"] = "fails"
        rep.verdicts["A5"] = "fails"
        rep.margins["A5"] = -np.inf
        rep.values["kernel_overlap"] = str(exc)
        rep.values["r_const"] = -4.0
        return rep
    rep.values["a4_norm"] = float(np.sqrt(max(np.trace(e1.mat).real, 0.0)))
    rep.values["a5_norm"] = float(np.sqrt(max(np.trace(efrac.mat).real, 0.0)))
    rep.verdicts["A4"] = "holds"
    rep.margins["A4"] = rep.values["a4_norm"]

    lam_max = float(np.linalg.eigvalsh((e2.mat + e2.mat.conj().T) / 2)[-1])
    eye = np.eye(spec.dim)
    margin = min_eig_hermitian(eye - 4.0 * e2.mat)
    rep.margins["A5"] = margin
    rep.values["r_const"] = np.inf if lam_max <= tol * tol else 1.0 / lam_max - 4.0
    rep.verdicts["A5"] = "holds" if margin > tol * scale else "fails"
    return rep


def _require_real(spec: QuadraticSpec, tol: float) -> tuple:
    om_imag = float(np.max(np.abs(spec.omega.imag))) if spec.dim else 0.0
    b_imag = float(np.max(np.abs(spec.b.imag))) if spec.dim else 0.0
    if om_imag > tol * hs_scale(spec.omega) or b_imag > tol * hs_scale(spec.b):
        raise NotReal(
            f"real-matrix criterion on a complex spec (|Im Omega| = {om_imag:.3e}, "
            f"|Im B| = {b_imag:.3e})")
    return spec.omega.real, spec.b.real


def check_friedrichs_berezin(spec: QuadraticSpec, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Real-matrix criterion Omega_0 +- 2 B_0 >= 0 with margin.

    A positive margin guarantees A1 and A6.
    """
    om, b = _require_real(spec, tol)
    rep = ConditionReport()
    lo_minus = min_eig_hermitian(om - 2.0 * b)
    lo_plus = min_eig_hermitian(om + 2.0 * b)
    margin = min(lo_minus, lo_plus)
    rep.margins["FB"] = margin
    rep.values["fb_minus"] = lo_minus
    rep.values["fb_plus"] = lo_plus
    rep.verdicts["FB"] = "holds" if margin >= tol * hs_scale(om) else "fails"
    return rep


def check_kato_mugibayashi(spec: QuadraticSpec, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Real-matrix criterion with a compensating projector.

    P is built from the eigenvectors of Omega_0 - 2 B_0 with eigenvalue below
    tol; the condition asks Omega_0 + 2 B_0 >= nu_- > 0 and
    Omega_0 - 2 B_0 + P >= nu_+ > 0.  When it holds, Omega_0 >= nu_-/2.
    """
    om, b = _require_real(spec, tol)
    rep = ConditionReport()
    scale = hs_scale(om)
    m_minus = (om - 2.0 * b + (om - 2.0 * b).T) / 2
    vals, vecs = np.linalg.eigh(m_minus)
    kernel = vals < tol * scale
    p = vecs[:, kernel] @ vecs[:, kernel].T
    nu_minus = min_eig_hermitian(om + 2.0 * b)
    nu_plus = min_eig_hermitian(m_minus + p)
    rep.values["nu_minus"] = nu_minus
    rep.values["nu_plus"] = nu_plus
    rep.values["p_rank"] = int(kernel.sum())
    rep.margins["KM"] = min(nu_minus, nu_plus)
    ok = nu_minus > tol * scale and nu_plus > tol * scale
    rep.verdicts["KM"] = "holds" if ok else "fails"
    if ok:
        rep.values["omega_lower_bound"] = nu_minus / 2.0
    return rep


def check_all(spec: QuadraticSpec, tol: float = DEFAULT_TOL,
              eps: float = DEFAULT_EPS) -> ConditionReport:
    """Run the full ladder; downstream checks are undetermined when A1 or A2 fail."""
    rep = check_a1_a2(spec, tol)
    if rep.holds("A1") and rep.holds("A2"):
        rep.merge(check_a3_a6(spec, tol))
        rep.merge(check_a4_a5(spec, eps, tol))
    else:
        for name in ("A3", "A4", "A5", "A6"):
            rep.verdicts[name] = "undetermined"
    try:
        rep.merge(check_friedrichs_berezin(spec, tol))
        rep.merge(check_kato_mugibayashi(spec, tol))
    except NotReal as exc:
        rep.verdicts["FB"] = "undetermined"
        rep.verdicts["KM"] = "undetermined"
        rep.values["not_real"] = str(exc)
    return rep
