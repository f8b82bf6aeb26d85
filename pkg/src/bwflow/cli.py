"""Command-line front end: spec files in and out, run orchestration, CSV
and report emission.

Spec files are JSON documents (leading lines starting with '#' are treated
as comments and skipped).  Matrices are row-major lists of [re, im] pairs;
alternatively a "blocks" shorthand lists [omegaMinus, omegaPlus, b] triples
that expand to the block-diagonal form.  Exit codes: 0 ok, 1 condition
check failed, 2 parse or input error, 3 blow-up, 4 not converged.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import io
import json
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analytic, bogoliubov, conditions, flow, fock
from .errors import (BlowupDetected, BwflowError, LogBranch, MapInvalid,
                     NotConverged, NotInRegime, NotOnManifold, OutOfRange,
                     ParseError, PastBlowup, SizeLimit, StepSizeUnderflow)
from .opcore import QuadraticSpec, hs_norm

EXIT_OK = 0
EXIT_CONDITION = 1
EXIT_PARSE = 2
EXIT_BLOWUP = 3
EXIT_NOT_CONVERGED = 4

CSV_HEADER = "t,hsB,c,minEigOmega,motionResidual,kNorm"

ORACLE_FAMILIES = ("equal-product", "generic", "blowup", "block", "pivotal", "mixed")


# ---------------------------------------------------------------------------
# spec files

def _require(cond: bool, message: str, field: Optional[str] = None) -> None:
    if not cond:
        raise ParseError(message, field=field)


def _real_number(x, field: str) -> float:
    _require(isinstance(x, (int, float)) and not isinstance(x, bool),
             f"{field} must be a real number", field)
    return float(x)


def _pairs_to_matrix(entries, dim: int, field: str) -> np.ndarray:
    _require(isinstance(entries, list) and len(entries) == dim * dim,
             f"{field} must be a row-major list of {dim * dim} [re, im] pairs",
             field)
    vals = []
    for i, e in enumerate(entries):
        ok = (isinstance(e, list) and len(e) == 2
              and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in e))
        _require(ok, f"{field}[{i}] must be a [re, im] pair", f"{field}[{i}]")
        vals.append(complex(e[0], e[1]))
    return np.array(vals, dtype=complex).reshape(dim, dim)


def _matrix_to_pairs(m: np.ndarray) -> list:
    return [[float(x.real), float(x.imag)] for x in np.asarray(m, complex).ravel()]


def _max_dim() -> int:
    raw = os.environ.get("BWFLOW_MAX_DIM", "")
    if not raw:
        return 64
    try:
        return int(raw)
    except ValueError:
        raise ParseError(f"BWFLOW_MAX_DIM is not an integer: {raw!r}",
                         field="BWFLOW_MAX_DIM")


def spec_from_doc(doc, source: str = "<doc>") -> QuadraticSpec:
    """Build a QuadraticSpec from a parsed spec document."""
    _require(isinstance(doc, dict), f"{source}: spec document must be an object")
    label = doc.get("label", "")
    _require(isinstance(label, str), "label must be a string", "label")
    c0 = _real_number(doc.get("c0", 0.0), "c0")

    has_blocks = "blocks" in doc
    has_mats = "omega" in doc or "b" in doc
    _require(not (has_blocks and has_mats),
             "exactly one of {omega+b, blocks} may be present", "blocks")
    _require(has_blocks or ("omega" in doc and "b" in doc),
             "spec needs either omega and b or a blocks list")

    if has_blocks:
        blocks = doc["blocks"]
        _require(isinstance(blocks, list) and blocks,
                 "blocks must be a non-empty list of [omegaMinus, omegaPlus, b]",
                 "blocks")
        triples = []
        for i, blk in enumerate(blocks):
            ok = isinstance(blk, list) and len(blk) == 3 and all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in blk)
            _require(ok, f"blocks[{i}] must be [omegaMinus, omegaPlus, b]",
                     f"blocks[{i}]")
            triples.append(tuple(float(x) for x in blk))
        _require(2 * len(triples) <= _max_dim(),
                 f"dimension {2 * len(triples)} exceeds BWFLOW_MAX_DIM", "blocks")
        try:
            return analytic.block_spec(triples, c0=c0, label=label)
        except (ValueError, BwflowError) as exc:
            raise ParseError(f"blocks: {exc}", field="blocks")

    dim = doc.get("dim")
    _require(isinstance(dim, int) and not isinstance(dim, bool) and dim >= 1,
             "dim must be a positive integer", "dim")
    _require(dim <= _max_dim(), f"dim {dim} exceeds BWFLOW_MAX_DIM = {_max_dim()}",
             "dim")
    omega = _pairs_to_matrix(doc["omega"], dim, "omega")
    b = _pairs_to_matrix(doc["b"], dim, "b")
    try:
        return QuadraticSpec.from_matrices(omega, b, c0=c0, label=label)
    except (ValueError, BwflowError) as exc:
        raise ParseError(f"{source}: {exc}")


def parse_spec_text(text: str, source: str = "<string>") -> QuadraticSpec:
    """Parse spec-file text; '#' lines are comments, the rest is JSON."""
    blanked = "\n".join(
        "" if ln.lstrip().startswith("#") else ln for ln in text.splitlines())
    try:
        doc = json.loads(blanked or "null")
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}")
    return spec_from_doc(doc, source)


def load_spec(path: str) -> QuadraticSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read spec file {path}: {exc}")
    return parse_spec_text(text, source=path)


def spec_to_doc(spec: QuadraticSpec) -> dict:
    return {
        "dim": spec.dim,
        "omega": _matrix_to_pairs(spec.omega),
        "b": _matrix_to_pairs(spec.b),
        "c0": float(spec.c0),
        "label": spec.label,
    }


def dump_spec(spec: QuadraticSpec, fh, comments=()) -> None:
    for line in comments:
        fh.write(f"# {line}\n")
    json.dump(spec_to_doc(spec), fh, indent=2)
    fh.write("\n")


# ---------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    """Integration settings shared by the run-like commands."""

    t_end: float = 10.0
    tol: float = 1e-10
    method: str = "rk"
    conv_tol: float = 1e-8
    scalar_sign: float = flow.SCALAR_SIGN
    cutoff: int = 30
    sector_cut: Optional[int] = None
    csv_path: Optional[str] = None
    json_path: Optional[str] = None

    def __post_init__(self):
        if self.t_end <= 0:
            raise ParseError("tEnd must be positive", field="t_end")
        if self.tol <= 0 or self.conv_tol <= 0:
            raise ParseError("tolerances must be positive", field="tol")

    def controls(self) -> flow.Controls:
        return flow.Controls(tol=self.tol, method=self.method,
                             conv_tol=self.conv_tol)


def _config_from_args(args) -> RunConfig:
    return RunConfig(
        t_end=args.t_end,
        tol=args.tol,
        method=getattr(args, "method", "rk"),
        conv_tol=getattr(args, "conv_tol", 1e-8),
        scalar_sign=(1.0 if getattr(args, "paper_scalar_sign", False)
                     else flow.SCALAR_SIGN),
        cutoff=getattr(args, "cutoff", 30),
        sector_cut=getattr(args, "sector_cut", None),
        csv_path=getattr(args, "csv", None),
        json_path=getattr(args, "json", None),
    )


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.ndarray):
        return _json_safe(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# ---------------------------------------------------------------------------
# check

_CONDITION_ORDER = ("A1", "A2", "A3", "A4", "A5", "A6", "FB", "KM")


def render_report(rep: conditions.ConditionReport, out) -> None:
    out.write(f"{'condition':<10} {'verdict':<13} margin\n")
    for name in _CONDITION_ORDER:
        verdict = rep.verdicts.get(name, "undetermined")
        margin = rep.margins.get(name)
        mtxt = "-" if margin is None else f"{margin:.6g}"
        out.write(f"{name:<10} {verdict:<13} {mtxt}\n")
    if rep.values:
        out.write("values:\n")
        for key in sorted(rep.values):
            val = rep.values[key]
            vtxt = f"{val:.6g}" if isinstance(val, (int, float, np.floating)) else str(val)
            out.write(f"  {key} = {vtxt}\n")


def cmd_check(args) -> int:
    spec = load_spec(args.spec)
    rep = conditions.check_all(spec, tol=args.tol, eps=args.eps)
    render_report(rep, sys.stdout)
    if args.json:
        doc = _json_safe({"label": spec.label, "verdicts": rep.verdicts,
                          "margins": rep.margins, "values": rep.values})
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    ok = all(rep.holds(name) for name in ("A1", "A2", "A3"))
    return EXIT_OK if ok else EXIT_CONDITION


# ---------------------------------------------------------------------------
# run

def _print_blowup(exc: BlowupDetected, out) -> None:
    ev = exc.event
    out.write("blow-up detected\n")
    if ev is not None:
        out.write(f"  onset t* = {ev.t:.9g} with ||B_t||_2 = {ev.hs_b:.6g}\n")
        out.write(f"  T_max estimate >= {ev.t:.9g}\n")
        out.write(f"  guaranteed blow-up-free horizon T_0 = {ev.t0_lower_bound:.9g}\n")
    else:
        out.write(f"  {exc}\n")


def _run_summary(traj: flow.Trajectory, out) -> None:
    final = traj.final
    conv = traj.converged()
    out.write(f"converged: {'yes' if conv else 'no'} "
              f"(final ||B_t||_2 = {final.hs_b:.6g} at t = {final.t:.6g}, "
              f"convTol = {traj.controls.conv_tol:g})\n")
    omega_inf, c_inf, _ = flow.limit_extract(traj)
    eigs = np.linalg.eigvalsh((omega_inf + omega_inf.conj().T) / 2)
    out.write("OmegaInf eigenvalues: "
              + ", ".join(f"{v:.12g}" for v in eigs) + "\n")
    out.write(f"cInf = {c_inf:.12g}\n")
    out.write(f"scalar identity residual |2(cInf-c0) - sign*tr(Omega0-OmegaInf)| = "
              f"{traj.stats['limit_identity_residual']:.3e}\n")
    try:
        fit = flow.decay_fit(traj)
        out.write(f"fitted decay rate: {fit.rate:.6g} "
                  f"(window t in [{fit.window[0]:.4g}, {fit.window[1]:.4g}], "
                  f"{fit.n_samples} samples)\n")
    except BwflowError as exc:
        out.write(f"fitted decay rate: n/a ({exc})\n")
    worst_motion = max(d.motion_residual for d in traj.diags)
    worst_matrix = max(d.matrix_motion_residual for d in traj.diags)
    worst_k = max(d.k_norm for d in traj.diags)
    out.write(f"worst residuals: motion {worst_motion:.3e}, "
              f"matrix motion {worst_matrix:.3e}, kNorm max {worst_k:.3e}\n")


def cmd_run(args) -> int:
    spec = load_spec(args.spec)
    cfg = _config_from_args(args)
    try:
        traj = flow.integrate(spec, cfg.t_end, cfg.controls(),
                              scalar_sign=cfg.scalar_sign)
    except BlowupDetected as exc:
        if cfg.csv_path and exc.trajectory is not None:
            exc.trajectory.write_csv(cfg.csv_path)
        _print_blowup(exc, sys.stdout)
        return EXIT_BLOWUP
    if cfg.csv_path:
        traj.write_csv(cfg.csv_path)
    _run_summary(traj, sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# diag

def _fmt_complex(z: complex) -> str:
    return f"{z.real:.10g}{z.imag:+.10g}j"


def _print_matrix(name: str, m: np.ndarray, out) -> None:
    out.write(f"{name} =\n")
    for row in np.asarray(m, complex):
        out.write("  [" + ", ".join(_fmt_complex(z) for z in row) + "]\n")


def cmd_diag(args) -> int:
    spec = load_spec(args.spec)
    cfg = _config_from_args(args)
    try:
        traj = flow.integrate(spec, cfg.t_end, cfg.controls(),
                              scalar_sign=cfg.scalar_sign)
    except BlowupDetected as exc:
        _print_blowup(exc, sys.stdout)
        return EXIT_BLOWUP
    if not traj.converged():
        sys.stdout.write(
            f"not converged: final ||B_t||_2 = {traj.final.hs_b:.6g} "
            f"at t = {traj.final.t:.6g} (convTol {traj.controls.conv_tol:g})\n")
        return EXIT_NOT_CONVERGED

    t_final = traj.final.t
    bp = traj.b_path()
    m = bogoliubov.integrate_uv(bp, 0.0, t_final, cfg.controls())
    _print_matrix(f"u(T={t_final:g}, 0)", m.u, sys.stdout)
    _print_matrix(f"v(T={t_final:g}, 0)", m.v, sys.stdout)

    res = bogoliubov.symplectic_residuals(m)
    sys.stdout.write("symplectic residuals:\n")
    for key in sorted(res):
        sys.stdout.write(f"  {key} = {res[key]:.3e}\n")

    int_b = bogoliubov.path_hs_integral(bp, 0.0, t_final)
    holds_u, holds_v = bogoliubov.norm_bounds(m, int_b)
    sys.stdout.write(
        f"norm bounds (int ||B|| = {int_b:.6g}):\n"
        f"  1 + ||u - 1||_2 = {1.0 + hs_norm(m.u - np.eye(spec.dim)):.6g}"
        f" <= cosh(4 int) = {float(np.cosh(4 * int_b)):.6g}\n"
        f"  ||v||_2 = {hs_norm(m.v):.6g}"
        f" <= sinh(4 int) = {float(np.sinh(4 * int_b)):.6g}\n"
        f"  holds: {'yes' if holds_u and holds_v else 'NO'}\n")

    transformed = bogoliubov.transform_spec(m, spec)
    final = traj.final
    d_om = hs_norm(transformed.omega - final.omega)
    d_b = hs_norm(transformed.b - final.b)
    d_c = abs(transformed.c0 - final.c)
    sys.stdout.write(
        f"transform round trip vs flow state at T: |dOmega| = {d_om:.3e}, "
        f"|dB| = {d_b:.3e}, |dC| = {d_c:.3e}\n")

    decomp = bogoliubov.decompose_generator(m)
    alphas = [a for a in decomp.alphas if a > 1e-12]
    if alphas:
        sys.stdout.write("squeeze strengths: "
                         + ", ".join(f"{a:.8g}" for a in alphas) + "\n")
    else:
        sys.stdout.write("squeeze strengths: (none)\n")
    _print_matrix("hMatrix", decomp.h_matrix, sys.stdout)

    if cfg.json_path:
        doc = _json_safe({
            "t": t_final,
            "dim": spec.dim,
            "u": _matrix_to_pairs(m.u),
            "v": _matrix_to_pairs(m.v),
            "symplectic_residuals": res,
            "int_hs_b": int_b,
            "norm_bounds": [holds_u, holds_v],
            "transform_residuals": {"omega": d_om, "b": d_b, "c": d_c},
            "alphas": decomp.alphas,
            "h_matrix": _matrix_to_pairs(decomp.h_matrix),
        })
        with open(cfg.json_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fock-verify

def cmd_fock_verify(args) -> int:
    spec = load_spec(args.spec)
    if spec.dim > 2:
        raise SizeLimit(f"fock-verify handles at most 2 modes, got {spec.dim}")
    cfg = _config_from_args(args)
    cutoff = cfg.cutoff
    sector_cut = cfg.sector_cut
    if sector_cut is None:
        sector_cut = max(0, min(cutoff - 4, cutoff // 2))
    if sector_cut > cutoff - 4:
        raise ParseError("sector cut must be at most cutoff - 4",
                         field="sector_cut")

    fk = fock.build_basis(spec.dim, cutoff)
    out = sys.stdout
    out.write(f"modes = {spec.dim}, cutoff = {cutoff}, basis dim = {fk.dim}, "
              f"sector cut = {sector_cut}\n")

    h0 = fock.hamiltonian_op(fk, spec)
    out.write(f"hermiticity residual of H0: {fock.hermiticity_residual(h0):.3e}\n")

    trajs = {}
    for sign in (-1.0, 1.0):
        trajs[sign] = flow.integrate(spec, cfg.t_end, cfg.controls(),
                                     scalar_sign=sign)
    t_final = trajs[-1.0].final.t
    u = fock.propagate(fk, trajs[-1.0], 0.0, t_final, tol=cfg.tol)
    out.write(f"unitarity residual of U(t={t_final:g}) on interior sectors: "
              f"{fock.unitarity_residual(fk, u):.3e}\n")

    for sign in (-1.0, 1.0):
        final = trajs[sign].final
        spec_t = QuadraticSpec.from_matrices(
            final.omega, final.b, c0=final.c,
            label=f"{spec.label}@t={t_final:g}", sym_tol=np.inf)
        resid = fock.conjugation_residual(fk, u, spec, spec_t, sector_cut)
        out.write(f"conjugation residual at t = {t_final:g} with scalar sign "
                  f"{sign:+g}: {resid:.6e}\n")

    c_inf = {}
    for sign in (-1.0, 1.0):
        omega_inf, c_val, conv = flow.limit_extract(trajs[sign])
        c_inf[sign] = c_val
        if sign == -1.0:
            spec_inf = QuadraticSpec.from_matrices(
                omega_inf, np.zeros_like(omega_inf), c0=c_val,
                label="limit", sym_tol=np.inf)
            nd = fock.n_diag_residual(fk, spec_inf)
            out.write(f"n-diag residual of H(OmegaInf, 0, cInf): {nd:.6e}"
                      + ("" if conv else "  [flow not converged]") + "\n")

    e0 = fock.ground_energy(fk, spec)
    shift = fock.ground_truncation_shift(fk, spec) if cutoff >= 8 else float("nan")
    out.write(f"ground energy of truncated H0: {e0:.10g} "
              f"(truncation shift estimate {shift:.3e})\n")
    for sign in (-1.0, 1.0):
        out.write(f"cInf with scalar sign {sign:+g}: {c_inf[sign]:.10g} "
                  f"(ground - cInf = {e0 - c_inf[sign]:+.6e})\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle

def _parse_grid(raw: str) -> np.ndarray:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ParseError("grid must be start:stop:step", field="csv")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ParseError(f"grid values must be numbers: {raw!r}", field="csv")
    if step <= 0 or stop < start:
        raise ParseError("grid needs step > 0 and stop >= start", field="csv")
    n = int(round((stop - start) / step))
    ts = start + step * np.arange(n + 1)
    return ts[ts <= stop + 1e-12 * max(1.0, abs(stop))]


def _block_closed_form(om_minus: float, om_plus: float, b: float, ts: np.ndarray):
    """Closed-form (om_-, om_+, b^2, int b^2) arrays for one block."""
    if b == 0.0:
        shape = np.full_like(ts, 1.0)
        return om_minus * shape, om_plus * shape, 0.0 * shape, 0.0 * shape
    if om_plus == 0.0:
        omt, bt, _ = analytic.exact_blowup(b, ts)
        ib = analytic.exact_blowup_int_b2(b, ts)
        return omt, omt, bt ** 2, ib
    gap = om_plus * om_minus - 4.0 * b * b
    scale = max(1.0, abs(om_plus * om_minus))
    if abs(gap) <= analytic.PRODUCT_TOL * scale:
        omm, omp, bt2 = analytic.exact_equal_product(om_minus, om_plus, b, ts)
        ib = analytic.exact_equal_product_int_b2(om_minus, om_plus, b, ts)
    elif gap > 0:
        omm, omp, bt2 = analytic.exact_generic(om_minus, om_plus, b, ts)
        ib = analytic.exact_generic_int_b2(om_minus, om_plus, b, ts)
    else:
        raise OutOfRange(
            "no closed form for a block with om_+ om_- < 4 b^2 and Omega != 0")
    return np.atleast_1d(omm), np.atleast_1d(omp), np.atleast_1d(bt2), np.atleast_1d(ib)


def block_trajectory_rows(blocks, ts: np.ndarray, c0: float = 0.0,
                          scalar_sign: float = flow.SCALAR_SIGN):
    """Exact per-sample CSV columns for a block family."""
    ts = np.asarray(ts, dtype=float)
    hsb2 = np.zeros_like(ts)
    int_total = np.zeros_like(ts)
    knorm2 = np.zeros_like(ts)
    min_eig = np.full_like(ts, np.inf)
    for om_minus, om_plus, b in blocks:
        omm, omp, bt2, ib = _block_closed_form(float(om_minus), float(om_plus),
                                               float(b), ts)
        delta = float(om_plus) - float(om_minus)
        hsb2 += 2.0 * bt2
        int_total += 2.0 * ib
        knorm2 += 2.0 * bt2 * delta * delta
        min_eig = np.minimum(min_eig, np.minimum(omm, omp))
    c = c0 + scalar_sign * 8.0 * int_total
    return np.sqrt(hsb2), c, min_eig, np.sqrt(knorm2)


def write_exact_csv(blocks, ts: np.ndarray, fh, c0: float = 0.0,
                    scalar_sign: float = flow.SCALAR_SIGN) -> None:
    hsb, c, min_eig, knorm = block_trajectory_rows(blocks, ts, c0, scalar_sign)
    fh.write(CSV_HEADER + "\n")
    for i, t in enumerate(ts):
        row = (t, hsb[i], c[i], min_eig[i], 0.0, knorm[i])
        fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _oracle_blocks(family: str, params) -> tuple:
    """(blocks, label, comments) for an oracle family."""
    def _floats(n, names):
        if len(params) != n:
            raise OutOfRange(f"{family} expects {n} parameters ({names})")
        return [float(p) for p in params]

    if family == "generic":
        om_minus, om_plus, b = _floats(3, "omegaMinus omegaPlus b")
        analytic.exact_generic(om_minus, om_plus, b, 0.0)  # regime check
        return [(om_minus, om_plus, b)], f"generic-{om_minus:g}-{om_plus:g}-{b:g}", []
    if family == "equal-product":
        om_minus, om_plus, b = _floats(3, "omegaMinus omegaPlus b")
        analytic.exact_equal_product(om_minus, om_plus, b, 0.0)  # manifold check
        return ([(om_minus, om_plus, b)],
                f"equal-product-{om_minus:g}-{om_plus:g}-{b:g}", [])
    if family == "blowup":
        (b,) = _floats(1, "b")
        if b <= 0:
            raise OutOfRange("blowup expects b > 0")
        tmax = analytic.blowup_time(b)
        return [(0.0, 0.0, b)], f"blowup-{b:g}", [f"tMax = {tmax!r}"]
    if family == "block":
        if not params or len(params) % 3 != 0:
            raise OutOfRange("block expects triples: omegaMinus omegaPlus b ...")
        vals = [float(p) for p in params]
        blocks = [tuple(vals[i:i + 3]) for i in range(0, len(vals), 3)]
        return blocks, f"block-x{len(blocks)}", []
    if family == "pivotal":
        if len(params) != 1:
            raise OutOfRange("pivotal expects one parameter K")
        k = int(params[0])
        spec = analytic.pivotal_family(k)
        blocks = [(float(spec.omega[2 * j, 2 * j].real),
                   float(spec.omega[2 * j + 1, 2 * j + 1].real),
                   float(spec.b[2 * j, 2 * j + 1].real))
                  for j in range(k)]
        return blocks, spec.label, []
    if family == "mixed":
        if len(params) != 2:
            raise OutOfRange("mixed expects two parameters: b1 K")
        b1, k = float(params[0]), int(params[1])
        spec = analytic.mixed_family(b1, k)
        blocks = [(float(spec.omega[2 * j, 2 * j].real),
                   float(spec.omega[2 * j + 1, 2 * j + 1].real),
                   float(spec.b[2 * j, 2 * j + 1].real))
                  for j in range(k)]
        return blocks, spec.label, []
    raise OutOfRange(f"unknown family {family!r}; choose from {ORACLE_FAMILIES}")


def cmd_oracle(args) -> int:
    blocks, label, comments = _oracle_blocks(args.family, args.params)
    spec = analytic.block_spec(blocks, c0=args.c0, label=label)
    sign = 1.0 if args.paper_scalar_sign else flow.SCALAR_SIGN

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            dump_spec(spec, fh, comments)
    if args.csv:
        ts = _parse_grid(args.csv)
        write_exact_csv(blocks, ts, sys.stdout, c0=args.c0, scalar_sign=sign)
    elif not args.out:
        dump_spec(spec, sys.stdout, comments)
    return EXIT_OK


# ---------------------------------------------------------------------------
# batch

def _batch_one(path: str, cfg_args: dict) -> tuple:
    """Run one spec; returns (path, exit_code, summary_text)."""
    out = io.StringIO()
    csv_dir = cfg_args.get("csv_dir")

    def csv_path() -> str:
        stem = os.path.splitext(os.path.basename(path))[0]
        return os.path.join(csv_dir, stem + ".csv")

    try:
        spec = load_spec(path)
        cfg = RunConfig(**{k: v for k, v in cfg_args.items() if k != "csv_dir"})
        try:
            traj = flow.integrate(spec, cfg.t_end, cfg.controls(),
                                  scalar_sign=cfg.scalar_sign)
        except BlowupDetected as exc:
            if csv_dir and exc.trajectory is not None:
                exc.trajectory.write_csv(csv_path())
            _print_blowup(exc, out)
            return path, EXIT_BLOWUP, out.getvalue()
        if csv_dir:
            traj.write_csv(csv_path())
        _run_summary(traj, out)
        return path, EXIT_OK, out.getvalue()
    except ParseError as exc:
        return path, EXIT_PARSE, f"parse error: {exc}\n"
    except BwflowError as exc:
        return path, EXIT_PARSE, f"error: {type(exc).__name__}: {exc}\n"


def cmd_batch(args) -> int:
    cfg_args = {
        "t_end": args.t_end,
        "tol": args.tol,
        "method": args.method,
        "conv_tol": args.conv_tol,
        "scalar_sign": (1.0 if args.paper_scalar_sign else flow.SCALAR_SIGN),
        "csv_dir": args.csv_dir,
    }
    if args.csv_dir:
        os.makedirs(args.csv_dir, exist_ok=True)
    if args.jobs > 1 and len(args.specs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_one, args.specs,
                                    [cfg_args] * len(args.specs)))
    else:
        results = [_batch_one(p, cfg_args) for p in args.specs]
    worst = EXIT_OK
    for path, code, text in results:
        sys.stdout.write(f"== {path} (exit {code})\n")
        sys.stdout.write(text)
        if code != EXIT_OK and worst == EXIT_OK:
            worst = code
    return worst


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bwflow",
        description=("Diagonalize quadratic boson Hamiltonians by integrating "
                     "the double-bracket flow on (Omega, B, C)."))
    sub = parser.add_subparsers(dest="command", required=True)

    run_opts = argparse.ArgumentParser(add_help=False)
    run_opts.add_argument("--t-end", type=float, default=10.0,
                          help="integration horizon (default 10)")
    run_opts.add_argument("--tol", type=float, default=1e-10,
                          help="integrator tolerance (default 1e-10)")
    run_opts.add_argument("--method", choices=("rk", "split"), default="rk",
                          help="stepper: adaptive embedded pair or Strang split")
    run_opts.add_argument("--conv-tol", type=float, default=1e-8,
                          help="||B_t||_2 threshold declaring convergence")
    run_opts.add_argument("--paper-scalar-sign", action="store_true",
                          help="use dC = +8||B||^2 instead of the default -8")

    p_check = sub.add_parser("check", help="evaluate the condition ladder")
    p_check.add_argument("spec")
    p_check.add_argument("--tol", type=float, default=conditions.DEFAULT_TOL)
    p_check.add_argument("--eps", type=float, default=conditions.DEFAULT_EPS,
                         help="fractional exponent offset for the A5 norm")
    p_check.add_argument("--json", help="also write verdicts/margins as JSON")
    p_check.set_defaults(func=cmd_check)

    p_run = sub.add_parser("run", parents=[run_opts],
                           help="integrate the flow, emit CSV and a summary")
    p_run.add_argument("spec")
    p_run.add_argument("--csv", help="write the trajectory CSV to this path")
    p_run.set_defaults(func=cmd_run)

    p_diag = sub.add_parser("diag", parents=[run_opts],
                            help="compute the diagonalizing map at the final time")
    p_diag.add_argument("spec")
    p_diag.add_argument("--json", help="write (u, v) and tables as JSON")
    p_diag.set_defaults(func=cmd_diag)

    p_fock = sub.add_parser("fock-verify", parents=[run_opts],
                            help="verify the run against dense truncated-Fock matrices")
    p_fock.add_argument("spec")
    p_fock.add_argument("--cutoff", type=int, default=30,
                        help="total occupation cutoff (default 30)")
    p_fock.add_argument("--sector-cut", type=int, default=None,
                        help="projection sector for residuals (default cutoff//2)")
    p_fock.set_defaults(func=cmd_fock_verify, t_end=2.0)

    p_oracle = sub.add_parser("oracle",
                              help="emit a closed-form family spec and exact CSV")
    p_oracle.add_argument("family", choices=ORACLE_FAMILIES)
    p_oracle.add_argument("params", nargs="*",
                          help="family parameters, e.g. generic 1 2 0.5")
    p_oracle.add_argument("--c0", type=float, default=0.0)
    p_oracle.add_argument("--out", help="write the spec file here "
                          "(default: stdout when --csv is absent)")
    p_oracle.add_argument("--csv", metavar="START:STOP:STEP",
                          help="print the exact trajectory CSV on this grid")
    p_oracle.add_argument("--paper-scalar-sign", action="store_true")
    p_oracle.set_defaults(func=cmd_oracle)

    p_batch = sub.add_parser("batch", parents=[run_opts],
                             help="run several specs, optionally in parallel")
    p_batch.add_argument("specs", nargs="+")
    p_batch.add_argument("--jobs", type=int, default=1,
                         help="parallel workers (independent specs only)")
    p_batch.add_argument("--csv-dir", help="write one trajectory CSV per spec here")
    p_batch.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (SizeLimit, OutOfRange, NotOnManifold, NotInRegime, PastBlowup) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except BlowupDetected as exc:
        _print_blowup(exc, sys.stdout)
        return EXIT_BLOWUP
    except (NotConverged, StepSizeUnderflow, MapInvalid, LogBranch) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
