"""Integration of the double-bracket flow on (Omega, B, C).

The flow is the coupled matrix ODE

    d/dt Omega_t = -16 B_t B_t~
    d/dt B_t     = -2 (Omega_t B_t + B_t Omega_t^t)
    d/dt C_t     = SCALAR_SIGN * 8 ||B_t||_2^2

with Omega hermitian PSD and B symmetric.  The scalar sign is a module
constant: the default -1 is the convention under which the truncated Fock
oracle confirms H_t = U_{t,0} H_0 U_{t,0}^* including the scalar term (see
fock.conjugation_residual); the opposite convention +1 can be selected per
run and is printed alongside the default by the fock-verify command.

Monitored identities along the flow:

* ||B_t||_2 is nonincreasing and Omega_t <= Omega_0;
* Omega_t^2 - 8 B_t B_t~ >= Omega_0^2 - 8 B_0 B_0~;
* tr(Omega_t^2 - 4 B_t B_t~) is a constant of motion;
* K_t = Omega_t B_t - B_t Omega_t^t vanishes for all t if it vanishes at 0,
  and then the full matrix Omega_t^2 - 4 B_t B_t~ is invariant;
* if ||B_t||_2 leaves every bound, it can only do so in finite time; the
  guaranteed blow-up-free horizon is T_0 = 1/(128 ||B_0||_2).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import BlowupDetected, NotConverged, InsufficientData, NotPSD, PathGap, \
    StepSizeUnderflow
from .opcore import QuadraticSpec, hs_norm, hs_scale, min_eig_hermitian, psd_power
from .stepping import drive_rk45

# Sign of the scalar-coefficient rate dC/dt = SCALAR_SIGN * 8 ||B||_2^2.
SCALAR_SIGN = -1.0


@dataclass
class Controls:
    """Integrator configuration."""

    tol: float = 1e-10
    h_min: float = 1e-12
    blowup_factor: float = 1e3
    max_samples: int = 10000
    method: str = "rk"  # "rk" (adaptive embedded pair) or "split" (Strang)
    split_h: float = 1e-3
    conv_tol: float = 1e-8
    max_step: float = np.inf


@dataclass
class FlowState:
    """Flow variables at one time."""

    t: float
    omega: np.ndarray
    b: np.ndarray
    c: float

    @property
    def hs_b(self) -> float:
        return float(np.linalg.norm(self.b))


@dataclass
class FlowDiagnostics:
    hs_b: float
    c: float
    min_eig_omega: float
    motion_residual: float        # |tr(Omega^2 - 4 B B~) - initial|
    k_norm: float                 # ||Omega B - B Omega^t||_2
    matrix_motion_residual: float  # ||(Omega^2 - 4 B B~) - initial||_2
    omega_decrease_margin: float  # min eig (Omega_0 - Omega_t)
    square_mono_margin: float     # min eig ((Om_t^2 - 8 BB~) - (Om_0^2 - 8 B0B0~))


@dataclass
class FlowEvent:
    kind: str  # "blowup" or "underflow"
    t: float
    hs_b: float
    message: str
    t0_lower_bound: float = 0.0


def t0_horizon(hs_b0: float) -> float:
    """Guaranteed blow-up-free horizon T_0 = 1/(128 ||B_0||_2)."""
    if hs_b0 <= 0:
        return np.inf
    return 1.0 / (128.0 * hs_b0)


def _rhs_mats(omega: np.ndarray, b: np.ndarray, scalar_sign: float):
    bbar = b.conj()
    domega = -16.0 * (b @ bbar)
    db = -2.0 * (omega @ b + b @ omega.T)
    dc = scalar_sign * 8.0 * float(np.linalg.norm(b)) ** 2
    return domega, db, dc


def rhs(state: FlowState, scalar_sign: float = SCALAR_SIGN):
    """Right-hand side (dOmega, dB, dC) at a state."""
    return _rhs_mats(state.omega, state.b, scalar_sign)


def _pack(omega, b, c, n):
    return np.concatenate([
        omega.real.ravel(), omega.imag.ravel(),
        b.real.ravel(), b.imag.ravel(), [c]])


def _unpack(y, n):
    n2 = n * n
    omega = y[:n2].reshape(n, n) + 1j * y[n2:2 * n2].reshape(n, n)
    b = y[2 * n2:3 * n2].reshape(n, n) + 1j * y[3 * n2:4 * n2].reshape(n, n)
    return omega, b, float(y[4 * n2])


def motion_residuals(state: FlowState, spec: QuadraticSpec) -> dict:
    """Conserved-quantity residuals of a state against its initial spec."""
    om0, b0 = spec.omega, spec.b
    ref = om0 @ om0 - 4.0 * (b0 @ b0.conj())
    cur = state.omega @ state.omega - 4.0 * (state.b @ state.b.conj())
    k = state.omega @ state.b - state.b @ state.omega.T
    return {
        "trace": abs(float(np.trace(cur).real) - float(np.trace(ref).real)),
        "matrix": hs_norm(cur - ref),
        "k_norm": hs_norm(k),
    }


def blowup_guard(state: FlowState, hs_b0: float, controls: Controls) -> Optional[FlowEvent]:
    """Return a blow-up event when ||B_t||_2 crosses blowup_factor * ||B_0||_2."""
    hsb = state.hs_b
    threshold = controls.blowup_factor * hs_b0
    if hs_b0 > 0 and hsb > threshold:
        t0 = t0_horizon(hs_b0)
        return FlowEvent(
            kind="blowup", t=state.t, hs_b=hsb,
            message=(f"||B_t||_2 = {hsb:.6g} exceeded {controls.blowup_factor:g} x "
                     f"||B_0||_2 at t = {state.t:.9g} "
                     f"(T_max estimate >= {state.t:.9g}, guaranteed horizon T_0 = {t0:.9g})"),
            t0_lower_bound=t0)
    return None


class _Recorder:
    """Keeps up to max_samples states, thinning by stride doubling."""

    def __init__(self, max_samples: int):
        self.max_samples = max(2, int(max_samples))
        self.stride = 1
        self.count = 0
        self.samples = []  # list[FlowState]

    def offer(self, state: FlowState, force: bool = False):
        take = force or (self.count % self.stride == 0)
        self.count += 1
        if not take:
            return
        if self.samples and state.t == self.samples[-1].t:
            # same-time re-offers happen at events; keep one sample per time
            self.samples[-1] = state
            return
        self.samples.append(state)
        if len(self.samples) > self.max_samples:
            # keep every second sample, but never drop the first
            self.samples = self.samples[::2]
            self.stride *= 2


def splitting_step(state: FlowState, h: float,
                   scalar_sign: float = SCALAR_SIGN) -> FlowState:
    """One Strang step: exact B half-flows around a midpoint Omega update.

    The B-subflow with frozen Omega is B -> e^{-2 h Omega} B e^{-2 h Omega^t},
    solved exactly through the eigendecomposition of Omega; the Omega-subflow
    with frozen B is linear in t and its Euler update is exact.  C picks up
    the midpoint quadrature of scalar_sign * 8 ||B||_2^2.  Local error is
    O(h^3), so this survives stiff Omega where an explicit step would not.
    """
    omega, b, c = state.omega, state.b, state.c

    def half(om, bmat):
        vals, vecs = np.linalg.eigh((om + om.conj().T) / 2)
        e = (vecs * np.exp(-h * vals)) @ vecs.conj().T  # exp(-h Omega)
        return e @ bmat @ e.T

    b_mid = half(omega, b)
    b_mid = (b_mid + b_mid.T) / 2
    omega_new = omega - 16.0 * h * (b_mid @ b_mid.conj())
    omega_new = (omega_new + omega_new.conj().T) / 2
    c_new = c + scalar_sign * 8.0 * h * float(np.linalg.norm(b_mid)) ** 2
    b_new = half(omega_new, b_mid)
    b_new = (b_new + b_new.T) / 2
    return FlowState(t=state.t + h, omega=omega_new, b=b_new, c=c_new)


class Trajectory:
    """Sampled flow history with diagnostics, events and interpolation."""

    def __init__(self, spec: QuadraticSpec, controls: Controls, scalar_sign: float,
                 states: list, events: list, stats: dict):
        self.spec = spec
        self.controls = controls
        self.scalar_sign = float(scalar_sign)
        self.states = states
        self.events = events
        self.stats = dict(stats)
        self.diags = [self._diag(s) for s in states]
        self._spline = None

    def _diag(self, state: FlowState) -> FlowDiagnostics:
        res = motion_residuals(state, self.spec)
        om0, b0 = self.spec.omega, self.spec.b
        sq0 = om0 @ om0 - 8.0 * (b0 @ b0.conj())
        sqt = state.omega @ state.omega - 8.0 * (state.b @ state.b.conj())
        return FlowDiagnostics(
            hs_b=state.hs_b,
            c=state.c,
            min_eig_omega=min_eig_hermitian(state.omega),
            motion_residual=res["trace"],
            k_norm=res["k_norm"],
            matrix_motion_residual=res["matrix"],
            omega_decrease_margin=min_eig_hermitian(om0 - state.omega),
            square_mono_margin=min_eig_hermitian(sqt - sq0),
        )

    @property
    def ts(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def hs_bs(self) -> np.ndarray:
        return np.array([s.hs_b for s in self.states])

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def converged(self, conv_tol: Optional[float] = None) -> bool:
        tol = self.controls.conv_tol if conv_tol is None else conv_tol
        return self.final.hs_b < tol

    def _ensure_spline(self):
        if self._spline is not None:
            return
        n = self.spec.dim
        ts = self.ts
        ys = np.stack([_pack(s.omega, s.b, s.c, n) for s in self.states])
        dys = []
        for s in self.states:
            dom, db, dc = _rhs_mats(s.omega, s.b, self.scalar_sign)
            dys.append(_pack(dom, db, dc, n))
        self._spline = CubicHermiteSpline(ts, ys, np.stack(dys), axis=0)

    def state_at(self, t: float) -> FlowState:
        """Cubic Hermite interpolation between samples (exact derivatives)."""
        ts = self.ts
        if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
            raise PathGap(f"t = {t:.6g} outside stored window [{ts[0]:.6g}, {ts[-1]:.6g}]")
        if len(self.states) == 1:
            s = self.states[0]
            return FlowState(t=float(t), omega=s.omega.copy(), b=s.b.copy(), c=s.c)
        self._ensure_spline()
        t_eff = min(max(t, ts[0]), ts[-1])
        omega, b, c = _unpack(self._spline(t_eff), self.spec.dim)
        omega = (omega + omega.conj().T) / 2
        b = (b + b.T) / 2
        return FlowState(t=float(t), omega=omega, b=b, c=c)

    def b_path(self) -> "BPath":
        return BPath(self)

    def write_csv(self, fh) -> None:
        """Write the sampled diagnostics; fixed column set, 17 significant digits."""
        close = False
        if isinstance(fh, (str, bytes)):
            fh = open(fh, "w", encoding="ascii", newline="\n")
            close = True
        try:
            fh.write("t,hsB,c,minEigOmega,motionResidual,kNorm\n")
            for s, d in zip(self.states, self.diags):
                row = (s.t, d.hs_b, d.c, d.min_eig_omega, d.motion_residual, d.k_norm)
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        finally:
            if close:
                fh.close()


class BPath:
    """Time-indexed access to B_t backed by a trajectory's interpolant."""

    def __init__(self, traj: Trajectory):
        self._traj = traj
        ts = traj.ts
        self.t0 = float(ts[0])
        self.t1 = float(ts[-1])

    def __call__(self, t: float) -> np.ndarray:
        return self._traj.state_at(t).b


class FunctionBPath:
    """Wrap an explicit function t -> B matrix as a path on [t0, t1]."""

    def __init__(self, fn, t0: float, t1: float):
        self._fn = fn
        self.t0 = float(t0)
        self.t1 = float(t1)

    def __call__(self, t: float) -> np.ndarray:
        if t < self.t0 - 1e-9 or t > self.t1 + 1e-9:
            raise PathGap(f"t = {t:.6g} outside [{self.t0:.6g}, {self.t1:.6g}]")
        return np.asarray(self._fn(min(max(t, self.t0), self.t1)), dtype=complex)


def integrate(spec: QuadraticSpec, t_end: float, controls: Optional[Controls] = None,
              scalar_sign: Optional[float] = None) -> Trajectory:
    """Integrate the flow from spec over [0, t_end].

    Samples every accepted step (thinned beyond controls.max_samples).  The
    blow-up guard raises BlowupDetected carrying the partial trajectory; a
    step-size underflow while ||B|| grows is classified the same way, and
    otherwise raises StepSizeUnderflow.
    """
    controls = controls or Controls()
    sign = SCALAR_SIGN if scalar_sign is None else float(scalar_sign)
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    me = min_eig_hermitian(spec.omega)
    if me < -1e-8 * hs_scale(spec.omega):
        raise NotPSD(f"Omega_0 has eigenvalue {me:.3e}; the flow requires Omega_0 >= 0")

    n = spec.dim
    hs_b0 = hs_norm(spec.b)
    start = time.perf_counter()

    recorder = _Recorder(controls.max_samples)
    state0 = FlowState(0.0, spec.omega.copy(), spec.b.copy(), spec.c0)
    recorder.offer(state0, force=True)
    events = []

    def finish(extra_stats):
        stats = {"hs_b0": hs_b0, "wall_time": time.perf_counter() - start,
                 "scalar_sign": sign, "t_end": t_end}
        stats.update(extra_stats)
        return Trajectory(spec, controls, sign, recorder.samples, events, stats)

    def check_blowup(state: FlowState):
        ev = blowup_guard(state, hs_b0, controls)
        if ev is not None:
            events.append(ev)
            recorder.offer(state, force=True)
            traj = finish({"stopped": "blowup"})
            raise BlowupDetected(ev.message, trajectory=traj, event=ev)

    if controls.method == "split":
        state = state0
        h = controls.split_h
        while state.t < t_end - 1e-15:
            step = min(h, t_end - state.t)
            state = splitting_step(state, step, sign)
            recorder.offer(state, force=(state.t >= t_end - 1e-15))
            check_blowup(state)
        return finish({"n_steps": recorder.count - 1, "method": "split"})

    if controls.method != "rk":
        raise ValueError(f"unknown method {controls.method!r}")

    def fun(t, y):
        omega, b, _ = _unpack(y, n)
        dom, db, dc = _rhs_mats(omega, b, sign)
        return _pack(dom, db, dc, n)

    def project(y):
        omega, b, c = _unpack(y, n)
        omega = (omega + omega.conj().T) / 2
        b = (b + b.T) / 2
        return _pack(omega, b, c, n)

    def on_step(t, y):
        omega, b, c = _unpack(y, n)
        state = FlowState(float(t), omega, b, c)
        recorder.offer(state, force=(t >= t_end))
        check_blowup(state)
        return True

    y0 = _pack(spec.omega, spec.b, spec.c0, n)
    try:
        solver = drive_rk45(fun, 0.0, y0, t_end, rtol=controls.tol, atol=controls.tol,
                            h_min=controls.h_min, project=project, on_step=on_step,
                            max_step=controls.max_step)
    except StepSizeUnderflow as exc:
        # an underflow while ||B|| is still growing is the blow-up signature
        last = recorder.samples[-1]
        growing = len(recorder.samples) >= 2 and last.hs_b > recorder.samples[-2].hs_b
        if growing or last.hs_b > hs_b0:
            t0 = t0_horizon(hs_b0)
            ev = FlowEvent(kind="blowup", t=last.t, hs_b=last.hs_b,
                           message=(f"step underflow with growing ||B|| at t = {last.t:.9g} "
                                    f"(T_0 = {t0:.9g})"),
                           t0_lower_bound=t0)
            events.append(ev)
            traj = finish({"stopped": "blowup-underflow"})
            raise BlowupDetected(ev.message, trajectory=traj, event=ev) from exc
        ev = FlowEvent(kind="underflow", t=last.t, hs_b=last.hs_b, message=str(exc))
        events.append(ev)
        exc.trajectory = finish({"stopped": "underflow"})
        raise

    # make sure the final state is recorded even after thinning
    if recorder.samples[-1].t < solver.t - 1e-15:
        omega, b, c = _unpack(solver.y, n)
        recorder.offer(FlowState(float(solver.t), omega, b, c), force=True)
    return finish({"n_steps": recorder.count - 1, "n_rhs": int(solver.nfev),
                   "method": "rk"})


def limit_extract(traj: Trajectory, conv_tol: Optional[float] = None):
    """Final (Omega_inf, C_inf, converged) from a completed trajectory.

    converged means the final ||B_t||_2 is below conv_tol.  The scalar limit
    obeys 2 (C_inf - C_0) = scalar_sign * tr(Omega_0 - Omega_inf); the
    residual of that identity is stored in traj.stats['limit_identity_residual'].
    """
    if any(ev.kind == "blowup" for ev in traj.events):
        raise NotConverged("trajectory ended in blow-up")
    if not traj.states:
        raise NotConverged("empty trajectory")
    tol = traj.controls.conv_tol if conv_tol is None else conv_tol
    final = traj.final
    omega_inf = final.omega.copy()
    c_inf = final.c
    converged = final.hs_b < tol
    tr_drop = float(np.trace(traj.spec.omega - omega_inf).real)
    resid = abs(2.0 * (c_inf - traj.spec.c0) - traj.scalar_sign * tr_drop)
    traj.stats["limit_identity_residual"] = resid
    return omega_inf, c_inf, converged


@dataclass
class DecayFit:
    rate: float
    log_intercept: float
    n_samples: int
    window: tuple
    max_residual: float = 0.0


def decay_fit(traj: Trajectory, window: Optional[tuple] = None,
              fracs: tuple = (1e-7, 1e-2)) -> DecayFit:
    """Least-squares exponential rate of ||B_t||_2 decay.

    Fits log ||B_t|| = a - rate * t over the requested window.  With no
    explicit window, samples with ||B_t|| between fracs * ||B_0|| are used;
    that keeps the fit away from both the slow transient and the integrator
    noise floor.  Under a spectral gap nu (condition A6) the true decay rate
    is at least 2 nu.
    """
    ts = traj.ts
    hsb = traj.hs_bs
    if window is not None:
        lo, hi = window
        mask = (ts >= lo) & (ts <= hi) & (hsb > 0)
    else:
        hs0 = traj.stats.get("hs_b0", hsb[0])
        mask = (hsb >= fracs[0] * hs0) & (hsb <= fracs[1] * hs0)
    if int(mask.sum()) < 10:
        raise InsufficientData(
            f"only {int(mask.sum())} usable samples for the decay fit")
    x = ts[mask]
    y = np.log(hsb[mask])
    slope, intercept = np.polyfit(x, y, 1)
    fit = intercept + slope * x
    return DecayFit(rate=float(-slope), log_intercept=float(intercept),
                    n_samples=int(mask.sum()),
                    window=(float(x[0]), float(x[-1])),
                    max_residual=float(np.max(np.abs(fit - y))))


def asymptotic_bound_check(state: FlowState, spec: QuadraticSpec,
                           alpha: float, n_iter: int, slack: float = 1e-9) -> dict:
    """Check ||Omega_t^alpha B_t||_2 against the t^{-alpha} envelope.

    The bound, valid for any alpha > 0 and integer n_iter >= 1 at t > 0, is

        ||Omega_t^a B_t||_2 <= (2^{n-1} a / (e t))^a
                               * ||B_0||_2^{2^{-n}} * ||B_t||_2^{1 - 2^{-n}}.
    """
    if state.t <= 0:
        raise ValueError("the bound needs t > 0")
    if alpha <= 0 or n_iter < 1:
        raise ValueError("alpha > 0 and n_iter >= 1 required")
    oma = psd_power(state.omega, alpha)
    lhs = hs_norm(oma @ state.b)
    hsb0 = hs_norm(spec.b)
    hsbt = state.hs_b
    w = 2.0 ** (-n_iter)
    rhs_val = ((2.0 ** (n_iter - 1) * alpha / (np.e * state.t)) ** alpha
               * hsb0 ** w * hsbt ** (1.0 - w))
    return {"lhs": lhs, "rhs": rhs_val,
            "holds": bool(lhs <= rhs_val * (1.0 + slack) + 1e-300)}
