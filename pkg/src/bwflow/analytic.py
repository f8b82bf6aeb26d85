"""Closed-form block solutions of the flow, used as oracles.

A 2x2 block carries Omega = diag(om_minus, om_plus) and B = [[0, b], [b, 0]]
with real b >= 0.  On such blocks the flow reduces to the scalar system

    d/dt om_{+-} = -16 b^2,      d/dt b = -2 (om_- + om_+) b,

which is solved in closed form in three regimes, split by the sign of the
product gap om_+ om_- - 4 b^2:

* strict positive gap ("generic"): exponential relaxation at rate 4 rho,
  rho = sqrt(sigma^2 - 16 b^2), sigma = om_- + om_+;
* zero gap ("equal product"): relaxation at rate 4 delta, delta = om_+ - om_-,
  degenerating to an algebraic 1/t law when delta = 0;
* om = 0 with b > 0: finite-time blow-up at T_max = pi/(16 b).

The integrals int_0^t b(tau)^2 dtau are also available in closed form; they
feed the scalar coefficient C_t and its checks.
"""

from __future__ import annotations

import numpy as np

from .errors import NotInRegime, NotOnManifold, OutOfRange, PastBlowup
from .opcore import OneParticleOperator, QuadraticSpec, psd_sqrt

# relative tolerance for deciding membership of the equal-product manifold
PRODUCT_TOL = 1e-12


def _gap(om_minus: float, om_plus: float, b: float) -> tuple[float, float]:
    gap = om_plus * om_minus - 4.0 * b * b
    scale = max(1.0, abs(om_plus * om_minus))
    return gap, scale


def _check_block(om_minus: float, om_plus: float, b: float) -> None:
    if om_minus < 0 or om_plus < om_minus:
        raise OutOfRange("block requires 0 <= om_minus <= om_plus")
    if b < 0:
        raise OutOfRange("block requires b >= 0")


def _as_blocks(blocks):
    """Accept a single (om_-, om_+, b) triple or a list of them."""
    if len(blocks) == 3 and np.isscalar(blocks[0]):
        blocks = [blocks]
    return [tuple(map(float, blk)) for blk in blocks]


def _as_times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise OutOfRange("t must be nonnegative")
    return arr, (arr.ndim == 0)


def _ret(x, scalar: bool):
    return float(x) if scalar else np.asarray(x, dtype=float)


def block_spec(blocks, c0: float = 0.0, label: str = "") -> QuadraticSpec:
    """Assemble a block-diagonal QuadraticSpec from (om_minus, om_plus, b) triples."""
    blocks = _as_blocks(blocks)
    if not blocks:
        raise ValueError("at least one block required")
    n = 2 * len(blocks)
    omega = np.zeros((n, n))
    bmat = np.zeros((n, n))
    for j, (om_minus, om_plus, b) in enumerate(blocks):
        _check_block(om_minus, om_plus, b)
        omega[2 * j, 2 * j] = om_minus
        omega[2 * j + 1, 2 * j + 1] = om_plus
        bmat[2 * j, 2 * j + 1] = b
        bmat[2 * j + 1, 2 * j] = b
    return QuadraticSpec.from_matrices(omega, bmat, c0=c0, label=label)


def exact_equal_product(om_minus: float, om_plus: float, b: float, t):
    """Block solution on the manifold om_+ om_- = 4 b^2.

    Returns (om_minus_t, om_plus_t, b_t^2).  With delta = om_+ - om_- > 0:

        om_-(t) = om_- delta / (om_+ e^{4 delta t} - om_-)
        om_+(t) = om_+ delta / (om_+ - om_- e^{-4 delta t})
        b(t)^2  = b^2 delta^2 e^{-4 delta t} / (om_+ - om_- e^{-4 delta t})^2

    and for delta = 0 (so b = om/2):

        om(t) = om / (4 t om + 1),   b(t)^2 = om^2 / (4 (4 t om + 1)^2).
    """
    _check_block(om_minus, om_plus, b)
    gap, scale = _gap(om_minus, om_plus, b)
    if abs(gap) > PRODUCT_TOL * scale:
        raise NotOnManifold(
            f"om_+ om_- - 4 b^2 = {gap:.3e} exceeds {PRODUCT_TOL:.0e} * {scale:.3g}")
    ts, scalar = _as_times(t)
    delta = om_plus - om_minus
    if delta <= PRODUCT_TOL * max(1.0, om_plus):
        om = om_plus
        den = 4.0 * ts * om + 1.0
        omt = om / den
        bt2 = om * om / (4.0 * den * den)
        return _ret(omt, scalar), _ret(omt, scalar), _ret(bt2, scalar)
    grow = np.exp(4.0 * delta * ts)
    decay = np.exp(-4.0 * delta * ts)
    omt_minus = om_minus * delta / (om_plus * grow - om_minus)
    den = om_plus - om_minus * decay
    omt_plus = om_plus * delta / den
    bt2 = b * b * delta * delta * decay / (den * den)
    return _ret(omt_minus, scalar), _ret(omt_plus, scalar), _ret(bt2, scalar)


def exact_equal_product_int_b2(om_minus: float, om_plus: float, b: float, t):
    """int_0^t b(tau)^2 dtau on the equal-product manifold."""
    _check_block(om_minus, om_plus, b)
    gap, scale = _gap(om_minus, om_plus, b)
    if abs(gap) > PRODUCT_TOL * scale:
        raise NotOnManifold("not on the equal-product manifold")
    ts, scalar = _as_times(t)
    delta = om_plus - om_minus
    if delta <= PRODUCT_TOL * max(1.0, om_plus):
        om = om_plus
        val = (om / 16.0) * (1.0 - 1.0 / (4.0 * ts * om + 1.0))
        return _ret(val, scalar)
    den = om_plus - om_minus * np.exp(-4.0 * delta * ts)
    val = (b * b * delta / (4.0 * om_minus)) * (1.0 / delta - 1.0 / den)
    return _ret(val, scalar)


def exact_generic(om_minus: float, om_plus: float, b: float, t):
    """Block solution in the strict-gap regime om_+ om_- > 4 b^2.

    Returns (om_minus_t, om_plus_t, b_t^2).  With sigma = om_- + om_+,
    delta = om_+ - om_-, rho = sqrt(sigma^2 - 16 b^2):

        om_{-+}(t) = h_t(-+delta),
        h_t(d) = [(rho+d)(rho+sigma) + (rho-d)(sigma-rho) e^{-4 rho t}]
                 / [2 (rho + sigma + (rho-sigma) e^{-4 rho t})]
        b(t)^2 = 4 rho^2 b^2 e^{-4 rho t}
                 / (sigma + rho + (rho-sigma) e^{-4 rho t})^2.

    The limits are om_{-+} -> (rho -+ delta)/2 and b -> 0.
    """
    _check_block(om_minus, om_plus, b)
    gap, scale = _gap(om_minus, om_plus, b)
    if gap <= PRODUCT_TOL * scale:
        raise NotInRegime(
            f"om_+ om_- - 4 b^2 = {gap:.3e} not strictly positive at scale {scale:.3g}")
    ts, scalar = _as_times(t)
    sigma = om_plus + om_minus
    delta = om_plus - om_minus
    rho = np.sqrt(sigma * sigma - 16.0 * b * b)
    decay = np.exp(-4.0 * rho * ts)
    den = rho + sigma + (rho - sigma) * decay

    def h(d):
        return ((rho + d) * (rho + sigma) + (rho - d) * (sigma - rho) * decay) / (2.0 * den)

    bt2 = 4.0 * rho * rho * b * b * decay / (den * den)
    return _ret(h(-delta), scalar), _ret(h(delta), scalar), _ret(bt2, scalar)


def exact_generic_int_b2(om_minus: float, om_plus: float, b: float, t):
    """int_0^t b(tau)^2 dtau in the strict-gap regime."""
    _check_block(om_minus, om_plus, b)
    gap, scale = _gap(om_minus, om_plus, b)
    if gap <= PRODUCT_TOL * scale:
        raise NotInRegime("outside the strict-gap regime")
    if b == 0.0:
        ts, scalar = _as_times(t)
        return _ret(np.zeros_like(ts), scalar)
    ts, scalar = _as_times(t)
    sigma = om_plus + om_minus
    rho = np.sqrt(sigma * sigma - 16.0 * b * b)
    den_t = sigma + rho + (rho - sigma) * np.exp(-4.0 * rho * ts)
    val = (rho * b * b / (rho - sigma)) * (1.0 / den_t - 1.0 / (2.0 * rho))
    return _ret(val, scalar)


def exact_blowup(b: float, t):
    """Blow-up solution from Omega = 0, B = antidiag(b), b > 0.

    Returns (om_t, b_t, t_max) with om_t the common diagonal value of
    Omega_t:

        b(t) = b sqrt(tan^2(8 b t) + 1),   om(t) = -2 b tan(8 b t),

    valid for t < T_max = pi/(16 b); beyond that PastBlowup is raised.
    """
    if b <= 0:
        raise OutOfRange("blow-up family requires b > 0")
    ts, scalar = _as_times(t)
    tmax = blowup_time(b)
    if np.any(ts >= tmax):
        raise PastBlowup(f"t >= T_max = {tmax:.6g}")
    phase = 8.0 * b * ts
    bt = b * np.sqrt(np.tan(phase) ** 2 + 1.0)
    omt = -2.0 * b * np.tan(phase)
    return _ret(omt, scalar), _ret(bt, scalar), tmax


def exact_blowup_int_b2(b: float, t):
    """int_0^t b(tau)^2 dtau = b tan(8 b t) / 8 for the blow-up family."""
    if b <= 0:
        raise OutOfRange("blow-up family requires b > 0")
    ts, scalar = _as_times(t)
    if np.any(ts >= blowup_time(b)):
        raise PastBlowup("t >= T_max")
    return _ret(b * np.tan(8.0 * b * ts) / 8.0, scalar)


def blowup_time(b: float) -> float:
    """Horizon T_max = pi/(16 b) of the blow-up family."""
    return float(np.pi / (16.0 * b))


def exact_limit_block(blocks) -> OneParticleOperator:
    """Limit matrix S0_minus + sqrt(S0_plus^2 - 4 B0 B0~) of a block family.

    S0_{+-} = (Omega_0 +- Omega_hat_0)/2 where Omega_hat_0 swaps the two
    diagonal entries of each block.  Per block this evaluates to
    diag((rho-delta)/2, (rho+delta)/2) with delta = om_+ - om_- and
    rho = sqrt((om_- + om_+)^2 - 16 b^2).
    """
    blocks = _as_blocks(blocks)
    n = 2 * len(blocks)
    limit = np.zeros((n, n), dtype=complex)
    for j, (om_minus, om_plus, b) in enumerate(blocks):
        _check_block(om_minus, om_plus, b)
        gap, scale = _gap(om_minus, om_plus, b)
        if gap < -PRODUCT_TOL * scale:
            raise NotInRegime(
                f"block {j}: om_+ om_- - 4 b^2 = {gap:.3e} is negative")
        omega = np.diag([om_minus, om_plus]).astype(complex)
        omega_hat = np.diag([om_plus, om_minus]).astype(complex)
        bmat = np.array([[0.0, b], [b, 0.0]], dtype=complex)
        s_minus = (omega - omega_hat) / 2
        s_plus = (omega + omega_hat) / 2
        core = s_plus @ s_plus - 4.0 * bmat @ bmat.conj()
        sl = slice(2 * j, 2 * j + 2)
        limit[sl, sl] = s_minus + psd_sqrt(core).mat
    return OneParticleOperator.hermitian(limit, sym_tol=np.inf)


def pivotal_family(k_max: int, c0: float = 0.0) -> QuadraticSpec:
    """Blocks b_k = 2^{-k}, om_{+-,k} = 2 sqrt(2) b_k for k = 1..k_max.

    Every block sits in the strict-gap regime with the slowest rate scaling
    like 16 b_k, so the full matrix keeps t ||B_t||_2 bounded away from zero
    over windows growing like 2^{k_max}.
    """
    if k_max < 1:
        raise OutOfRange("k_max must be >= 1")
    blocks = []
    for k in range(1, k_max + 1):
        bk = 2.0 ** (-k)
        omk = 2.0 * np.sqrt(2.0) * bk
        blocks.append((omk, omk, bk))
    return block_spec(blocks, c0=c0, label=f"pivotal-{k_max}")


def mixed_family(b1: float, k_max: int, c0: float = 0.0) -> QuadraticSpec:
    """Head block (1, 2, b1) with 1/2 < b1 < 1/sqrt(2), tail blocks
    b_k = 2^{-k}, om_{+-,k} = (3/4)^k for k = 2..k_max.

    The head block satisfies the product condition om_+ om_- > 4 b1^2 but
    violates 1 >= 4 B (Omega^t)^{-2} B~ since 4 b1^2 / om_-^2 = 4 b1^2 > 1.
    """
    if not (0.5 < b1 < 1.0 / np.sqrt(2.0)):
        raise OutOfRange("b1 must lie strictly between 1/2 and 1/sqrt(2)")
    if k_max < 2:
        raise OutOfRange("k_max must be >= 2")
    blocks = [(1.0, 2.0, float(b1))]
    for k in range(2, k_max + 1):
        blocks.append(((3.0 / 4.0) ** k, (3.0 / 4.0) ** k, 2.0 ** (-k)))
    return block_spec(blocks, c0=c0, label=f"mixed-{b1}-{k_max}")
