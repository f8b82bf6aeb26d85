import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from bwflow import analytic, bogoliubov, flow
from bwflow.bogoliubov import BogoliubovMap
from bwflow.errors import LogBranch, MapInvalid, PathGap
from bwflow.flow import FunctionBPath
from bwflow.opcore import hs_norm


def ident_map(n):
    return BogoliubovMap(u=np.eye(n, dtype=complex), v=np.zeros((n, n), complex))


def rand_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def rand_symplectic(rng, n, alphas=None):
    """Build (u, v) from frames and squeeze angles; exactly symplectic."""
    if alphas is None:
        alphas = rng.uniform(0.0, 1.2, size=n)
    p = rand_unitary(rng, n)
    q = rand_unitary(rng, n)
    u = (p * np.cosh(alphas)) @ q.conj().T
    v = (p * np.sinh(alphas)) @ q.T
    return BogoliubovMap(u=u, v=v), np.sort(np.asarray(alphas, float))[::-1]


@pytest.fixture(scope="module")
def generic_bpath(generic_traj):
    return generic_traj.b_path()


def test_symplectic_residuals_trivial():
    res = bogoliubov.symplectic_residuals(ident_map(3))
    assert all(v == 0.0 for v in res.values())


def test_symplectic_residuals_scalar_squeeze():
    r = 0.3
    m = BogoliubovMap(u=np.array([[np.cosh(r)]], dtype=complex),
                      v=np.array([[np.sinh(r)]], dtype=complex))
    assert max(bogoliubov.symplectic_residuals(m).values()) < 1e-14


def test_integrate_uv_trivial_cases(generic_bpath):
    m = bogoliubov.integrate_uv(generic_bpath, 1.0, 1.0)
    assert hs_norm(m.u - np.eye(2)) == 0.0 and hs_norm(m.v) == 0.0
    zero = FunctionBPath(lambda t: np.zeros((2, 2)), 0.0, 1.0)
    m = bogoliubov.integrate_uv(zero, 0.0, 1.0)
    assert hs_norm(m.u - np.eye(2)) < 1e-12 and hs_norm(m.v) < 1e-12


def test_integrate_uv_constant_b_oracle():
    # constant real symmetric B decouples: u = cosh(4tB), v = -sinh(4tB)
    b = np.array([[0.3, 0.1], [0.1, -0.2]])
    path = FunctionBPath(lambda t: b, 0.0, 1.0)
    m = bogoliubov.integrate_uv(path, 0.0, 1.0)
    arg = 4.0 * b
    assert hs_norm(m.u - (expm(arg) + expm(-arg)) / 2) < 1e-8
    assert hs_norm(m.v + (expm(-arg) - expm(arg)) / (-2)) < 1e-8
    assert max(bogoliubov.symplectic_residuals(m).values()) < 1e-8


def test_integrate_uv_on_flow_path(generic_bpath):
    m = bogoliubov.integrate_uv(generic_bpath, 0.0, 2.0)
    assert max(bogoliubov.symplectic_residuals(m).values()) < 1e-8
    # commuting-case entrywise sign: v entries start at 0 and go negative
    one_mode = flow.integrate(
        analytic.block_spec([(2.0, 2.0, 0.5)]), t_end=1.0)
    m1 = bogoliubov.integrate_uv(one_mode.b_path(), 0.0, 1.0)
    assert m1.v[0, 1].real < 0
    int_b = bogoliubov.path_hs_integral(one_mode.b_path(), 0.0, 1.0)
    assert hs_norm(m1.v) < np.sinh(4.0 * int_b)


def test_integrate_uv_path_gap(generic_bpath):
    with pytest.raises(PathGap):
        bogoliubov.integrate_uv(generic_bpath, 0.0, 7.0)
    with pytest.raises(ValueError):
        bogoliubov.integrate_uv(generic_bpath, 2.0, 1.0)


def test_cocycle_composition(generic_bpath):
    early = bogoliubov.integrate_uv(generic_bpath, 0.0, 1.0)
    late = bogoliubov.integrate_uv(generic_bpath, 1.0, 2.0)
    direct = bogoliubov.integrate_uv(generic_bpath, 0.0, 2.0)
    joined = bogoliubov.compose(late, early)
    assert hs_norm(joined.u - direct.u) < 1e-8
    assert hs_norm(joined.v - direct.v) < 1e-8


def test_inverse_map(generic_bpath):
    m = bogoliubov.integrate_uv(generic_bpath, 0.0, 2.0)
    round_trip = bogoliubov.compose(bogoliubov.inverse(m), m)
    assert hs_norm(round_trip.u - np.eye(2)) < 1e-8
    assert hs_norm(round_trip.v) < 1e-8


def test_dyson_low_orders(generic_bpath):
    m0 = bogoliubov.dyson_uv(generic_bpath, 0.0, 2.0, order=0)
    assert hs_norm(m0.u - np.eye(2)) == 0.0 and hs_norm(m0.v) == 0.0
    b = np.array([[0.0, 0.25], [0.25, 0.0]])
    path = FunctionBPath(lambda t: b, 0.0, 2.0)
    m1 = bogoliubov.dyson_uv(path, 0.0, 2.0, order=1)
    assert hs_norm(m1.u - np.eye(2)) < 1e-12
    assert hs_norm(m1.v + 4.0 * 2.0 * b) < 1e-10  # v = -4 int B = -8 B
    with pytest.raises(ValueError):
        bogoliubov.dyson_uv(path, 0.0, 1.0, order=-1)


def test_dyson_matches_integrate(generic_bpath):
    direct = bogoliubov.integrate_uv(generic_bpath, 0.0, 2.0)
    series = bogoliubov.dyson_uv(generic_bpath, 0.0, 2.0, order=8)
    assert hs_norm(series.u - direct.u) < 1e-6
    assert hs_norm(series.v - direct.v) < 1e-6


def test_dyson_tail_bounds_dominate_error(generic_bpath):
    direct = bogoliubov.integrate_uv(generic_bpath, 0.0, 2.0)
    for order in (1, 2, 4):
        series = bogoliubov.dyson_uv(generic_bpath, 0.0, 2.0, order=order)
        assert hs_norm(series.u - direct.u) <= series.stats["u_tail_bound"] + 1e-8
        assert hs_norm(series.v - direct.v) <= series.stats["v_tail_bound"] + 1e-8


def test_norm_bounds(generic_bpath):
    assert bogoliubov.norm_bounds(ident_map(2), 0.0) == (True, True)
    m = bogoliubov.integrate_uv(generic_bpath, 0.0, 2.0)
    int_b = bogoliubov.path_hs_integral(generic_bpath, 0.0, 2.0)
    assert bogoliubov.norm_bounds(m, int_b) == (True, True)
    # both bounds genuinely fail when the integral is understated
    assert bogoliubov.norm_bounds(m, 0.0) == (False, False)


def test_transform_spec_identity(generic_spec):
    out = bogoliubov.transform_spec(ident_map(2), generic_spec)
    assert hs_norm(out.omega - generic_spec.omega) < 1e-14
    assert hs_norm(out.b - generic_spec.b) < 1e-14
    assert out.c0 == generic_spec.c0


def test_transform_spec_matches_flow(generic_traj, generic_spec, generic_bpath):
    for t in (0.5, 1.0, 2.0):
        m = bogoliubov.integrate_uv(generic_bpath, 0.0, t)
        out = bogoliubov.transform_spec(m, generic_spec)
        s = generic_traj.state_at(t)
        assert hs_norm(out.omega - s.omega) < 1e-6
        assert hs_norm(out.b - s.b) < 1e-6
        # conjugating the initial spec reproduces the flow's scalar too
        assert abs(out.c0 - s.c) < 1e-6
        assert abs(s.c - generic_spec.c0
                   + 16.0 * analytic.exact_generic_int_b2(1.0, 2.0, 0.5, t)
                   ) < 1e-7


def test_transform_spec_inverse_round_trip(generic_spec, generic_bpath):
    m = bogoliubov.integrate_uv(generic_bpath, 0.0, 2.0)
    fwd = bogoliubov.transform_spec(m, generic_spec)
    back = bogoliubov.transform_spec(bogoliubov.inverse(m), fwd)
    assert hs_norm(back.omega - generic_spec.omega) < 1e-8
    assert hs_norm(back.b - generic_spec.b) < 1e-8
    assert abs(back.c0 - generic_spec.c0) < 1e-8


def test_transform_spec_one_mode_squeeze():
    r, w = 0.4, 1.7
    m = BogoliubovMap(u=np.array([[np.cosh(r)]], dtype=complex),
                      v=np.array([[np.sinh(r)]], dtype=complex))
    spec = flow.QuadraticSpec.from_matrices([[w]], [[0.0]])
    out = bogoliubov.transform_spec(m, spec)
    assert np.isclose(out.omega[0, 0].real, w * np.cosh(2 * r))
    assert np.isclose(out.b[0, 0].real, 0.5 * w * np.sinh(2 * r))
    assert np.isclose(out.c0, w * np.sinh(r) ** 2)


def test_transform_spec_rejects_invalid():
    bad = BogoliubovMap(u=2.0 * np.eye(2, dtype=complex),
                        v=np.zeros((2, 2), complex))
    with pytest.raises(MapInvalid):
        bogoliubov.transform_spec(
            bad, flow.QuadraticSpec.from_matrices(np.eye(2), np.zeros((2, 2))))


def test_decompose_trivial():
    d = bogoliubov.decompose_generator(ident_map(3))
    assert np.allclose(d.alphas, 0.0)
    assert hs_norm(d.h_matrix) < 1e-12
    assert np.allclose(d.shift, 0.0)


def test_decompose_scalar_squeeze():
    r = 0.3
    m = BogoliubovMap(u=np.array([[np.cosh(r)]], dtype=complex),
                      v=np.array([[np.sinh(r)]], dtype=complex))
    d = bogoliubov.decompose_generator(m)
    assert np.allclose(d.alphas, [r], atol=1e-12)
    assert hs_norm(d.h_matrix) < 1e-12
    # cosh^2 - sinh^2 = 1 holds exactly for the returned angles
    assert np.cosh(d.alphas[0]) ** 2 - np.sinh(d.alphas[0]) ** 2 == 1.0


def test_decompose_pure_rotation():
    rng = np.random.default_rng(5)
    w = rand_unitary(rng, 3)
    m = BogoliubovMap(u=w, v=np.zeros((3, 3), complex))
    d = bogoliubov.decompose_generator(m)
    assert np.allclose(d.alphas, 0.0, atol=1e-12)
    # with no squeezing the map is the rotation itself: u = exp(-i h)
    assert hs_norm(expm(-1j * d.h_matrix) - w) < 1e-8
    assert hs_norm(d.uhat - w.conj().T) < 1e-8


def test_decompose_degenerate_antidiagonal_squeeze():
    # repeated singular values with sign structure; the frames must stay
    # jointly gauged or the reconstruction breaks
    r = 0.4
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    m = BogoliubovMap(u=np.cosh(r) * np.eye(2, dtype=complex),
                      v=-np.sinh(r) * x.astype(complex))
    d = bogoliubov.decompose_generator(m)
    assert np.allclose(d.alphas, [r, r], atol=1e-12)
    assert hs_norm(d.h_matrix) < 1e-12
    assert max(d.residuals.values()) < 1e-12


def test_decompose_generic_limit_map(generic_bpath):
    m = bogoliubov.integrate_uv(generic_bpath, 0.0, 5.0)
    d = bogoliubov.decompose_generator(m)
    assert d.residuals["u_recon"] < 1e-8
    assert d.residuals["v_recon"] < 1e-8
    assert np.all(np.isfinite(d.alphas))


@settings(max_examples=20)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_decompose_reconstructs_random_maps(seed, n):
    rng = np.random.default_rng(seed)
    kind = seed % 3
    if kind == 0:
        alphas = rng.uniform(0.0, 1.2, size=n)
    elif kind == 1:  # force repeats and zeros
        alphas = np.repeat(rng.uniform(0.0, 1.0, size=(n + 1) // 2), 2)[:n]
        alphas[rng.integers(n)] = 0.0
    else:
        alphas = np.zeros(n)
    m, sorted_alphas = rand_symplectic(rng, n, alphas)
    d = bogoliubov.decompose_generator(m)
    assert np.allclose(np.sort(d.alphas)[::-1], sorted_alphas, atol=1e-7)
    cosh_a = np.cosh(d.alphas)
    sinh_a = np.sinh(d.alphas)
    u_rec = (d.g_frame * cosh_a) @ d.h_frame.conj().T
    v_rec = (d.g_frame * sinh_a) @ d.h_frame.T
    assert hs_norm(u_rec - m.u) < 1e-7 * max(1.0, hs_norm(m.u))
    assert hs_norm(v_rec - m.v) < 1e-7 * max(1.0, hs_norm(m.v))
    assert hs_norm(expm(1j * d.h_matrix) - d.uhat) < 1e-7


def test_decompose_log_branch():
    u = np.diag([-1.0 + 0j, 1.0 + 0j])
    m = BogoliubovMap(u=u, v=np.zeros((2, 2), complex))
    with pytest.raises(LogBranch):
        bogoliubov.decompose_generator(m)


def test_decompose_rejects_invalid_map():
    bad = BogoliubovMap(u=np.eye(2, dtype=complex),
                        v=0.5 * np.eye(2, dtype=complex))
    with pytest.raises(MapInvalid):
        bogoliubov.decompose_generator(bad)
