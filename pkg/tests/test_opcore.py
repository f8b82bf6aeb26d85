import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bwflow.errors import KernelOverlap, NotPSD, RoleViolation
from bwflow.opcore import (OneParticleOperator, QuadraticSpec, as_matrix,
                           hs_norm, hs_scale, involution, min_eig_hermitian,
                           psd_power, psd_sqrt, sandwich)


def rand_complex(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


def test_as_matrix_rejects_non_square():
    with pytest.raises(ValueError):
        as_matrix([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])


def test_as_matrix_copies():
    src = np.eye(2)
    m = as_matrix(src)
    m[0, 0] = 7.0
    assert src[0, 0] == 1.0


def test_role_projection_and_defect():
    almost = np.array([[1.0, 0.5 + 1e-13], [0.5, 2.0]])
    op = OneParticleOperator.hermitian(almost)
    assert op.defect < 1e-12
    assert hs_norm(op.mat - op.mat.conj().T) == 0.0


def test_role_violation_raises():
    with pytest.raises(RoleViolation):
        OneParticleOperator.hermitian([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(RoleViolation):
        OneParticleOperator.symmetric([[0.0, 1.0], [-1.0, 0.0]])


def test_operator_is_frozen():
    op = OneParticleOperator.hermitian(np.eye(2))
    with pytest.raises((ValueError, AttributeError)):
        op.mat[0, 0] = 3.0


def test_quadratic_spec_roles_enforced():
    herm = OneParticleOperator.hermitian(np.eye(2))
    sym = OneParticleOperator.symmetric(np.zeros((2, 2)))
    spec = QuadraticSpec(herm, sym, c0=1)
    assert spec.dim == 2 and spec.c0 == 1.0
    with pytest.raises(RoleViolation):
        QuadraticSpec(sym, sym)
    with pytest.raises(RoleViolation):
        QuadraticSpec(herm, herm)


@given(st.integers(0, 10**6), st.integers(1, 5))
def test_hs_norm_matches_trace_formula(seed, n):
    m = rand_complex(np.random.default_rng(seed), n)
    direct = np.sqrt(np.trace(m.conj().T @ m).real)
    assert np.isclose(hs_norm(m), direct, rtol=1e-12)
    assert hs_scale(0.5 * np.eye(1)) == 1.0


@given(st.integers(0, 10**6), st.integers(1, 5))
def test_involutions_compose(seed, n):
    m = rand_complex(np.random.default_rng(seed), n)
    adj = involution(m, "adjoint")
    via = involution(involution(m, "transpose"), "conjugate")
    assert np.array_equal(adj, via)
    assert np.array_equal(involution(involution(m, "transpose"), "transpose"), m)


def test_involution_keeps_role():
    op = OneParticleOperator.symmetric([[0.0, 1j], [1j, 0.0]])
    out = involution(op, "conjugate")
    assert isinstance(out, OneParticleOperator) and out.role == "symmetric"
    with pytest.raises(ValueError):
        involution(op, "flip")


def test_min_eig_hermitian():
    assert np.isclose(min_eig_hermitian(np.diag([3.0, -1.0, 2.0])), -1.0)
    with pytest.raises(ValueError):
        min_eig_hermitian(np.zeros((0, 0)))


@given(st.integers(0, 10**6), st.integers(1, 5))
def test_psd_sqrt_squares_back(seed, n):
    rng = np.random.default_rng(seed)
    a = rand_complex(rng, n)
    m = a @ a.conj().T
    root = psd_sqrt(m).mat
    assert hs_norm(root @ root - m) < 1e-9 * hs_scale(m)


def test_psd_sqrt_clamps_and_rejects():
    tiny = np.diag([1.0, -1e-13])
    root = psd_sqrt(tiny).mat
    assert np.isclose(root[1, 1].real, 0.0)
    with pytest.raises(NotPSD):
        psd_sqrt(np.diag([1.0, -0.5]))


def test_psd_power_special_cases():
    m = np.diag([4.0, 9.0])
    assert np.allclose(psd_power(m, 0.5), np.diag([2.0, 3.0]))
    assert np.allclose(psd_power(m, 1.0), m)
    with pytest.raises(ValueError):
        psd_power(m, -1.0)


def test_sandwich_worked_example():
    # Omega = diag(1,2), B = antidiag(1/2): B (Omega^t)^{-1} B~ = diag(1/8, 1/4)
    omega = np.diag([1.0, 2.0])
    b = np.array([[0.0, 0.5], [0.5, 0.0]])
    got = sandwich(b, omega, p=1).mat
    assert np.allclose(got, np.diag([0.125, 0.25]), atol=1e-14)
    got2 = sandwich(b, omega, p=2).mat
    assert np.allclose(got2, np.diag([1.0 / 16.0, 1.0 / 4.0]), atol=1e-14)


def test_sandwich_kernel_paths():
    omega = np.diag([0.0, 1.0])
    safe = np.array([[0.0, 0.0], [0.0, 1.0]])
    got = sandwich(safe, omega, p=1).mat
    assert np.allclose(got, np.diag([0.0, 1.0]))
    bad = np.array([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(KernelOverlap):
        sandwich(bad, omega, p=1)
    with pytest.raises(ValueError):
        sandwich(safe, omega, p=0)


@given(st.integers(0, 10**6), st.integers(1, 4))
def test_sandwich_is_hermitian_psd(seed, n):
    rng = np.random.default_rng(seed)
    a = rand_complex(rng, n)
    omega = a @ a.conj().T + 0.2 * np.eye(n)
    b = rand_complex(rng, n)
    b = (b + b.T) / 2
    out = sandwich(b, omega, p=1)
    assert out.role == "hermitian"
    assert min_eig_hermitian(out.mat) > -1e-10 * hs_scale(out.mat)
