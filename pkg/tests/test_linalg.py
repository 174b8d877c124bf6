import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resfact.errors import InvalidOperand, NotPositiveSemidefinite
from resfact.linalg import (TOL_EIG, eig_general, eig_residuals, is_hermitian, match_multisets,
                            psd_factor, spectral_norm)


def _random(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def test_spectral_norm_simple_cases():
    assert spectral_norm(np.zeros((3, 3))) == 0
    assert spectral_norm(np.eye(3)) == pytest.approx(1.0, abs=1e-15)
    assert spectral_norm(np.diag([2, -5j])) == pytest.approx(5.0, abs=1e-14)


def test_spectral_norm_rejects_nan():
    with pytest.raises(InvalidOperand):
        spectral_norm(np.array([[1.0, np.nan], [0, 1]]))


def test_eig_general_cases():
    w, v = eig_general(np.diag([1 + 2j, 4]))
    assert sorted(w, key=abs) == pytest.approx([1 + 2j, 4])
    w, v = eig_general(np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert np.allclose(w, [1, 1])
    rng = np.random.default_rng(0)
    m = _random(rng, 6)
    h = m + m.conj().T
    w, v = eig_general(h)
    assert np.max(np.abs(w.imag)) <= TOL_EIG * spectral_norm(h)
    assert np.allclose(np.linalg.norm(v, axis=0), 1)
    assert np.max(eig_residuals(h, w, v)) <= TOL_EIG * spectral_norm(h)


def test_psd_factor_cases():
    assert psd_factor(np.zeros((3, 3))).shape[0] == 0
    G = psd_factor(np.eye(3))
    assert np.allclose(G.conj().T @ G, np.eye(3))
    v = np.array([1.0, 2j, -1.0])
    G = psd_factor(np.outer(v, v.conj()))
    assert G.shape == (1, 3)
    # the single row is proportional to v^*
    ratio = G[0] / v.conj()
    assert np.allclose(ratio, ratio[0])
    with pytest.raises(NotPositiveSemidefinite):
        psd_factor(np.diag([1.0, -0.5]))


def test_match_multisets():
    assert match_multisets([1, 2j], [2j + 1e-9, 1]) == pytest.approx(1e-9)
    assert match_multisets([1], [1, 2]) == np.inf
    assert match_multisets([], []) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2 ** 31))
def test_submultiplicative(n, seed):
    rng = np.random.default_rng(seed)
    a, b = _random(rng, n), _random(rng, n)
    assert spectral_norm(a @ b) <= spectral_norm(a) * spectral_norm(b) * (1 + 1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2 ** 31))
def test_adjoint_eigenvalues_conjugate(n, seed):
    rng = np.random.default_rng(seed)
    a = _random(rng, n)
    w1, _ = eig_general(a)
    w2, _ = eig_general(a.conj().T)
    assert match_multisets(w1, np.conj(w2)) <= 1e-8 * spectral_norm(a)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 64), st.integers(1, 64), st.integers(0, 2 ** 31))
def test_psd_round_trip(n, r, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((min(r, n), n)) + 1j * rng.standard_normal((min(r, n), n))
    M = B.conj().T @ B
    assert is_hermitian(M, 1e-12 * spectral_norm(M))
    G = psd_factor(M)
    assert spectral_norm(M - G.conj().T @ G) <= 1e-10 * spectral_norm(M)
