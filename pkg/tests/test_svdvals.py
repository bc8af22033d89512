import math

import numpy as np
import pytest

from denoiseq.svdvals import partial_energy_count, singular_values


def cubic_eigenvalues(m):
    """Eigenvalues of a symmetric 3x3 matrix from the characteristic
    polynomial (trigonometric solution); oracle for small cases."""
    p1 = m[0, 1] ** 2 + m[0, 2] ** 2 + m[1, 2] ** 2
    q = np.trace(m) / 3.0
    p2 = (m[0, 0] - q) ** 2 + (m[1, 1] - q) ** 2 + (m[2, 2] - q) ** 2 + 2 * p1
    p = math.sqrt(p2 / 6.0)
    if p == 0:
        return np.array([q, q, q])
    b = (m - q * np.eye(3)) / p
    r = np.linalg.det(b) / 2.0
    r = min(1.0, max(-1.0, r))
    phi = math.acos(r) / 3.0
    eig1 = q + 2 * p * math.cos(phi)
    eig3 = q + 2 * p * math.cos(phi + 2 * math.pi / 3.0)
    eig2 = 3 * q - eig1 - eig3
    return np.array(sorted([eig1, eig2, eig3], reverse=True))


def test_diagonal_matrix():
    s = singular_values(np.diag([3.0, 2.0]))
    assert np.allclose(s, [3.0, 2.0], atol=1e-12)


def test_rank_one_matrix():
    rng = np.random.default_rng(0)
    u = rng.normal(size=7)
    v = rng.normal(size=12)
    s = singular_values(np.outer(u, v))
    assert s[0] == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v), rel=1e-10)
    assert np.all(s[1:] <= 1e-8)


def test_frobenius_identity_random_shapes():
    rng = np.random.default_rng(1)
    for _ in range(30):
        rows = int(rng.integers(1, 30))
        cols = int(rng.integers(1, 30))
        a = rng.normal(0, 10, size=(rows, cols))
        s = singular_values(a)
        assert s.size == min(rows, cols)
        assert np.all(np.diff(s) <= 1e-12)
        assert float((s**2).sum()) == pytest.approx(float((a**2).sum()), rel=1e-8)


def test_matches_characteristic_polynomial_oracle_3x3():
    rng = np.random.default_rng(2)
    for _ in range(50):
        a = rng.normal(0, 5, size=(3, 3))
        expected = np.sqrt(np.maximum(cubic_eigenvalues(a @ a.T), 0.0))
        assert np.allclose(singular_values(a), expected, atol=1e-8)


def test_permutation_invariance():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(9, 14))
    s = singular_values(a)
    shuffled = a[rng.permutation(9)][:, rng.permutation(14)]
    assert np.allclose(s, singular_values(shuffled), atol=1e-8)


def test_zero_matrix_and_validation():
    s = singular_values(np.zeros((4, 6)))
    assert np.array_equal(s, np.zeros(4))
    with pytest.raises(ValueError):
        singular_values(np.empty((0, 3)))


def test_partial_energy_examples():
    assert partial_energy_count([1.0, 0.0, 0.0], 0.97) == 1
    assert partial_energy_count([1.0, 1.0], 0.97) == 2
    # prefix sums 5, 8, 10: 8/10 = 0.8 >= 0.79
    assert partial_energy_count([5.0, 3.0, 2.0], 0.79) == 2
    assert partial_energy_count([0.0, 0.0], 0.5) == 1


def test_partial_energy_monotone_in_alpha():
    rng = np.random.default_rng(4)
    for _ in range(20):
        s = np.sort(rng.uniform(0, 5, size=10))[::-1]
        counts = [partial_energy_count(s, a) for a in (0.5, 0.8, 0.9, 0.97, 0.99, 1.0)]
        assert counts == sorted(counts)
        assert counts[-1] <= s.size


def test_partial_energy_validation():
    with pytest.raises(ValueError):
        partial_energy_count([1.0, 2.0], 0.9)  # ascending
    with pytest.raises(ValueError):
        partial_energy_count([1.0], 0.0)
    with pytest.raises(ValueError):
        partial_energy_count([], 0.9)
