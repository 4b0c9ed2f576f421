from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advlinreg.norms import Dataset, NormKind, as_norm_kind, dual_kind, norm, norm_subgradient

vectors = arrays(np.float64, st.integers(1, 8), elements=st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False))


@pytest.mark.parametrize(
    "v, k, expected",
    [((3, 4), "l2", 5.0), ((1, -2, 3), "l1", 6.0), ((1, -2, 3), "linf", 3.0)],
)
def test_norm_values(v, k, expected):
    assert norm(v, k) == pytest.approx(expected)


def test_dual_pairs():
    assert dual_kind(NormKind.Linf) is NormKind.L1
    assert dual_kind("l2") is NormKind.L2
    assert dual_kind(NormKind.L1) is NormKind.Linf
    assert NormKind.L1.dual is NormKind.Linf


def test_unknown_norm_rejected():
    with pytest.raises(ValueError):
        as_norm_kind("l3")


def test_subgradient_examples():
    np.testing.assert_array_equal(norm_subgradient((2, 0, -1), "l1"), [1, 0, -1])
    np.testing.assert_allclose(norm_subgradient((3, 4), "l2"), [0.6, 0.8])
    for k in NormKind:
        np.testing.assert_array_equal(norm_subgradient(np.zeros(3), k), np.zeros(3))


@given(vectors, vectors)
def test_holder_inequality(u, v):
    m = min(u.size, v.size)
    u, v = u[:m], v[:m]
    for k in NormKind:
        assert abs(u @ v) <= norm(u, k) * norm(v, k.dual) * (1 + 1e-12) + 1e-9


@given(vectors)
def test_subgradient_attains_norm_and_has_unit_dual_norm(v):
    for k in NormKind:
        g = norm_subgradient(v, k)
        assert g @ v == pytest.approx(norm(v, k), rel=1e-12, abs=1e-9)
        if np.any(v):
            assert norm(g, k.dual) == pytest.approx(1.0, rel=1e-12)


@given(vectors, st.floats(-50, 50))
def test_norm_homogeneity(v, c):
    for k in NormKind:
        assert norm(c * v, k) == pytest.approx(abs(c) * norm(v, k), rel=1e-12, abs=1e-9)


def test_dataset_checks_and_is_read_only():
    D = Dataset(np.ones((3, 2)), np.arange(3.0))
    assert (D.n, D.p) == (3, 2)
    with pytest.raises(ValueError):
        D.X[0, 0] = 5.0
    with pytest.raises(ValueError):
        Dataset(np.ones((3, 2)), np.ones(2))
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan]]), np.ones(1))


def test_dataset_mse_and_residual():
    D = Dataset(np.eye(2), np.array([1.0, 3.0]))
    np.testing.assert_allclose(D.residual([1.0, 1.0]), [0.0, 2.0])
    assert D.mse([1.0, 1.0]) == pytest.approx(2.0)
