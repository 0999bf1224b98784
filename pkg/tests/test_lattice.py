import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from latgibbs.lattice import (ConditionFailure, NotGaussian, Semimetric, WrapViolation,
                              build_lattice, gamma_d, gaussian_covariance_oracle,
                              gaussian_precision, lattice_from_json, model1_threshold,
                              oracle_series, uniqueness_threshold)
from latgibbs.potentials import build_custom, build_gaussian, build_model1

NN = {(1,): 1.0}
C_M1 = 0.894427191  # (n+1)/sqrt(4n+1) at n=1


def test_row_major_indexing():
    lat = build_lattice(2, [3, 4])
    assert lat.n_sites == 12
    assert lat.index((1, 2)) == 6
    assert tuple(lat.coords()[6]) == (1, 2)


def test_torus_neighbors_wrap():
    lat = build_lattice(1, [5], "torus")
    nb = lat.neighbor_table([(1,), (-1,)])
    assert list(nb[:, 0]) == [1, 2, 3, 4, 0]
    assert list(nb[:, 1]) == [4, 0, 1, 2, 3]


def test_free_neighbors_absent():
    nb = build_lattice(1, [4], "free").neighbor_table([(1,)])
    assert list(nb[:, 0]) == [1, 2, 3, -1]


def test_fixed_boundary_shell():
    lat = build_lattice(1, [4], "fixed", r0=1, boundary_field=[2.0])
    assert lat.n_shell == 2
    nb = lat.neighbor_table([(1,), (-1,)])
    assert nb[3, 0] >= lat.n_sites and nb[0, 1] >= lat.n_sites
    assert np.all(lat.shell_values() == 2.0)


def test_fixed_shell_length_checked():
    with pytest.raises(ValueError):
        build_lattice(2, [3, 3], "fixed", r0=1, boundary_field=[1.0, 2.0])


def test_wrap_violation():
    with pytest.raises(WrapViolation):
        build_lattice(1, [2], "torus", r0=1)


def test_lattice_from_json():
    lat = lattice_from_json({"dim": 2, "L": [4, 6], "bc": "torus"}, 1)
    assert lat.extents == (4, 6) and lat.boundary == "torus"


@given(st.floats(0, 3), st.lists(st.integers(-5, 5), min_size=1, max_size=3))
def test_semimetric_symmetric_and_weight(alpha, k):
    d = Semimetric(alpha)
    assert d(k) == d([-a for a in k])
    assert d.weight(k) == pytest.approx(math.exp(alpha * sum(abs(a) for a in k)))


def test_semimetric_rejects_negative():
    with pytest.raises(ValueError):
        Semimetric(-0.1)


@pytest.mark.parametrize("n", [1, 2])
def test_model1_gamma_within_explicit_constant(n):
    m = build_model1(n, NN, 0.0)
    rep = uniqueness_threshold(m, Semimetric(0.0))
    assert 0 < rep.gamma_d <= 2 * (n + 1) * 2 ** (2 * n + 1)
    assert rep.threshold >= model1_threshold(n, {(1,): 1.0, (-1,): 1.0}, Semimetric(0.0))


def test_model1_gamma_values():
    m = build_model1(1, NN, 0.02)
    assert uniqueness_threshold(m, Semimetric(0.0)).gamma_d == pytest.approx(2 * C_M1, abs=2e-4)
    rep = uniqueness_threshold(m, Semimetric(0.5))
    assert rep.gamma_d == pytest.approx(2 * math.exp(0.5) * C_M1, abs=3e-4)
    assert rep.unique and rep.lam_gamma < 0.06


def test_model1_threshold_formula():
    assert model1_threshold(1, {(1,): 1.0, (-1,): 1.0}, Semimetric(0.0)) == pytest.approx(1 / 32)


def test_large_lambda_not_unique():
    rep = uniqueness_threshold(build_model1(1, NN, 10.0), Semimetric(0.0))
    assert not rep.unique


def test_gamma_d_sum():
    assert gamma_d({(1,): 1.0, (-1,): 1.0, (2,): 0.5}, Semimetric(math.log(2))) == pytest.approx(2 + 2 + 2)


def test_uniqueness_requires_conditions():
    with pytest.raises(ConditionFailure):
        uniqueness_threshold(build_custom([0, 0, 1], {(1,): [0, 0, 0, 1]}, 0.1), Semimetric(0.0))


def test_gaussian_two_site_closed_form():
    lam = 0.3
    m = build_gaussian(1.0, NN, lam)
    cov = gaussian_covariance_oracle(m, build_lattice(1, [2], "free"))
    expected = np.array([[1 + 2 * lam, 2 * lam], [2 * lam, 1 + 2 * lam]]) / (1 + 4 * lam)
    np.testing.assert_allclose(cov, expected, rtol=1e-13)


def test_gaussian_lambda_zero_diagonal():
    cov = gaussian_covariance_oracle(build_gaussian(2.0, NN, 0.0), build_lattice(1, [8], "torus"))
    np.testing.assert_allclose(np.diag(cov), 0.5, rtol=1e-14)
    assert np.abs(cov - np.diag(np.diag(cov))).max() < 1e-15


def test_gaussian_torus_matches_fourier():
    L, lam = 16, 0.1
    m = build_gaussian(1.0, NN, lam)
    lat = build_lattice(1, [L], "torus")
    cov = gaussian_covariance_oracle(m, lat)
    # circulant precision: eigenvalues 1 + 4 lam (1 - cos(2 pi q / L))
    q = np.arange(L)
    spectrum = 1.0 / (1.0 + 4 * lam * (1 - np.cos(2 * np.pi * q / L)))
    row = np.real(np.fft.ifft(spectrum))
    for i in range(L):
        np.testing.assert_allclose(cov[i], np.roll(row, i), atol=1e-14)
    series = oracle_series(cov, lat, [(k,) for k in range(5)])
    np.testing.assert_allclose(series, row[:5], atol=1e-14)


def test_gaussian_precision_2d_row_sums():
    m = build_gaussian(1.0, {(1, 0): 1.0, (0, 1): 1.0}, 0.2)
    Q = gaussian_precision(m, build_lattice(2, [4, 4], "torus"))
    np.testing.assert_allclose(Q.sum(axis=1), 0.5, atol=1e-14)


def test_not_gaussian():
    with pytest.raises(NotGaussian):
        gaussian_precision(build_model1(1, NN, 0.1), build_lattice(1, [4], "torus"))
