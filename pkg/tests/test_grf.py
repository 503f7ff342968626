import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from spatialdnn.grf import (
    CovarianceMatrix, IndefiniteMatrixError, MaternParams, build_cov_matrix, child_seed,
    cholesky_with_jitter, matern_closed_form, matern_cov, response_from_covariates, sample_grf,
    simulate_dataset,
)
from spatialdnn.sampling import SamplingDesign, SiteSet, build_sites

E_INV = 0.36787944117144233
# (1 + sqrt(3)) exp(-sqrt(3)), the nu = 3/2 value one range length away
NU15_AT_PHI = 0.48335772459650765


def line_sites(n=50, eta=0.1):
    return build_sites(SamplingDesign.box(1, n * eta, eta))


def pair_sites(gap):
    design = SamplingDesign.box(2, 4.0, 0.05)
    return SiteSet(design, np.array([[0.0, 0.0], [gap, 0.0]]))


def test_zero_lag_returns_sill():
    for nu in (0.5, 1.0, 2.0):
        assert matern_cov(0.0, MaternParams(2.5, 0.3, nu)) == 2.5


def test_exponential_case():
    assert matern_cov(0.1, MaternParams(1.0, 0.1, 0.5)) == pytest.approx(E_INV, rel=1e-12)


def test_three_halves_case():
    p = MaternParams(1.0, 0.1, 1.5)
    assert matern_cov(0.1, p) == pytest.approx(NU15_AT_PHI, rel=1e-10)
    assert NU15_AT_PHI == pytest.approx((1 + math.sqrt(3)) * math.exp(-math.sqrt(3)), rel=1e-15)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5])
def test_bessel_path_matches_closed_form(nu):
    p = MaternParams(1.3, 0.2, nu)
    hs = np.linspace(1e-4, 3.0, 1000)
    got = np.array([matern_cov(h, p) for h in hs])
    ref = np.array([matern_closed_form(h, p) for h in hs])
    assert np.max(np.abs(got / ref - 1)) <= 1e-9


@pytest.mark.parametrize("nu", [0.5, 1.0, 1.5, 2.0, 2.5])
def test_non_increasing_in_lag(nu):
    p = MaternParams(1.0, 0.1, nu)
    vals = np.array([matern_cov(h, p) for h in np.linspace(0, 2.0, 1000)])
    assert np.all(np.diff(vals) <= 0)
    assert vals[-1] >= 0


@settings(max_examples=60, deadline=None)
@given(
    h=st.floats(0.0, 5.0),
    s2=st.floats(0.01, 100.0),
    phi=st.floats(0.01, 3.0),
    k=st.floats(0.1, 10.0),
    nu=st.sampled_from([0.5, 1.0, 1.5, 2.0, 2.5]),
)
def test_scaling_properties(h, s2, phi, k, nu):
    base = matern_cov(h, MaternParams(1.0, phi, nu))
    assert matern_cov(h, MaternParams(s2, phi, nu)) / s2 == pytest.approx(base, rel=1e-12, abs=1e-300)
    assert matern_cov(k * h, MaternParams(1.0, k * phi, nu)) == pytest.approx(base, rel=1e-9, abs=1e-300)


def test_matern_rejects_bad_lag_and_params():
    p = MaternParams(1.0, 0.1, 0.5)
    with pytest.raises(ValueError):
        matern_cov(-0.1, p)
    with pytest.raises(ValueError):
        matern_cov(float("inf"), p)
    with pytest.raises(ValueError):
        MaternParams(0.0, 0.1, 0.5)


def test_cov_matrix_shapes():
    single = SiteSet(SamplingDesign.box(2, 4.0, 0.1), np.zeros((1, 2)))
    assert build_cov_matrix(single, MaternParams(3.0, 0.1, 1.0)).entries.tolist() == [[3.0]]
    twin = SiteSet(SamplingDesign.box(2, 4.0, 0.1), np.zeros((2, 2)))
    assert np.all(build_cov_matrix(twin, MaternParams(2.0, 0.1, 1.0)).entries == 2.0)
    c = build_cov_matrix(pair_sites(0.1), MaternParams(1.0, 0.1, 0.5)).entries
    assert c[0, 1] == pytest.approx(E_INV, rel=1e-12)
    assert np.array_equal(c, c.T)


def test_cov_matrix_rejects_unsupported_order():
    with pytest.raises(ValueError):
        build_cov_matrix(pair_sites(0.1), MaternParams(1.0, 0.1, 3.0))


def test_cholesky_identity():
    f = cholesky_with_jitter(np.eye(4))
    assert f.jitter == 0.0
    assert np.array_equal(f.lower, np.eye(4))


def test_cholesky_two_by_two():
    f = cholesky_with_jitter(np.array([[1.0, 0.3679], [0.3679, 1.0]]))
    assert f.lower[0, 0] == 1.0
    assert f.lower[1, 0] == pytest.approx(0.3679, abs=1e-15)
    assert f.lower[1, 1] == pytest.approx(0.92986536122172010, rel=1e-12)
    assert f.lower[0, 1] == 0.0


def test_cholesky_singular_needs_jitter():
    a = np.ones((3, 3))
    f = cholesky_with_jitter(a)
    assert f.jitter > 0
    assert np.allclose(f.lower @ f.lower.T, a + f.jitter * np.eye(3), atol=1e-12)


def test_cholesky_indefinite():
    with pytest.raises(IndefiniteMatrixError):
        cholesky_with_jitter(CovarianceMatrix(np.array([[1.0, 2.0], [2.0, 1.0]]), 1.0))


def test_sampling_is_deterministic():
    sites = line_sites(20)
    p = MaternParams(1.0, 0.1, 1.0)
    a = sample_grf(sites, p, 7, seed=11).values
    b = sample_grf(sites, p, 7, seed=11).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_grf(sites, p, 7, seed=12).values)


def test_replicates_do_not_depend_on_count():
    sites = build_sites(SamplingDesign.box(2, 2.0, 0.2))
    p = MaternParams(1.0, 0.1, 0.5)
    short = sample_grf(sites, p, 3, seed=5).values
    long = sample_grf(sites, p, 9, seed=5).values
    assert np.array_equal(short, long[:3])


def test_child_seed_separates_streams():
    seeds = {child_seed(0, lab, t) for lab in ("X1", "X2", "noise") for t in range(50)}
    assert len(seeds) == 150


def test_tiny_variance():
    vals = sample_grf(line_sites(15), MaternParams(1e-20, 0.1, 0.5), 50, seed=0).values
    assert np.max(np.abs(vals)) <= 1e-8


def test_zero_replicates_rejected():
    with pytest.raises(ValueError):
        sample_grf(line_sites(5), MaternParams(1.0, 0.1, 0.5), 0, seed=0)


@pytest.fixture(scope="module")
def mc_draw():
    sites = line_sites(50)
    p = MaternParams(1.0, 0.1, 0.5)
    vals = sample_grf(sites, p, 2000, seed=2024).values
    return vals, build_cov_matrix(sites, p).entries


def test_fixed_pair_covariance(mc_draw):
    vals, target = mc_draw
    emp = np.cov(vals, rowvar=False, bias=True)
    for i, j in [(0, 1), (10, 11), (20, 25), (3, 40)]:
        assert abs(emp[i, j] - target[i, j]) <= 0.07


def test_site_variances(mc_draw):
    var = np.var(mc_draw[0], axis=0)
    assert np.all((var >= 0.85) & (var <= 1.15))


def test_covariance_errors_are_calibrated(mc_draw):
    # for Gaussian data the covariance estimate has variance (s_ii s_jj + s_ij^2) / n
    vals, target = mc_draw
    n = vals.shape[0]
    emp = vals.T @ vals / n
    sd = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / n)
    z = ((emp - target) / sd)[np.triu_indices(50)]
    assert abs(z.mean()) < 0.5
    assert 0.7 < z.std() < 1.3
    assert np.mean(np.abs(z) > 3) < 0.01


def test_response_identities():
    ones = np.ones((10, 2, 3))
    assert np.all(response_from_covariates(ones) == 55.0)
    assert np.all(response_from_covariates(np.zeros((10, 2, 3))) == 0.0)


def test_dataset_response_recomputed():
    sites = line_sites(12)
    ds = simulate_dataset(sites, MaternParams(1.0, 0.1, 1.5), 6, seed=3)
    assert ds.covariates.shape == (10, 6, 12)
    y = np.zeros((6, 12))
    for k in range(10):
        y = y + (k + 1) * ds.covariates[k]
    assert np.array_equal(ds.response, y)
    # covariates come from distinct streams
    assert not np.allclose(ds.covariates[0], ds.covariates[1])


def test_dataset_noise_switch():
    sites = line_sites(8)
    p = MaternParams(1.0, 0.1, 0.5)
    clean = simulate_dataset(sites, p, 4, seed=1)
    noisy = simulate_dataset(sites, p, 4, seed=1, response_noise_sd=0.5)
    assert np.array_equal(clean.covariates, noisy.covariates)
    assert not np.array_equal(clean.response, noisy.response)


def test_csv_exports(tmp_path):
    sites = line_sites(4)
    p = MaternParams(1.0, 0.1, 0.5)
    field = sample_grf(sites, p, 3, seed=0)
    field.to_csv(tmp_path / "f.csv")
    df = pd.read_csv(tmp_path / "f.csv", float_precision="round_trip")
    assert list(df.columns) == ["replicate", "site_index", "value"]
    assert np.array_equal(df["value"].to_numpy().reshape(3, 4), field.values)

    ds = simulate_dataset(sites, p, 2, seed=0)
    ds.to_csv(tmp_path / "d.csv")
    df = pd.read_csv(tmp_path / "d.csv", float_precision="round_trip")
    assert list(df.columns) == ["variable", "replicate", "site_index", "value"]
    assert sorted(df["variable"].unique()) == sorted([f"X{k}" for k in range(1, 11)] + ["Y"])
    y = df[df.variable == "Y"]["value"].to_numpy().reshape(2, 4)
    assert np.array_equal(y, ds.response)
