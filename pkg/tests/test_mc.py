import numpy as np
import pytest

from wigner_ldp import mc, oracles
from wigner_ldp.dyson import support_edge
from wigner_ldp.mc import (
    DensityMeasure,
    DiscreteMeasure,
    InconclusiveError,
    annealed_integral_mc,
    eig_top,
    entry_log_mgf,
    profile_dirichlet_check,
    projected_empirical,
    quantile_spectrum_matrix,
    sample_matrix,
    spherical_integral_mc,
    tail_estimate,
    tilted_outlier_check,
    vector_profile,
    wasserstein1,
    wilson_interval,
)
from wigner_ldp.ratefn import eval_J, eval_K, eval_phi, rate_function


# -- sampler -------------------------------------------------------------------


def test_sampler_symmetric_and_deterministic(const_prof):
    H1 = sample_matrix(const_prof, 30, "gaussian", seed=42)
    H2 = sample_matrix(const_prof, 30, "gaussian", seed=42)
    assert np.array_equal(H1, H1.T)
    assert np.array_equal(H1, H2)
    H3 = sample_matrix(const_prof, 30, "gaussian", seed=43)
    assert not np.array_equal(H1, H3)


def test_sampler_rademacher_magnitudes(const_prof):
    H = sample_matrix(const_prof, 16, "rademacher", seed=0)
    off = np.abs(H[np.triu_indices(16, 1)])
    assert np.allclose(off, 1 / np.sqrt(16))


def test_sampler_wishart_checkerboard(wishart2):
    # zero diagonal blocks: entries vanish exactly inside each block
    N = 12
    H = sample_matrix(wishart2, N, "gaussian", seed=1)
    b = wishart2.row_blocks(N)
    same = b[:, None] == b[None, :]
    assert np.all(H[same] == 0.0)
    assert np.any(H[~same] != 0.0)


def test_sampler_rejects_tiny(const_prof):
    with pytest.raises(ValueError):
        sample_matrix(const_prof, 1)


def test_variance_calibration(block_14):
    from wigner_ldp.mc import _sample_chunk, _scale_matrices

    N = 6
    _, off, diag = _scale_matrices(block_14, N)
    Hs = np.concatenate(
        [_sample_chunk(block_14, N, "gaussian", 5, ci, mc.MC_CHUNK, off, diag) for ci in range(200)]
    )
    b = block_14.row_blocks(N)
    S = block_14.sigma[np.ix_(b, b)]
    for (i, j) in [(0, 1), (4, 5), (0, 0), (5, 5)]:
        target = (2.0 if i == j else 1.0) * S[i, j]
        got = Hs[:, i, j].var() * N
        if target == 0:
            assert got == 0.0
        else:
            assert abs(got / target - 1) < 0.02


@pytest.mark.parametrize("dist", mc.ENTRY_KINDS)
def test_sharp_subgaussian_certificate(dist):
    t = np.linspace(-5, 5, 401)
    lm = entry_log_mgf(dist, t)
    assert np.all(lm <= t * t / 2 + 1e-12)
    if dist == "gaussian":
        assert np.allclose(lm, t * t / 2)
    else:
        interior = np.abs(t) > 0.5
        assert np.all(lm[interior] < t[interior] ** 2 / 2)


def test_entry_unit_variance():
    rng = np.random.default_rng(0)
    from wigner_ldp.mc import _draw

    for dist in mc.ENTRY_KINDS:
        x = _draw(rng, 200000, dist)
        assert abs(x.mean()) < 0.01
        assert abs(x.var() - 1.0) < 0.01


# -- eig_top and projections ----------------------------------------------------


def test_eig_top_diag():
    lam1, v1, ev = eig_top(np.diag([3.0, 1.0, 0.0]))
    assert lam1 == 3.0
    assert np.allclose(np.abs(v1), [1, 0, 0])
    assert v1[0] > 0


def test_eig_top_exchange():
    lam1, v1, _ = eig_top(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert lam1 == pytest.approx(1.0)
    assert np.allclose(v1, [1 / np.sqrt(2)] * 2)


def test_eig_top_concentration(const_prof):
    lams = [eig_top(sample_matrix(const_prof, 300, "gaussian", seed=s))[0] for s in range(12)]
    assert abs(np.mean(lams) - 2.0) < 0.1
    assert np.std(lams) < 0.1


def test_projected_empirical_identity_block(const_prof):
    H = sample_matrix(const_prof, 50, "gaussian", seed=3)
    (meas,) = projected_empirical(H, const_prof)
    assert meas.total_mass == pytest.approx(1.0, abs=1e-12)
    _, _, ev = eig_top(H)
    assert np.allclose(np.sort(meas.atoms), ev)


def test_projected_weights_resolution_of_identity(block_14):
    N = 40
    H = sample_matrix(block_14, N, "gaussian", seed=4)
    measures = projected_empirical(H, block_14)
    tot = sum(m.weights for m in measures)
    assert np.allclose(tot, 1.0 / N, atol=1e-12)


def _wishart_block_reference(alpha, k, weight):
    """Oracle block measure: closed-form density plus the zero atom."""
    lo = (np.sqrt(alpha) - 1) / np.sqrt(1 + alpha)
    hi = oracles.wishart_edge(alpha)
    xs = np.concatenate([np.linspace(-hi, -lo, 2000), np.linspace(lo, hi, 2000)])
    dens = weight * oracles.wishart_block_density(alpha, xs, k)
    wts = np.gradient(xs) * dens
    atoms, weights = xs, wts
    if k == 2:
        atom_mass = weight * (1 - 1 / alpha)
        atoms = np.concatenate([atoms, [0.0]])
        weights = np.concatenate([weights * (weight * (1 / alpha)) / weights.sum(), [atom_mass]])
    else:
        weights = weights * weight / weights.sum()
    return DiscreteMeasure(atoms, weights)


def test_projected_empirical_wishart_w1(wishart2):
    N = 600
    H = sample_matrix(wishart2, N, "gaussian", seed=7)
    measures = projected_empirical(H, wishart2)
    for k in (1, 2):
        ref = _wishart_block_reference(2.0, k, wishart2.weights[k - 1])
        emp = measures[k - 1]
        # align total masses exactly (finite-N block sizes vs weights)
        emp = DiscreteMeasure(emp.atoms, emp.weights * ref.total_mass / emp.total_mass)
        assert wasserstein1(emp, ref) < 0.05


# -- Wasserstein ------------------------------------------------------------------


def test_w1_identical_zero():
    m = DiscreteMeasure(np.array([0.5, 1.0]), np.array([0.3, 0.7]))
    assert wasserstein1(m, m) == 0.0


def test_w1_point_masses():
    d0 = DiscreteMeasure(np.array([0.0]), np.array([1.0]))
    d1 = DiscreteMeasure(np.array([1.0]), np.array([1.0]))
    assert wasserstein1(d0, d1) == pytest.approx(1.0, abs=1e-12)


def test_w1_uniform_samples():
    rng = np.random.default_rng(1)
    u = rng.uniform(0, 1, 10**4)
    emp = DiscreteMeasure(u, np.full(u.size, 1.0 / u.size))
    ref = DensityMeasure(np.linspace(0, 1, 201), np.ones(201))
    assert wasserstein1(emp, ref) < 0.02


def test_w1_mass_mismatch():
    d0 = DiscreteMeasure(np.array([0.0]), np.array([1.0]))
    d1 = DiscreteMeasure(np.array([1.0]), np.array([0.5]))
    with pytest.raises(ValueError):
        wasserstein1(d0, d1)


# -- spherical integral -------------------------------------------------------------


def test_spherical_zero_cases(const_prof):
    M = quantile_spectrum_matrix(const_prof, 60, 3.0)
    assert spherical_integral_mc(M, 0.0, 2000, seed=0).value == 0.0
    assert spherical_integral_mc(np.zeros((40, 40)), 1.3, 2000, seed=0).value == 0.0


def test_spherical_matches_J_moderate_tilt(const_prof):
    # at small theta and moderate N the plain estimator resolves the limit
    M = quantile_spectrum_matrix(const_prof, 80, 3.0)
    est = spherical_integral_mc(M, 0.15, 4 * 10**4, seed=0)
    ref = eval_J(const_prof, 3.0, 0.15)
    assert abs(est.value - ref) < 0.03
    assert est.stderr < 0.05


def test_spherical_needs_samples(const_prof):
    with pytest.raises(ValueError):
        spherical_integral_mc(np.zeros((10, 10)), 0.1, 10)


# -- annealed integral ----------------------------------------------------------------


def test_annealed_constant_exact(const_prof):
    est = annealed_integral_mc(const_prof, 0.6, [1.0], 0.2, 200, 20000, seed=0)
    assert est.value == pytest.approx(0.36, abs=1e-9)
    assert est.hits == 20000


def test_annealed_zero_tilt_window(wishart2):
    est = annealed_integral_mc(wishart2, 0.0, wishart2.weights, 0.2, 200, 20000, seed=0)
    assert -0.01 < est.value <= 0.0


def test_annealed_wishart_matches_K(wishart2):
    _, r = support_edge(wishart2)
    x = r + 0.3
    theta = 0.6
    psi_star = rate_function(wishart2, x).psi_star
    phi = eval_phi(wishart2, theta, x, psi_star).values
    est = annealed_integral_mc(wishart2, theta, phi, 0.1, 200, 2 * 10**5, seed=0)
    assert abs(est.value - eval_K(wishart2, theta, phi)) < 7e-2


def test_annealed_empty_window(wishart2):
    with pytest.raises(InconclusiveError):
        annealed_integral_mc(wishart2, 0.5, [0.99, 0.01], 0.01, 200, 2000, seed=0)


# -- Dirichlet profile of sphere vectors ------------------------------------------------


def test_dirichlet_single_block(const_prof):
    rep = profile_dirichlet_check(const_prof, 50, 5000, seed=0)
    assert rep["max_mean_dev"] == 0.0
    assert rep["max_cov_dev"] == 0.0


def test_dirichlet_two_equal_blocks(block_14):
    rep = profile_dirichlet_check(block_14, 100, 10**5, seed=0)
    assert rep["max_mean_dev"] < 3 * rep["se_mean"].max() + 1e-9
    # Dirichlet(25, 25): Var rho_1 = 0.25/51
    assert rep["cov_emp"][0, 0] == pytest.approx(0.25 / 51, rel=0.05)


# -- tilted ensemble --------------------------------------------------------------------


def test_tilted_outlier_constant(const_prof):
    rep = tilted_outlier_check(const_prof, 3.0, [1.0], N=200, samples=20, seed=0)
    assert rep["theta_star"] == pytest.approx((3 + np.sqrt(5)) / 4, abs=1e-8)
    assert abs(rep["mean_lambda1"] - 3.0) < 0.15


def test_zero_tilt_sticks_to_edge(const_prof):
    lams = [eig_top(sample_matrix(const_prof, 300, "gaussian", seed=s))[0] for s in range(8)]
    _, r = support_edge(const_prof)
    assert abs(np.mean(lams) - r) < 0.1


def test_tilted_outlier_block_profile(block_14):
    # mass pushed onto the first block: outlier appears, eigenvector follows phi
    _, r = support_edge(block_14)
    x = r + 0.6
    rep = tilted_outlier_check(block_14, x, [1.0, 0.0], N=300, samples=12, seed=0)
    assert abs(rep["mean_lambda1"] - x) < 0.12
    assert rep["mean_profile_gap"] < 0.1


# -- tail frequencies ----------------------------------------------------------------------


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    lo0, hi0 = wilson_interval(0, 100)
    assert lo0 == 0.0 and hi0 > 0.0


def test_tail_bulk_event(const_prof):
    pts = tail_estimate(const_prof, 0.5, [30], 500, "gaussian", seed=0)
    assert pts[0].p_hat > 0.99
    assert pts[0].rate == pytest.approx(0.0, abs=1e-3)


def test_tail_trend_toward_rate(const_prof):
    pts = tail_estimate(const_prof, 2.2, [20, 40], 4 * 10**4, "gaussian", seed=0)
    ref = oracles.goe_rate(2.2)
    assert pts[0].rate > pts[1].rate > ref
    assert pts[0].hits > 0 and pts[1].hits > 0


def test_tail_zero_hits_one_sided(const_prof):
    pts = tail_estimate(const_prof, 3.5, [30], 400, "gaussian", seed=0)
    assert pts[0].one_sided and np.isinf(pts[0].rate)
    assert np.isfinite(pts[0].rate_lo)


def test_tail_thread_count_invariance(const_prof):
    a = tail_estimate(const_prof, 2.2, [24], 3000, "gaussian", seed=9, threads=1)
    b = tail_estimate(const_prof, 2.2, [24], 3000, "gaussian", seed=9, threads=4)
    assert a[0].hits == b[0].hits


def test_vector_profile_sums_to_one(block_14):
    rng = np.random.default_rng(0)
    v = rng.standard_normal(60)
    v /= np.linalg.norm(v)
    rho = vector_profile(block_14, v)
    assert rho.sum() == pytest.approx(1.0, abs=1e-10)


def test_collect_batch_invariants(block_14):
    batch = mc.collect_batch(block_14, 60, 8, "gaussian", seed=2)
    assert np.allclose(batch.rho_v1.sum(axis=1), 1.0, atol=1e-10)
    assert sum(m.total_mass for m in batch.projected) == pytest.approx(1.0, abs=1e-10)
    text = batch.to_csv()
    assert text.splitlines()[0] == "seed_index,lambda1,rho_1,rho_2"
    assert len(text.splitlines()) == 9


def test_edge_concentration_named_profiles(named_profiles):
    # P(|lambda_1 - r| > 0.15) stays small at N = 800
    for prof in named_profiles:
        _, r = support_edge(prof)
        lam = np.array(
            [eig_top(sample_matrix(prof, 800, "gaussian", seed=700 + s))[0] for s in range(25)]
        )
        assert np.mean(np.abs(lam - r) > 0.15) < 0.05
