import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bwfrechet.errors import InvalidInputError, UnreliableResultError
from bwfrechet.frechet import (
    CovariateMoments,
    Dataset,
    SolverOptions,
    weighted_frechet_mean,
)
from bwfrechet.manifold import (
    SymOperator,
    ot_map,
    ot_map_differential,
    sym_dim,
)
# the module is imported as a whole because two of its public names start
# with Test/test_ and would otherwise be collected by pytest
from bwfrechet import partial_test as pt
from bwfrechet.partial_test import (
    SplitDataset,
    fit_first_half,
    gram_kernel,
    impute_z,
    imputation_adjustment,
    imputed_covariates,
    influence_kernel_matrix,
    influence_matrix,
    kernel_matrix,
    mixture_quantile,
    no_split_statistic,
    null_eigenvalues,
    p_value,
    run_partial_test,
    split_dataset,
)
from bwfrechet.simgen import SimConfig, generate

QUIET = SolverOptions(grad_tol=1e-9)


def random_spd_stack(rng, n, d, spread=1.0):
    a = rng.standard_normal((n, d, d))
    mats = a @ a.transpose(0, 2, 1)
    return mats + (0.5 + spread * rng.random((n, 1, 1))) * np.eye(d)


def small_example(n=36, p_y=2, p_z=2, d=4, delta=0.0, seed=0):
    data, _ = generate(
        SimConfig(example=1, n=n, p_y=p_y, p_z=p_z, d=d, delta_z=delta, seed=seed)
    )
    return data


def handmade_split(covariates, responses, p1):
    """SplitDataset built directly, bypassing split_dataset validation."""
    data = Dataset(covariates=covariates, responses=responses, p1=p1)
    n1 = (data.n + 1) // 2
    moments = CovariateMoments.from_covariates(covariates[:n1], p1)
    return SplitDataset(data=data, n1=n1, n2=data.n - n1, moments=moments)


# ---------------------------------------------------------------------------
# splitting and imputation
# ---------------------------------------------------------------------------


def test_split_sizes_and_moments():
    rng = np.random.default_rng(3)
    for n, n1_want in ((5, 3), (6, 3), (200, 100)):
        x = rng.uniform(-1, 1, (n, 3))
        q = random_spd_stack(rng, n, 2)
        split = split_dataset(Dataset(covariates=x, responses=q, p1=2))
        assert split.n1 == n1_want and split.n2 == n - n1_want
        xc = x[:n1_want] - x[:n1_want].mean(axis=0)
        assert_allclose(split.moments.mean, x[:n1_want].mean(axis=0), atol=1e-12)
        assert_allclose(split.moments.cov, (xc.T @ xc) / n1_want, atol=1e-12)
        assert_allclose(split.first_covariates, x[:n1_want], atol=0)
        assert_allclose(split.second_responses, q[n1_want:], atol=0)


def test_split_validation():
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, (3, 2))
    q = random_spd_stack(rng, 3, 2)
    with pytest.raises(InvalidInputError):
        split_dataset(Dataset(covariates=x, responses=q, p1=1))
    x = rng.uniform(-1, 1, (8, 2))
    q = random_spd_stack(rng, 8, 2)
    with pytest.raises(InvalidInputError):
        split_dataset(Dataset(covariates=x, responses=q, p1=0))
    with pytest.raises(InvalidInputError):
        split_dataset(Dataset(covariates=x, responses=q, p1=2))


def test_split_permute_seed_reproducible():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, (10, 3))
    q = random_spd_stack(rng, 10, 2)
    data = Dataset(covariates=x, responses=q, p1=2)
    a = split_dataset(data, permute_seed=7)
    b = split_dataset(data, permute_seed=7)
    assert_allclose(a.data.covariates, b.data.covariates, atol=0)
    c = split_dataset(data, permute_seed=8)
    assert not np.array_equal(a.data.covariates, c.data.covariates)
    # permutation, not resampling: same rows as a multiset
    assert_allclose(
        np.sort(c.data.covariates.ravel()), np.sort(x.ravel()), atol=0
    )


def test_impute_hand_line():
    # first half holds (y, z) = (0,0), (1,1), (2,2): the best linear
    # predictor of z from y is the identity line
    x = np.array(
        [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.5, 9.0], [1.5, -3.0], [2.5, 0.0]]
    )
    rng = np.random.default_rng(6)
    q = random_spd_stack(rng, 6, 2)
    split = split_dataset(Dataset(covariates=x, responses=q, p1=1))
    for y in (0.0, 0.25, 1.0, 3.0, -2.0):
        assert_allclose(impute_z(np.array([y]), split.moments), [y], atol=1e-12)
    hat = imputed_covariates(x[3:], split.moments)
    assert_allclose(hat[:, 0], x[3:, 0], atol=0)
    assert_allclose(hat[:, 1], x[3:, 0], atol=1e-12)


def test_impute_zero_cross_covariance():
    # y and z uncorrelated in the first half: imputation is the plain mean
    x = np.array(
        [[-1.0, 1.0], [1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]
        + [[0.3, 0.7], [0.1, -0.2], [-0.4, 0.9], [0.8, 0.3]]
    )
    rng = np.random.default_rng(7)
    q = random_spd_stack(rng, 8, 2)
    split = split_dataset(Dataset(covariates=x, responses=q, p1=1))
    assert_allclose(split.moments.cov[1, 0], 0.0, atol=1e-15)
    for y in (-2.0, 0.0, 1.3):
        assert_allclose(impute_z(np.array([y]), split.moments), [0.0], atol=1e-12)


def test_impute_collinear_z_column():
    # z duplicates the first y column, so the imputation recovers it exactly
    rng = np.random.default_rng(8)
    y = rng.uniform(-1, 1, (12, 2))
    x = np.column_stack([y, y[:, 0]])
    q = random_spd_stack(rng, 12, 2)
    split = split_dataset(Dataset(covariates=x, responses=q, p1=2))
    probe = rng.uniform(-1, 1, (5, 2))
    assert_allclose(impute_z(probe, split.moments)[:, 0], probe[:, 0], atol=1e-10)


# ---------------------------------------------------------------------------
# test statistic
# ---------------------------------------------------------------------------


def straight_line_statistic(data, options):
    """Direct re-implementation of the discrepancy statistic, no caching."""
    n1 = (data.n + 1) // 2
    x = data.covariates
    q1 = data.responses[:n1]
    p1 = data.p1
    m = CovariateMoments.from_covariates(x[:n1], p1)
    inv = np.linalg.inv(m.cov)
    inv11 = np.linalg.inv(m.cov[:p1, :p1])
    cov21 = m.cov[p1:, :p1]
    msym = sym_dim(data.d)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(n1, data.n):
            y = x[k, :p1]
            zhat = m.mean[p1:] + cov21 @ inv11 @ (y - m.mean[:p1])
            xhat = np.concatenate([y, zhat])
            w_obs = 1.0 + (x[:n1] - m.mean) @ inv @ (x[k] - m.mean)
            w_hat = 1.0 + (x[:n1] - m.mean) @ inv @ (xhat - m.mean)
            fit_obs = weighted_frechet_mean(q1, w_obs, options).mean
            fit_hat = weighted_frechet_mean(q1, w_hat, options).mean
            hmat = np.zeros((msym, msym))
            for i in range(n1):
                hmat -= w_hat[i] * ot_map_differential(fit_hat, q1[i]).matrix
            hmat /= n1
            image = SymOperator(data.d, hmat).apply(fit_obs - fit_hat)
            total += float(np.sum(image * image))
    return total


def generic_dataset(n, p, p1, d, seed):
    # responses without a shared eigenbasis; the solver has to iterate
    rng = np.random.default_rng(seed)
    return Dataset(
        covariates=rng.uniform(-1, 1, (n, p)),
        responses=random_spd_stack(rng, n, d),
        p1=p1,
    )


@pytest.mark.parametrize(
    "data",
    [small_example(n=36, delta=0.2, seed=21), generic_dataset(30, 4, 2, 3, 22)],
    ids=["shared-eigenbasis", "generic"],
)
def test_statistic_matches_straight_line_oracle(data):
    split = split_dataset(data)
    fit = fit_first_half(split, QUIET)
    got = pt.test_statistic(fit, max_nonconverged=1.0)
    want = straight_line_statistic(data, QUIET)
    assert got >= 0.0
    assert_allclose(got, want, rtol=1e-8)


def test_statistic_zero_when_blocks_identical():
    # p1 = p via direct construction: imputed covariates equal the observed
    # ones, both fits coincide and the statistic vanishes exactly
    rng = np.random.default_rng(23)
    x = rng.uniform(-1, 1, (16, 3))
    q = random_spd_stack(rng, 16, 3)
    split = handmade_split(x, q, p1=3)
    fit = fit_first_half(split, QUIET)
    assert_allclose(fit.xhat_second, split.second_covariates, atol=1e-12)
    assert pt.test_statistic(fit, max_nonconverged=1.0) == 0.0


def test_statistic_first_order_expansion_tracks_kernel_total():
    # the statistic approximately equals the sum of all calibration kernel
    # entries; this is the expansion the calibration rests on
    data = small_example(n=120, p_y=3, p_z=3, d=6, delta=0.0, seed=29)
    split = split_dataset(data)
    fit = fit_first_half(split, QUIET)
    stat = pt.test_statistic(fit, max_nonconverged=1.0)
    kern = kernel_matrix(fit)
    total = float(np.ones(split.n1) @ kern @ np.ones(split.n1))
    assert abs(stat - total) <= 0.08 * max(stat, total)


# ---------------------------------------------------------------------------
# influence functions and the adjustment operator
# ---------------------------------------------------------------------------


def nocache_influence(fit, split, second_index, first_index):
    """tau-hat from explicit loops over the displayed formulas."""
    m = split.moments
    n1 = split.n1
    d = split.data.d
    p1 = split.data.p1
    x = split.data.covariates
    inv = np.linalg.inv(m.cov)
    inv11 = np.linalg.inv(m.cov[:p1, :p1])
    xc = x - m.mean
    base = fit.means_first[first_index]
    eye = np.eye(d)

    t_first = np.stack([ot_map(base, split.data.responses[j]) - eye for j in range(n1)])
    ti = ot_map(base, split.data.responses[n1 + second_index]) - eye
    xk = xc[first_index]
    xi = xc[n1 + second_index]

    mstack = np.tensordot(xc[:n1], t_first, axes=(0, 0)) / n1
    a0 = inv @ (np.outer(xi, xi) - m.cov) @ inv @ xk
    tau0 = (xi @ inv @ xk) * ti - np.tensordot(a0, mstack, axes=(0, 0))
    a1 = inv11 @ (np.outer(xi[:p1], xi[:p1]) - m.cov[:p1, :p1]) @ inv11 @ xk[:p1]
    tau1 = (xi[:p1] @ inv11 @ xk[:p1]) * ti - np.tensordot(a1, mstack[:p1], axes=(0, 0))

    w_obs = 1.0 + xc[:n1] @ inv @ xk
    w_hat = 1.0 + xc[:n1] @ inv @ (fit.xhat_first[first_index] - m.mean)
    msym = sym_dim(d)
    numer = np.zeros((msym, msym))
    denom = np.zeros((msym, msym))
    for j in range(n1):
        dt = ot_map_differential(base, split.data.responses[j]).matrix
        numer += (w_obs[j] - w_hat[j]) * dt
        denom -= w_obs[j] * dt
    numer /= n1
    denom /= n1
    dinv, _ = SymOperator(d, denom).pinv(1e-10)
    ahat = SymOperator(d, numer @ dinv.matrix)
    return tau0 - tau1 + ahat.apply(tau0)


@pytest.mark.parametrize(
    "data",
    [small_example(n=24, delta=0.15, seed=31), generic_dataset(24, 4, 2, 3, 32)],
    ids=["shared-eigenbasis", "generic"],
)
def test_influence_matches_nocache_oracle(data):
    split = split_dataset(data)
    fit = fit_first_half(split, QUIET)
    for i, k in ((0, 0), (3, 5), (11, 2)):
        got = influence_matrix(fit, i, k)
        want = nocache_influence(fit, split, i, k)
        assert_allclose(got, want, rtol=1e-10, atol=1e-12)


def test_influence_centered_argument_simplification():
    # second-half row equal to the first-half mean: the leading terms of
    # tau0/tau1 vanish and the moment contractions keep a = -inv @ center
    rng = np.random.default_rng(33)
    x = rng.uniform(-1, 1, (16, 3))
    x[8] = x[:8].mean(axis=0)
    q = random_spd_stack(rng, 16, 3)
    split = split_dataset(Dataset(covariates=x, responses=q, p1=2))
    fit = fit_first_half(split, QUIET)
    k = 4
    got = influence_matrix(fit, 0, k)

    m = split.moments
    inv = np.linalg.inv(m.cov)
    inv11 = np.linalg.inv(m.cov[:2, :2])
    xc = x - m.mean
    base = fit.means_first[k]
    eye = np.eye(3)
    t_first = np.stack([ot_map(base, q[j]) - eye for j in range(8)])
    mstack = np.tensordot(xc[:8], t_first, axes=(0, 0)) / 8
    tau0 = np.tensordot(inv @ xc[k], mstack, axes=(0, 0))
    tau1 = np.tensordot(inv11 @ xc[k, :2], mstack[:2], axes=(0, 0))
    adj = imputation_adjustment(fit, k)
    want = tau0 - tau1 + adj.apply(tau0)
    assert_allclose(got, want, rtol=1e-9, atol=1e-12)


def test_influence_and_kernels_vanish_when_no_tested_block():
    rng = np.random.default_rng(34)
    x = rng.uniform(-1, 1, (14, 3))
    q = random_spd_stack(rng, 14, 3)
    split = handmade_split(x, q, p1=3)
    fit = fit_first_half(split, QUIET)
    assert_allclose(influence_matrix(fit, 2, 3), np.zeros((3, 3)), atol=1e-10)
    assert_allclose(imputation_adjustment(fit, 1).matrix, 0.0, atol=1e-12)
    assert_allclose(kernel_matrix(fit), 0.0, atol=1e-14)
    assert_allclose(influence_kernel_matrix(fit), 0.0, atol=1e-10)


def test_adjustment_composition_residual():
    data = small_example(n=20, d=3, delta=0.1, seed=35)
    split = split_dataset(data)
    fit = fit_first_half(split, QUIET)
    m = split.moments
    inv = m.require_cov_inv()
    xc = split.first_covariates - m.mean
    k = 3
    base = fit.means_first[k]
    w_obs = 1.0 + xc @ inv @ xc[k]
    w_hat = 1.0 + xc @ inv @ (fit.xhat_first[k] - m.mean)
    msym = sym_dim(data.d)
    numer = np.zeros((msym, msym))
    denom = np.zeros((msym, msym))
    for j in range(split.n1):
        dt = ot_map_differential(base, split.first_responses[j]).matrix
        numer += (w_obs[j] - w_hat[j]) * dt
        denom -= w_obs[j] * dt
    numer /= split.n1
    denom /= split.n1
    adj = imputation_adjustment(fit, k)
    assert_allclose(adj.matrix @ denom, numer, rtol=1e-8, atol=1e-10)
    with pytest.raises(InvalidInputError):
        imputation_adjustment(fit, split.n1)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def test_gram_kernel_rank_one_factorization():
    rng = np.random.default_rng(41)
    n1, n2, d = 5, 4, 3
    coeff = rng.standard_normal((n1, n2))
    mat = rng.standard_normal((d, d))
    mat = mat + mat.T
    stack = coeff[:, :, None, None] * mat
    got = gram_kernel(stack)
    want = (coeff.T @ coeff) * float(np.sum(mat * mat)) / (n1 * n2)
    assert_allclose(got, want, rtol=1e-12, atol=1e-12)
    with pytest.raises(InvalidInputError):
        gram_kernel(np.zeros((3, 3, 2)))


def test_kernel_matrix_matches_direct_loops():
    data = small_example(n=30, delta=0.1, seed=43)
    split = split_dataset(data)
    fit = fit_first_half(split, QUIET)
    m = split.moments
    inv = m.require_cov_inv()
    n1, n2, d = split.n1, split.n2, split.data.d
    eye = np.eye(d)
    x1c = split.first_covariates - m.mean
    want = np.zeros((n1, n1))
    for k in range(n2):
        dw = (split.second_covariates[k] - fit.xhat_second[k]) @ inv @ x1c.T
        flat = np.stack(
            [
                (ot_map(fit.means_second_imputed[k], split.first_responses[i]) - eye).ravel()
                for i in range(n1)
            ]
        )
        u = dw[:, None] * flat
        want += u @ u.T
    want /= n1 * n1
    got = kernel_matrix(fit)
    assert got.shape == (n1, n1)
    assert_allclose(got, got.T, atol=1e-12)
    assert_allclose(got, want, rtol=1e-9, atol=1e-13)
    vals = np.linalg.eigvalsh(got)
    assert vals[0] >= -1e-10 * max(np.trace(got), 1e-12)


def test_influence_kernel_matrix_gram_properties():
    data = small_example(n=24, delta=0.0, seed=47)
    split = split_dataset(data)
    fit = fit_first_half(split, QUIET)
    kern = influence_kernel_matrix(fit)
    assert kern.shape == (split.n2, split.n2)
    assert_allclose(kern, kern.T, atol=1e-12)
    vals = np.linalg.eigvalsh(kern)
    assert vals[0] >= -1e-10 * max(np.trace(kern), 1e-12)
    # threading only changes the work schedule, not the result
    fit2 = fit_first_half(split, QUIET)
    assert np.array_equal(influence_kernel_matrix(fit2, threads=4), kern)


def test_null_eigenvalues_identities():
    assert_allclose(null_eigenvalues(np.zeros((4, 4))), np.zeros(4), atol=0)
    assert_allclose(null_eigenvalues(np.eye(3)), np.ones(3), atol=0)
    rng = np.random.default_rng(53)
    a = rng.standard_normal((6, 6))
    kern = a @ a.T - 2.0 * np.eye(6)  # some negative eigenvalues
    lam = null_eigenvalues(kern)
    assert np.all(lam >= 0.0) and np.all(np.diff(lam) <= 0.0)
    raw = np.linalg.eigvalsh(kern)
    assert_allclose(raw.sum(), np.trace(kern), rtol=1e-10)
    with pytest.raises(InvalidInputError):
        null_eigenvalues(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        null_eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))
    bad = np.eye(2)
    bad[0, 0] = np.nan
    with pytest.raises(InvalidInputError):
        null_eigenvalues(bad)


# ---------------------------------------------------------------------------
# chi-squared mixture calibration
# ---------------------------------------------------------------------------


def test_mixture_quantile_chi1_oracle():
    q = mixture_quantile(np.array([1.0]), 0.05, draws=1_000_000, seed=10)
    assert abs(q - 3.8415) <= 0.02
    p = p_value(3.8415, np.array([1.0]), draws=1_000_000, seed=10)
    assert abs(p - 0.05) <= 0.005


def test_mixture_homogeneity_and_degenerate_cases():
    lam = np.array([0.8, 0.3, 0.1])
    q1 = mixture_quantile(lam, 0.1, draws=5000, seed=3)
    q2 = mixture_quantile(2.5 * lam, 0.1, draws=5000, seed=3)
    assert_allclose(q2, 2.5 * q1, rtol=1e-12)
    assert mixture_quantile(np.zeros(4), 0.05, draws=2000, seed=0) == 0.0
    assert p_value(0.0, lam, draws=2000, seed=1) == 1.0
    # decreasing in the statistic
    ps = [p_value(t, lam, draws=5000, seed=2) for t in (0.1, 1.0, 5.0)]
    assert ps[0] >= ps[1] >= ps[2]


def test_mixture_validation():
    with pytest.raises(InvalidInputError):
        mixture_quantile(np.array([-0.1, 1.0]), 0.05, draws=2000, seed=0)
    with pytest.raises(InvalidInputError):
        mixture_quantile(np.array([1.0]), 0.05, draws=10, seed=0)
    with pytest.raises(InvalidInputError):
        mixture_quantile(np.array([1.0]), 1.5, draws=2000, seed=0)
    with pytest.raises(InvalidInputError):
        p_value(np.inf, np.array([1.0]), draws=2000, seed=0)


# ---------------------------------------------------------------------------
# invariances
# ---------------------------------------------------------------------------


def test_statistic_invariant_to_within_half_relabeling():
    data = small_example(n=28, delta=0.1, seed=61)
    split = split_dataset(data)
    fit = fit_first_half(split, QUIET)
    stat = pt.test_statistic(fit, max_nonconverged=1.0)
    lam = null_eigenvalues(kernel_matrix(fit))

    rng = np.random.default_rng(62)
    perm1 = rng.permutation(split.n1)
    perm2 = split.n1 + rng.permutation(split.n2)
    shuffled = data.subset(np.concatenate([perm1, perm2]))
    fit2 = fit_first_half(split_dataset(shuffled), QUIET)
    stat2 = pt.test_statistic(fit2, max_nonconverged=1.0)
    lam2 = null_eigenvalues(kernel_matrix(fit2))
    assert_allclose(stat2, stat, rtol=1e-6)
    assert_allclose(lam2, lam, rtol=1e-5, atol=1e-9)


def test_statistic_invariant_to_orthogonal_conjugation():
    data = small_example(n=28, delta=0.1, seed=63)
    rng = np.random.default_rng(64)
    o, _ = np.linalg.qr(rng.standard_normal((data.d, data.d)))
    rotated = Dataset(
        covariates=data.covariates,
        responses=np.einsum("ab,nbc,dc->nad", o, data.responses, o),
        p1=data.p1,
    )
    fit = fit_first_half(split_dataset(data), QUIET)
    fit2 = fit_first_half(split_dataset(rotated), QUIET)
    stat = pt.test_statistic(fit, max_nonconverged=1.0)
    stat2 = pt.test_statistic(fit2, max_nonconverged=1.0)
    assert_allclose(stat2, stat, rtol=1e-6)
    lam = null_eigenvalues(kernel_matrix(fit))
    lam2 = null_eigenvalues(kernel_matrix(fit2))
    assert_allclose(lam2, lam, rtol=1e-5, atol=1e-9)


# ---------------------------------------------------------------------------
# end-to-end runs
# ---------------------------------------------------------------------------


def test_run_partial_test_fields_and_reproducibility():
    data = small_example(n=40, delta=0.0, seed=71)
    options = pt.TestOptions(mc_draws=20_000, seed=9)
    res = run_partial_test(data, options)
    assert res.statistic >= 0.0
    assert 0.0 <= res.p_value <= 1.0
    assert res.reject == (res.statistic > res.quantile)
    assert res.eigenvalues.size == (data.n + 1) // 2
    assert np.all(res.eigenvalues >= 0.0)
    assert np.all(np.diff(res.eigenvalues) <= 0.0)
    assert res.mc_draws == 20_000 and res.seed == 9
    assert res.diagnostics.n_fits == 3 * 20
    # rerun: bit-identical
    res2 = run_partial_test(data, options)
    assert res2.statistic == res.statistic
    assert res2.p_value == res.p_value
    assert np.array_equal(res2.eigenvalues, res.eigenvalues)
    # thread count must not change anything
    res4 = run_partial_test(data, pt.TestOptions(mc_draws=20_000, seed=9, threads=4))
    assert res4.statistic == res.statistic
    assert res4.p_value == res.p_value
    assert np.array_equal(res4.eigenvalues, res.eigenvalues)
    # quantile consistent with the public helpers on the same draws
    assert res.quantile == mixture_quantile(res.eigenvalues, 0.05, 20_000, 9)
    assert res.p_value == p_value(res.statistic, res.eigenvalues, 20_000, 9)


def test_run_partial_test_rejects_vacuous_partition():
    rng = np.random.default_rng(73)
    x = rng.uniform(-1, 1, (12, 2))
    q = random_spd_stack(rng, 12, 2)
    with pytest.raises(InvalidInputError):
        run_partial_test(Dataset(covariates=x, responses=q, p1=2))
    with pytest.raises(InvalidInputError):
        run_partial_test(Dataset(covariates=x, responses=q, p1=0))


def test_run_partial_test_unreliable_fits():
    # generic SPD responses (no shared eigenbasis), so a single solver step
    # cannot land on the barycenter the way it does for commuting families
    rng = np.random.default_rng(77)
    data = Dataset(
        covariates=rng.uniform(-1, 1, (24, 4)),
        responses=random_spd_stack(rng, 24, 3),
        p1=2,
    )
    starved = pt.TestOptions(
        mc_draws=2000, solver=SolverOptions(max_iters=1, grad_tol=1e-14)
    )
    with pytest.raises(UnreliableResultError):
        run_partial_test(data, starved)
    tolerant = pt.TestOptions(
        mc_draws=2000,
        max_nonconverged=1.0,
        solver=SolverOptions(max_iters=1, grad_tol=1e-14),
    )
    res = run_partial_test(data, tolerant)
    assert np.isfinite(res.statistic)
    assert res.diagnostics.nonconverged > 0


def test_test_options_validation():
    with pytest.raises(InvalidInputError):
        pt.TestOptions(alpha=0.0)
    with pytest.raises(InvalidInputError):
        pt.TestOptions(alpha=1.0)
    with pytest.raises(InvalidInputError):
        pt.TestOptions(threads=0)
    with pytest.raises(InvalidInputError):
        pt.TestOptions(max_nonconverged=-0.1)


def test_no_split_statistic_diagnostic():
    data = small_example(n=16, delta=0.2, seed=79)
    value = no_split_statistic(data, pt.TestOptions(mc_draws=2000, max_nonconverged=1.0))
    assert np.isfinite(value) and value >= 0.0
    rng = np.random.default_rng(80)
    x = rng.uniform(-1, 1, (12, 2))
    q = random_spd_stack(rng, 12, 2)
    with pytest.raises(InvalidInputError):
        no_split_statistic(Dataset(covariates=x, responses=q, p1=2))
