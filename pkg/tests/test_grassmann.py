import math

import numpy as np
import pytest
from scipy import stats

from mixradon import grassmann as gm
from mixradon import profiles as pr
from mixradon import radial_transforms as rt
from mixradon.errors import DimsViolation, ExistenceViolation
from mixradon.grassmann import AffinePlane, HaarSampler, MCBudget
from mixradon.radial_transforms import Dims

PI = math.pi
BUDGET = MCBudget(n_samples=20_000, seed=11)


def within(est, want, k=3.0):
    return abs(est.value - want) <= k * est.stderr


# {{{ planes


def test_plane_invariants_enforced():
    with pytest.raises(ValueError):
        AffinePlane(np.array([[1.0, 1.0, 0.0]]), np.zeros(3))
    with pytest.raises(ValueError):
        AffinePlane(np.eye(3)[:1], np.array([1.0, 0.0, 0.0]))
    with pytest.raises(DimsViolation):
        AffinePlane(np.eye(3)[:1], np.zeros(4))


def test_plane_from_vectors():
    p = AffinePlane.from_vectors([[1.0, 1.0, 0.0]], [2.0, 0.0, 1.0])
    assert p.dim == 1 and p.n == 3
    assert abs(p.basis[0] @ p.offset) < 1e-12
    np.testing.assert_allclose(p.offset, [1.0, -1.0, 1.0], atol=1e-12)
    assert p.norm == pytest.approx(math.sqrt(3))


def test_plane_equality_ignores_frame():
    s = HaarSampler(3)
    p = gm.plane_at_distance(5, 2, 1.5)
    q2 = gm.sample_rotation(s, 2)
    assert p.with_basis(q2 @ p.basis) == p
    assert p.with_basis(-p.basis) == p
    assert gm.plane_at_distance(5, 2, 1.4) != p


def test_complement_frame_is_orthonormal():
    p = gm.plane_at_distance(6, 2, 1.0).moved(gm.sample_rotation(HaarSampler(1), 6), np.zeros(6))
    c = p.complement_frame()
    full = np.vstack([p.basis, c])
    np.testing.assert_allclose(full @ full.T, np.eye(6), atol=1e-12)


# }}}

# {{{ sampling


def test_rotation_in_one_dimension_is_a_fair_sign():
    s = HaarSampler(2)
    q = gm.sample_rotations(s, 1, 4000)[:, 0, 0]
    assert set(np.unique(q)) == {-1.0, 1.0}
    assert stats.binomtest(int(np.sum(q > 0)), q.size).pvalue > 1e-3


def test_rotations_are_orthogonal():
    q = gm.sample_rotations(HaarSampler(4), 5, 500)
    err = np.abs(q @ np.swapaxes(q, 1, 2) - np.eye(5)).max()
    assert err <= 1e-12


def test_rotation_first_column_mean_is_zero():
    q = gm.sample_rotations(HaarSampler(5), 3, 10_000)[:, :, 0]
    se = q.std(axis=0, ddof=1) / math.sqrt(q.shape[0])
    assert np.all(np.abs(q.mean(axis=0)) <= 3 * se)


def test_rotation_columns_are_isotropic():
    n, m = 4, 10_000
    x = gm.sample_rotations(HaarSampler(6), n, m)[:, :, 1]
    # second moments of a uniform unit vector are I/n
    outer = x[:, :, None] * x[:, None, :]
    mean = outer.mean(axis=0)
    se = outer.std(axis=0, ddof=1) / math.sqrt(m)
    z = (mean - np.eye(n) / n)[np.triu_indices(n, 1)] / se[np.triu_indices(n, 1)]
    chi2 = float(np.sum(z * z))
    df = z.size
    assert chi2 <= df + 3 * math.sqrt(2 * df)
    assert np.all(np.abs(np.diag(mean) - 1 / n) <= 3 * np.diag(se) + 1e-15)


def test_sampler_is_deterministic():
    a = gm.sample_affine_planes(HaarSampler(9, 2), 4, 1, 50)
    b = gm.sample_affine_planes(HaarSampler(9, 2), 4, 1, 50)
    c = gm.sample_affine_planes(HaarSampler(9, 3), 4, 1, 50)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    assert not np.array_equal(a[1], c[1])


def test_sample_rotation_needs_positive_dimension():
    with pytest.raises(DimsViolation):
        gm.sample_rotation(HaarSampler(), 0)


def test_point_samples_have_student_t_law():
    bases, offsets, w = gm.sample_affine_planes(HaarSampler(12), 3, 0, 20_000)
    assert bases.shape == (20_000, 0, 3)
    # each coordinate of a 3-variate t(3) is a univariate t(3)
    assert stats.kstest(offsets[:, 0], stats.t(3).cdf).pvalue > 1e-3
    assert np.all(w > 0)


@pytest.mark.parametrize("n,j", [(3, 1), (4, 2), (5, 1), (4, 0)])
def test_sampled_planes_satisfy_invariants(n, j):
    s = HaarSampler(13)
    for _ in range(25):
        plane, w = gm.sample_affine_plane(s, n, j, 2.0)
        np.testing.assert_allclose(plane.basis @ plane.basis.T, np.eye(j), atol=1e-12)
        assert np.all(np.abs(plane.basis @ plane.offset) <= 1e-12 * max(1, plane.norm))
        assert w > 0


@pytest.mark.parametrize("n,j", [(3, 1), (4, 1), (5, 2), (4, 0)])
def test_importance_weights_integrate_offsets(n, j):
    d = n - j
    _, offsets, w = gm.sample_affine_planes(HaarSampler(21), n, j, 40_000)
    vals = w * (1 + np.sum(offsets**2, axis=1)) ** -n
    exact = PI ** (d / 2) * math.gamma(n - d / 2) / math.gamma(n)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - exact) <= 3 * se


def test_plane_dimension_range_checked():
    with pytest.raises(DimsViolation):
        gm.sample_affine_planes(HaarSampler(), 3, 3, 1)


# }}}

# {{{ incidence


def test_orthoplanes_around_vertical_axis():
    zeta = AffinePlane(np.array([[0.0, 0.0, 1.0]]), np.array([0.4, -0.2, 0.0]))
    dirs = []
    for tau, frame in gm.orthoplanes_through(zeta, HaarSampler(31), Dims(3, 1, 1), 2000):
        assert abs(tau.basis[0, 2]) <= 1e-12
        assert np.all(np.abs(tau.basis @ frame.T) <= 1e-12)
        dirs.append(tau.basis[0])
        # tau meets zeta: the point of zeta at height 0 lies on tau
        d = zeta.offset - tau.offset
        assert np.linalg.norm(d - tau.basis.T @ (tau.basis @ d)) <= 1e-12
    dirs = np.array(dirs)
    # unoriented line directions: angle mod pi is uniform
    ang = np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), PI) / PI
    assert stats.kstest(ang, "uniform").pvalue > 1e-3


@pytest.mark.parametrize("n,j,k", [(4, 1, 1), (5, 2, 1), (5, 1, 2), (6, 2, 2)])
def test_orthoplanes_are_perpendicular(n, j, k):
    s = HaarSampler(32)
    zeta, _ = gm.sample_affine_plane(s, n, k)
    for tau, frame in gm.orthoplanes_through(zeta, s.spawn(1), Dims(n, j, k), 50):
        assert tau.dim == j
        assert np.all(np.abs(tau.basis @ zeta.basis.T) <= 1e-12)


def test_orthoplanes_of_points_lie_on_zeta():
    zeta = gm.plane_at_distance(4, 2, 1.0)
    for tau, frame in gm.orthoplanes_through(zeta, HaarSampler(3), Dims(4, 0, 2), 5):
        assert tau.dim == 0
        np.testing.assert_allclose(tau.offset, zeta.offset)
        np.testing.assert_array_equal(frame, zeta.basis)


def test_orthoplanes_check_dims():
    zeta = gm.plane_at_distance(4, 2, 1.0)
    with pytest.raises(DimsViolation):
        next(gm.orthoplanes_through(zeta, HaarSampler(), Dims(4, 1, 1), 1))


# }}}

# {{{ fields and transforms


def test_field_basis_independence():
    f = gm.anisotropic_bump(2, [0.3, -0.2, 0.5, 0.1], [1.0, 0.0, 0.5, 0.0])
    s = HaarSampler(41)
    for _ in range(20):
        p, _ = gm.sample_affine_plane(s, 4, 2)
        q = p.with_basis(gm.sample_rotation(s, 2) @ p.basis)
        assert abs(f(p) - f(q)) <= 1e-12


def test_field_dimension_checked():
    f = gm.radial_field(pr.gaussian(), 1)
    with pytest.raises(DimsViolation):
        f(gm.plane_at_distance(4, 2, 1.0))


def test_mixed_transform_gaussian_matches_radial(gauss):
    d = Dims(4, 1, 1)
    est = gm.mixed_transform(gm.radial_field(gauss, 1), gm.plane_at_distance(4, 1, 1.0), d, BUDGET)
    assert within(est, rt.mixed_radial(gauss, d, 1.0))


def test_mixed_transform_of_zero():
    est = gm.mixed_transform(gm.zero_field(1), gm.plane_at_distance(4, 1, 1.0), Dims(4, 1, 1))
    assert est.value == 0.0 and est.stderr == 0.0


def test_mixed_transform_power_example():
    d = Dims(4, 1, 1)
    f = gm.radial_field(pr.power(-2.0), 1)
    est = gm.mixed_transform(f, gm.plane_at_distance(4, 1, 2.0), d, BUDGET)
    assert within(est, PI**2 / 4)


def test_mixed_transform_dual_cauchy_example():
    d = Dims(5, 1, 2)
    phi = gm.radial_field(pr.cauchy(5), 2)
    cj = rt.example_constant("cauchy_dual", d)
    for dist in (0.5, 1.5):
        est = gm.mixed_transform_dual(phi, gm.plane_at_distance(5, 1, dist), d, BUDGET)
        assert within(est, cj / (1 + dist**2))


def test_mixed_transform_dual_power_example():
    d = Dims(4, 1, 1)
    phi = gm.radial_field(pr.power(-2.0), 1)
    est = gm.mixed_transform_dual(phi, gm.plane_at_distance(4, 1, 1.5), d, BUDGET)
    assert within(est, rt.example_constant("power_dual", d, 2.0) / 1.5)


def test_mixed_transform_dual_of_zero():
    est = gm.mixed_transform_dual(gm.zero_field(1), gm.plane_at_distance(4, 1, 1.0), Dims(4, 1, 1))
    assert est.value == 0.0 and est.stderr == 0.0


def test_mixed_transform_rejects_nonexistent():
    f = gm.radial_field(pr.power(-1.0), 1)
    with pytest.raises(ExistenceViolation):
        gm.mixed_transform(f, gm.plane_at_distance(4, 1, 1.0), Dims(4, 1, 1))


def test_mixed_transform_rejects_mismatched_dims(gauss):
    with pytest.raises(DimsViolation):
        gm.mixed_transform(gm.radial_field(gauss, 2), gm.plane_at_distance(4, 1, 1.0),
                           Dims(4, 1, 1))


@pytest.mark.parametrize("dist", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("n,j,k", [(4, 1, 1), (5, 2, 1), (5, 1, 2)])
def test_radial_consistency(gauss, n, j, k, dist):
    d = Dims(n, j, k)
    est = gm.mixed_transform(gm.radial_field(gauss, j), gm.plane_at_distance(n, k, dist), d,
                             MCBudget(n_samples=10_000, seed=7))
    assert within(est, rt.mixed_radial(gauss, d, dist))


def test_rigid_motion_equivariance():
    d = Dims(4, 1, 1)
    s = HaarSampler(51)
    f = gm.anisotropic_bump(1, [0.3, 0.0, -0.4, 0.2], [1.0, 1.0, 0.0, 0.0])
    rot = gm.sample_rotation(s, 4)
    shift = np.array([0.2, -0.1, 0.3, 0.0])
    zeta = gm.plane_at_distance(4, 1, 0.7)
    budget = MCBudget(n_samples=20_000, seed=3)
    a = gm.mixed_transform(f.moved(rot, shift), zeta, d, budget)
    b = gm.mixed_transform(f, zeta.moved(rot, shift), d, MCBudget(n_samples=20_000, seed=4))
    assert abs(a.value - b.value) <= 3 * math.hypot(a.stderr, b.stderr)


def test_target_stderr_grows_sample_count(gauss):
    d = Dims(4, 1, 1)
    b = MCBudget(n_samples=1000, seed=5, target_rel_stderr=0.005, max_samples=64_000)
    est = gm.mixed_transform(gm.radial_field(gauss, 1), gm.plane_at_distance(4, 1, 1.0), d, b)
    assert est.n_samples > 1000 and est.stderr <= 0.005 * abs(est.value)


def test_budget_exhaustion_raises(gauss):
    from mixradon.errors import BudgetExhausted

    b = MCBudget(n_samples=100, seed=5, target_rel_stderr=1e-6, max_samples=400)
    with pytest.raises(BudgetExhausted):
        gm.mixed_transform(gm.radial_field(gauss, 1), gm.plane_at_distance(4, 1, 1.0),
                           Dims(4, 1, 1), b)


def test_estimates_are_seed_deterministic(gauss):
    d = Dims(4, 1, 1)
    f = gm.radial_field(gauss, 1)
    zeta = gm.plane_at_distance(4, 1, 1.0)
    a = gm.mixed_transform(f, zeta, d, MCBudget(n_samples=2000, seed=8))
    b = gm.mixed_transform(f, zeta, d, MCBudget(n_samples=2000, seed=8))
    assert a == b


# }}}


@pytest.mark.parametrize("d", [1, 3, 5])
def test_mixture_proposal_is_normalized(d):
    prop = gm.OffsetProposal(1.0, cusp=min(2.0, d - 0.5), tail_dof=0.8)
    y, w = prop.sample(np.random.default_rng(d), d, 200_000)
    vals = w * np.exp(-np.sum(y * y, axis=1))
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - PI ** (d / 2)) <= 3 * se


def test_mixture_proposal_rejects_nonintegrable_cusp():
    with pytest.raises(ValueError):
        gm.OffsetProposal(1.0, cusp=3.0).sample(np.random.default_rng(0), 3, 10)


def test_cusp_density_integrates_to_one():
    from scipy import integrate

    d, g = 3, 1.5
    f = lambda r: np.exp(gm.cusp_logpdf(np.array([[r, 0.0, 0.0]]), 2.0, g))[0] * 4 * PI * r * r
    assert integrate.quad(f, 0, 2.0)[0] == pytest.approx(1.0, rel=1e-8)
