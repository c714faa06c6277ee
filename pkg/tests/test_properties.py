"""Property-based checks of the structural invariants."""

import numpy as np
from conftest import beta_minus, beta_plus, rel_err
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy import special

from mixradon import ekfrac as ek
from mixradon import funk_bridge as fb
from mixradon import grassmann as gm
from mixradon import profiles as pr
from mixradon import radial_transforms as rt
from mixradon.radial_transforms import Dims

settings.register_profile("mixradon", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mixradon")

orders = st.floats(0.1, 2.0)
points = st.floats(0.2, 3.0)


@st.composite
def dims(draw, n_max=6):
    n = draw(st.integers(3, n_max))
    j = draw(st.integers(0, n - 2))
    k = draw(st.integers(1, n - 1 - j))
    return Dims(n, j, k)


@st.composite
def unit_vectors(draw, d):
    v = np.array(draw(st.lists(st.floats(-1, 1), min_size=d, max_size=d)))
    if np.linalg.norm(v) < 1e-3:
        v = np.eye(d)[0]
    return v / np.linalg.norm(v)


# {{{ fractional integrals


@given(alpha=orders, beta=orders, t=points)
def test_left_semigroup(alpha, beta, t):
    g = pr.gaussian()
    inner = rt.radial_profile_of(lambda r: ek.ek_integral_plus(g, beta, r),
                                 zero_exponent=-2 * beta)
    lhs = ek.ek_integral_plus(inner, alpha, t)
    rhs = ek.ek_integral_plus(g, alpha + beta, t)
    assert rel_err(lhs, rhs) <= 1e-8


@given(alpha=orders, beta=orders, t=points)
def test_right_semigroup(alpha, beta, t):
    f = pr.cauchy(8.0)
    inner = rt.radial_profile_of(lambda r: ek.ek_integral_minus(f, beta, r),
                                 decay_exponent=8.0 - 2 * beta)
    lhs = ek.ek_integral_minus(inner, alpha, t)
    rhs = ek.ek_integral_minus(f, alpha + beta, t)
    assert rel_err(lhs, rhs) <= 1e-6


@given(alpha=orders, mu=st.floats(0.0, 3.0), t=points)
def test_left_power_eigenrelation(alpha, mu, t):
    assert rel_err(ek.ek_integral_plus(pr.power(mu), alpha, t), beta_plus(mu, alpha, t)) <= 1e-9


@given(alpha=orders, data=st.data(), t=points)
def test_right_power_eigenrelation(alpha, data, t):
    lam = data.draw(st.floats(2 * alpha + 0.5, 2 * alpha + 4.0))
    got = ek.ek_integral_minus(pr.power(-lam), alpha, t)
    assert rel_err(got, beta_minus(lam, alpha, t)) <= 1e-9


@given(alpha=orders, c=st.floats(0.3, 3.0), t=points)
def test_scaling_covariance(alpha, c, t):
    # I^a [f(r/c)](t) = c^{2a} (I^a f)(t/c)
    for op in (ek.ek_integral_plus, ek.ek_integral_minus):
        lhs = op(pr.gaussian(c), alpha, t)
        rhs = c ** (2 * alpha) * op(pr.gaussian(), alpha, t / c)
        assert rel_err(lhs, rhs) <= 1e-8


# }}}

# {{{ radial mixed transforms


@given(d=dims(), u=st.floats(0.05, 0.95), s=points, c=st.floats(0.3, 3.0))
def test_mixed_homogeneity(d, u, s, c):
    lam = d.k + u * (d.n - d.j - d.k)  # inside the existence window
    f = pr.power(-lam)
    ratio = rt.mixed_radial(f, d, c * s) / rt.mixed_radial(f, d, s)
    assert rel_err(ratio, c ** (d.k - lam)) <= 1e-8


@given(d=dims(), s=points, c=st.floats(0.3, 3.0))
def test_mixed_dilation(d, s, c):
    lhs = rt.mixed_radial(pr.gaussian(c), d, s)
    rhs = c**d.k * rt.mixed_radial(pr.gaussian(), d, s / c)
    assert rel_err(lhs, rhs) <= 1e-8


@given(n=st.integers(3, 7), data=st.data(), s=points)
def test_point_sources_reduce_to_kplane_transforms(n, data, s):
    k = data.draw(st.integers(1, n - 1))
    f = pr.gaussian()
    assert rel_err(rt.mixed_radial(f, Dims(n, 0, k), s), rt.kplane_radial(f, n, k, s)) <= 1e-8
    phi = pr.cauchy(n + 1)
    assert rel_err(rt.mixed_radial_dual(phi, Dims(n, 0, k), s),
                   rt.dual_kplane_radial(phi, n, k, s)) <= 1e-8


# }}}

# {{{ Grassmann sampling


@given(seed=st.integers(0, 2**31), data=st.data())
def test_field_values_are_basis_independent(seed, data):
    rng = np.random.default_rng(seed)
    n = data.draw(st.integers(3, 6))
    dim = data.draw(st.integers(1, n - 1))
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    basis = q[:dim]
    offset = q[dim:].T @ rng.normal(size=n - dim)
    spin, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    f = gm.anisotropic_bump(dim, rng.normal(size=n), rng.normal(size=n))
    a = f(gm.AffinePlane(basis, offset))
    b = f(gm.AffinePlane(spin @ basis, offset))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))


@settings(max_examples=10)
@given(seed=st.integers(0, 2**31))
def test_estimates_are_seed_deterministic(seed):
    f = gm.radial_field(pr.gaussian(), 1)
    zeta = gm.plane_at_distance(4, 1, 0.7)
    budget = gm.MCBudget(n_samples=200, seed=seed)
    a = gm.mixed_transform(f, zeta, Dims(4, 1, 1), budget)
    b = gm.mixed_transform(f, zeta, Dims(4, 1, 1), budget)
    assert a == b


# }}}

# {{{ sphere and lines


@given(eta=unit_vectors(2), t=st.floats(-5, 5))
def test_canonicalization_invariance(eta, t):
    a = fb.HyperplaneCoords(eta, t)
    b = fb.HyperplaneCoords(-eta, -t)
    assert a == b
    h = fb.gaussian_mixture_radon([1.0, 0.5], [[0.3, -0.2], [-1.0, 0.4]], [1.0, 0.7])
    assert rel_err(h(a.eta, np.asarray(a.t)), h(eta, np.asarray(t))) <= 1e-14


@settings(max_examples=15)
@given(degree=st.sampled_from([0, 2, 4, 6]), axis=unit_vectors(3), th=unit_vectors(3))
def test_funk_eigenstructure(degree, axis, th):
    f = fb.zonal_harmonic(degree, axis=axis)
    got = fb.funk_transform(f, th)
    assert abs(got - special.eval_legendre(degree, 0.0) * f(th)) <= 1e-8


# }}}
