"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances."""

import math
import time

import numpy as np
import pytest
from conftest import beta_minus, beta_plus, rel_err
from scipy import special

from mixradon import ekfrac as ek
from mixradon import funk_bridge as fb
from mixradon import grassmann as gm
from mixradon import identities as idt
from mixradon import profiles as pr
from mixradon import radial_transforms as rt
from mixradon.radial_transforms import Dims

PI = math.pi
ORDERS = (0.5, 1.0, 1.5)


@pytest.fixture
def verdict(capsys):
    """Print the criterion line even under captured output, then assert it."""
    start = time.perf_counter()

    def emit(num, title, checks, limit=None):
        elapsed = time.perf_counter() - start
        ok = all(good for good, _ in checks)
        if limit is not None and elapsed > limit:
            checks = [*checks, (False, f"runtime {elapsed:.1f}s > {limit:g}s")]
            ok = False
        detail = "; ".join(msg for _, msg in checks)
        line = f"{'PASS' if ok else 'FAIL'} criterion {num:2d} {title} [{elapsed:.1f}s]: {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def test_criterion_01_ek_calibration(verdict):
    t = np.array([0.3, 1.0, 2.5])
    err_p = max(rel_err(ek.ek_integral_plus(pr.power(mu), a, t), beta_plus(mu, a, t))
                for a in ORDERS for mu in (0.0, 1.0, 2.0, 3.0))
    err_m = max(rel_err(ek.ek_integral_minus(pr.power(-lam), a, t), beta_minus(lam, a, t))
                for a in ORDERS for lam in (3.5, 4.0, 5.0, 6.5))
    ts = np.array([0.1, 0.5, 1.0, 2.0, 3.0])
    err_g = max(float(np.max(np.abs(ek.ek_integral_minus(pr.gaussian(), a, ts) - np.exp(-ts**2))))
                for a in ORDERS)
    verdict(1, "EK calibration", [
        (err_p <= 1e-10, f"left powers {err_p:.2e}"),
        (err_m <= 1e-10, f"right powers {err_m:.2e}"),
        (err_g <= 1e-8, f"gaussian fixed point {err_g:.2e}"),
    ], limit=5)


def test_criterion_02_semigroup_and_left_inverse(verdict):
    g = pr.gaussian()
    c = pr.cauchy(8.0)
    t = np.linspace(0.2, 3.0, 8)
    semi = 0.0
    for a in ORDERS:
        for b in ORDERS:
            inner = rt.radial_profile_of(lambda r, b=b: ek.ek_integral_plus(g, b, r),
                                         zero_exponent=-2 * b)
            semi = max(semi, rel_err(ek.ek_integral_plus(inner, a, t),
                                     ek.ek_integral_plus(g, a + b, t)))
            inner = rt.radial_profile_of(lambda r, b=b: ek.ek_integral_minus(c, b, r),
                                         decay_exponent=8.0 - 2 * b)
            semi = max(semi, rel_err(ek.ek_integral_minus(inner, a, t),
                                     ek.ek_integral_minus(c, a + b, t)))
    ts = np.linspace(0.1, 5.0, 30)
    inv = 0.0
    for a in ORDERS:
        phi = pr.materialize(lambda s, a=a: ek.ek_integral_plus(g, a, s), pr.default_grid(6.0),
                             zero_exponent=-2 * a)
        inv = max(inv, float(np.max(np.abs(ek.ek_derivative_plus(phi, a, ts) - np.exp(-ts**2)))))
        psi = pr.closed_form(lambda s, a=a: ek.ek_integral_minus(g, a, s))
        inv = max(inv, float(np.max(np.abs(ek.ek_derivative_minus(psi, a, ts) - np.exp(-ts**2)))))
    verdict(2, "semigroup and left inverse", [
        (semi <= 1e-6, f"semigroup {semi:.2e}"),
        (inv <= 1e-6, f"left inverse {inv:.2e}"),
    ], limit=10)


def test_criterion_03_example_constants(verdict):
    s = np.array([0.5, 1.0, 2.0, 4.0])
    e_pow = rel_err(rt.mixed_radial(pr.power(-2.0), Dims(4, 1, 1), s), PI**2 / 2 / s)
    s2 = np.array([1e-3, 0.5, 1.0, 2.0, 4.0])
    e_cau = rel_err(rt.mixed_radial(pr.cauchy(5), Dims(5, 1, 2), s2), 2 * PI / 3 / (1 + s2**2))
    verdict(3, "example constants", [
        (e_pow <= 1e-6, f"power law {e_pow:.2e}"),
        (e_cau <= 1e-6, f"cauchy {e_cau:.2e}"),
    ])


def test_criterion_04_radial_inversion(verdict):
    d = Dims(5, 2, 1)
    t = np.linspace(0.2, 3.0, 29)
    g = pr.materialize(lambda s: rt.mixed_radial(pr.gaussian(), d, s),
                       pr.default_grid(8.0, r_far=64.0), decay_exponent=d.ell)
    err = rel_err(rt.invert_mixed_radial(g, d, t), np.exp(-t * t))
    verdict(4, "radial inversion", [(err <= 1e-3, f"gaussian round trip {err:.2e}")], limit=30)


def test_criterion_05_fuglede(verdict):
    rep = idt.check_fuglede_mixed(pr.gaussian(), Dims(4, 1, 1))
    degen = max(abs(rt.fuglede_constant(Dims(n, 0, k)) / rt.c_kn(k, n) - 1)
                for n in range(2, 9) for k in range(1, n))
    verdict(5, "Fuglede-type identity", [
        (rep.passed and rep.rel_err <= 1e-4, f"three-way {rep.rel_err:.2e}"),
        (rep.details["swap_rel_err"] <= 1e-4, f"swap {rep.details['swap_rel_err']:.2e}"),
        (abs(rep.details["constant"] / (4 * PI) - 1) <= 1e-14, "constant 4 pi"),
        (degen <= 1e-12, f"point-source constants {degen:.1e}"),
    ])


def test_criterion_06_intertwining(verdict):
    s = np.linspace(0.3, 3.0, 10)
    rep = idt.check_intertwining(pr.gaussian(), Dims(5, 1, 1), 1.0, s=s, tol=1e-4)
    verdict(6, "intertwining", [(rep.passed, f"rel err {rep.rel_err:.2e}")])


def test_criterion_07_monte_carlo_identities(verdict):
    d = Dims(4, 1, 1)
    budget = gm.MCBudget(n_samples=1_000_000)
    f0 = pr.closed_form(lambda t: t**-2.0 * np.exp(-t * t / 4), zero_exponent=2.0)
    f = gm.radial_field(f0, 1)
    phi = gm.radial_field(pr.cauchy(d.n), 1)
    dual = idt.check_duality(f, phi, d, budget)
    weighted = idt.check_weighted_identity("dra2", f, d, budget=budget)
    se = dual.details["lhs_stderr"]
    three_way = abs(dual.lhs - weighted.rhs) <= 3 * se
    rel_se = max(se / abs(dual.lhs), dual.details["rhs_stderr"] / abs(dual.rhs))
    g = pr.gaussian()
    z = []
    for s in (0.25, 1.0, 2.0):
        est = gm.mixed_transform(gm.radial_field(g, 1), gm.plane_at_distance(4, 1, s), d,
                                 gm.MCBudget(n_samples=100_000))
        z.append(abs(est.value - rt.mixed_radial(g, d, s)) / est.stderr)
    verdict(7, "Monte Carlo identities", [
        (dual.passed, f"duality {dual.abs_err:.3g} vs 3 sigma {3 * dual.mc_stderr:.3g}"),
        (weighted.passed, f"weighted {weighted.abs_err:.3g} vs 3 sigma {3 * weighted.mc_stderr:.3g}"),
        (three_way, "three-way agreement"),
        (rel_se <= 0.01, f"relative stderr {rel_se:.2%}"),
        (max(z) <= 3.0, f"radial consistency max z {max(z):.2f}"),
    ], limit=120)


def test_criterion_08_sharp_existence(verdict):
    d = Dims(4, 1, 1)
    p = (d.n - d.j) / d.k
    sharp = rt.existence_check(pr.log_boundary(d.j, d.n, p), d, growth_test=True)
    smaller = [rt.existence_check(pr.log_boundary(d.j, d.n, q), d, growth_test=True)
               for q in (0.9 * p, 0.5 * p)]
    shells = sharp.shell_test
    growing = bool(np.all(np.diff(shells.partial_sums) > 0))
    verdict(8, "sharp existence", [
        (not sharp.exists, "boundary exponent rejected"),
        (all(s.exists for s in smaller), "smaller exponents accepted"),
        (shells.divergent and growing and len(shells.shells) == 8,
         f"8 shells, partial sums {shells.partial_sums[0]:.3g} -> {shells.partial_sums[-1]:.3g},"
         f" rate {shells.power_rate:.3f}, log power {shells.log_power:.2f}"),
        (not any(s.shell_test.divergent for s in smaller), "smaller exponents converge"),
    ])


def test_criterion_09_funk_bridge(verdict):
    rng = np.random.default_rng(9)
    w, c, s = rng.uniform(0.5, 2.0, 3), rng.uniform(-1, 1, (3, 2)), rng.uniform(0.5, 1.2, 3)
    g = fb.gaussian_mixture(w, c, s)
    ang = PI * (np.arange(16) + 0.5) / 16
    A, T = np.meshgrid(ang, np.linspace(-2.5, 2.5, 16), indexing="ij")
    eta = np.stack([np.cos(A), np.sin(A)], axis=-1)
    direct = fb.radon_direct(g, eta, T)
    e_fwd = rel_err(fb.radon_via_funk(g, eta, T), direct)
    x = rng.normal(size=(24, 3))
    th = x / np.linalg.norm(x, axis=1, keepdims=True)
    e_funk = 0.0
    for deg in (0, 2, 4):
        for f in (fb.zonal_harmonic(deg, axis=(0.2, 0.5, 0.8)), fb.sectoral_harmonic(deg)):
            m = special.eval_legendre(deg, 0.0)
            phi = fb.SphereField(lambda y, f=f, m=m: m * f(y))
            e_funk = max(e_funk, float(np.max(np.abs(fb.funk_invert(phi, th) - f(th)))))
    r = np.linspace(0.0, 2.0, 9)
    pts = np.stack([r * 0.6, r * 0.8], axis=-1)
    h = fb.gaussian_mixture_radon([1.0], [[0.0, 0.0]], [1.0])
    e_rt = float(np.max(np.abs(fb.radon_invert(h, pts) - np.exp(-r * r))))
    verdict(9, "Funk bridge", [
        (e_fwd <= 1e-3, f"line integrals 16x16 {e_fwd:.2e}"),
        (e_funk <= 1e-2, f"harmonic inversion {e_funk:.2e}"),
        (e_rt <= 1e-2, f"radon round trip {e_rt:.2e}"),
    ], limit=60)


def test_criterion_10_codim1_pipeline(verdict):
    phi0 = pr.closed_form(lambda s: math.sqrt(PI) * special.i0e(0.5 * s * s), decay_exponent=1.0)
    xi = np.array([1.0, 2.0, 2.0]) / 3.0
    samples = fb.sample_codim1(gm.radial_field(phi0, 1), xi)
    radii = np.array([0.5, 1.0, 1.5])
    ang = np.array([0.0, 0.9, 2.1])
    dirs = np.cos(ang)[:, None] * samples.frame[0] + np.sin(ang)[:, None] * samples.frame[1]
    tau = gm.AffinePlane(xi[None], np.zeros(3))
    rec = fb.invert_codim1(samples, Dims(3, 1, 1), tau, offsets=radii[:, None] * dirs)
    err = rel_err(rec, np.exp(-radii**2))
    verdict(10, "codimension-one pipeline", [(err <= 5e-2, f"rel err {err:.2e}")], limit=300)


def test_criterion_11_range_inversion(verdict):
    g = pr.gaussian()
    a = idt.invert_on_range(g, Dims(4, 1, 1), 0.0)
    b = idt.invert_on_range(g, Dims(5, 1, 1), 1.0)
    errs = []
    for d in (Dims(3, 1, 1), Dims(5, 1, 3), Dims(5, 2, 2)):
        want = math.sqrt(PI) * math.gamma(d.n / 2) / (
            math.gamma((d.n - d.j) / 2) * math.gamma((d.n - d.k) / 2))
        rep = idt.check_gonzalez_consistency(g, d)
        errs.append((rep.passed and abs(rep.rhs / want - 1) <= 1e-6, rep.rel_err))
    verdict(11, "range inversion", [
        (a.passed and a.rel_err <= 1e-3, f"n=4 alpha=0 {a.rel_err:.2e}"),
        (b.passed and b.rel_err <= 1e-3, f"n=5 alpha=1 {b.rel_err:.2e}"),
        (all(ok for ok, _ in errs), "Gonzalez scalar " + ", ".join(f"{e:.1e}" for _, e in errs)),
    ])
