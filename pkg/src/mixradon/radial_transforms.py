"""Closed-form machinery for radial functions.

Radial k-plane transforms and their duals, the radial Riesz potential and
its inverse, the mixed transforms ``I_{j,k}`` / ``I*_{j,k}`` and their
inversion, all written as chains of Erdélyi--Kober operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from mixradon import ekfrac
from mixradon.errors import (
    DimsViolation,
    DivergentAtZero,
    ExistenceViolation,
    ForbiddenOrder,
    OutOfRangeLambda,
)
from mixradon.profiles import RadialProfile, default_grid, materialize

G = math.gamma


@dataclass(frozen=True)
class Dims:
    """Ambient dimension ``n`` and plane dimensions ``j`` (source), ``k`` (target)."""

    n: int
    j: int
    k: int

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DimsViolation(f"n must be >= 2, got {self.n}")
        if self.j < 0 or self.k < 0:
            raise DimsViolation(f"plane dimensions must be >= 0: j={self.j}, k={self.k}")
        if self.j + self.k >= self.n:
            raise DimsViolation(f"need j + k < n, got j={self.j}, k={self.k}, n={self.n}")

    @property
    def ell(self) -> int:
        return self.n - self.j - self.k

    def swapped(self) -> Dims:
        return Dims(self.n, self.k, self.j)


# {{{ constants


@lru_cache(maxsize=None)
def sphere_area(m: int) -> float:
    """Area of the unit sphere ``S^m`` in ``R^(m+1)``."""
    return 2 * math.pi ** ((m + 1) / 2) / G((m + 1) / 2)


def c1(d: Dims) -> float:
    """Prefactor of the double-integral form of ``I_{j,k}``."""
    return (
        sphere_area(d.j - 1) * sphere_area(d.k - 1) * sphere_area(d.ell - 1)
        / sphere_area(d.n - d.k - 1)
    )


def c1_tilde(d: Dims) -> float:
    return math.pi ** (d.k / 2) * G((d.n - d.k) / 2) / G(d.ell / 2)


def c2(d: Dims) -> float:
    return c1(d.swapped())


def c2_tilde(d: Dims) -> float:
    return c1_tilde(d.swapped())


def c_kn(k: int, n: int) -> float:
    """Constant of ``R_k^* R_k f = c_{k,n} I_n^k f``."""
    return 2**k * math.pi ** (k / 2) * G(n / 2) / G((n - k) / 2)


def riesz_gamma(n: int, alpha: float) -> float:
    """Normalising constant ``gamma_n(alpha)`` of the Riesz potential."""
    _check_riesz_order(n, alpha)
    return 2**alpha * math.pi ** (n / 2) * G(alpha / 2) / G((n - alpha) / 2)


def fuglede_constant(d: Dims) -> float:
    """Constant ``c`` of ``R_k^* R_{j,k} R_j h = c I_n^{j+k} h``."""
    s = d.j + d.k
    return 2**s * math.pi ** (s / 2) * G(d.n / 2) / G(d.ell / 2)


def gonzalez_constant(d: Dims) -> float:
    return 2 ** (d.n - 1) * math.pi ** ((d.n - 3) / 2) * G((d.j + 1) / 2) * G((d.k + 1) / 2)


def gonzalez_ratio(d: Dims) -> float:
    """``sqrt(pi) Gamma(n/2) / (Gamma((n-j)/2) Gamma((n-k)/2))``."""
    return math.sqrt(math.pi) * G(d.n / 2) / (G((d.n - d.j) / 2) * G((d.n - d.k) / 2))


def example_constant(which: str, dims: Dims, lam: float | None = None) -> float:
    """Exact constants of the closed-form power and Cauchy examples.

    ``power_fwd``: ``R_{j,k} |t|^-lam = c_{j,k} |z|^(k-lam)`` for ``k < lam < n-j``;
    ``power_dual``: ``R*_{k,j} |z|^-lam = c_{k,j} |t|^(j-lam)`` for ``j < lam < n-k``;
    ``cauchy_fwd`` / ``cauchy_dual``: ``c_k`` / ``c_j`` for ``(1+|.|^2)^(-n/2)``.
    """
    n, j, k, ell = dims.n, dims.j, dims.k, dims.ell
    if which in ("power_fwd", "power_dual"):
        if lam is None:
            raise OutOfRangeLambda(f"{which} needs lambda")
        a, b = (j, k) if which == "power_fwd" else (k, j)
        if not b < lam < n - a:
            raise OutOfRangeLambda(f"{which}: need {b} < lambda < {n - a}, got {lam}")
        return (
            math.pi ** (b / 2) * G((n - b) / 2) * G((lam - b) / 2) * G((n - a - lam) / 2)
            / (G(ell / 2) * G(lam / 2) * G((n - lam) / 2))
        )
    if which == "cauchy_fwd":
        return math.pi ** (k / 2) * G((n - k) / 2) / G(n / 2)
    if which == "cauchy_dual":
        return math.pi ** (j / 2) * G((n - j) / 2) / G(n / 2)
    raise ValueError(f"unknown example constant: {which!r}")


@dataclass(frozen=True)
class GammaConstants:
    """All named constants for a fixed ``Dims``."""

    dims: Dims

    def as_dict(self, lam: float | None = None) -> dict[str, float]:
        d = self.dims
        out = {
            f"sigma_{d.n - 1}": sphere_area(d.n - 1),
            "c1_tilde": c1_tilde(d),
            "c2_tilde": c2_tilde(d),
            "c_k": example_constant("cauchy_fwd", d),
            "c_j": example_constant("cauchy_dual", d),
            "fuglede": fuglede_constant(d),
            "c_kn": c_kn(d.k, d.n),
            "c_jn": c_kn(d.j, d.n),
            "gonzalez": gonzalez_constant(d),
        }
        if d.j > 0 and d.k > 0:
            out["c1"] = c1(d)
            out["c2"] = c2(d)
        if lam is not None:
            for which, key in (("power_fwd", "c_jk"), ("power_dual", "c_kj")):
                try:
                    out[key] = example_constant(which, d, lam)
                except OutOfRangeLambda:
                    pass
        return out


# }}}

# {{{ existence


@dataclass(frozen=True)
class ExistenceDiagnostic:
    exists: bool
    local_ok: bool
    tail_ok: bool
    lp_bound: float
    shell_test: ekfrac.ShellTest | None = None
    note: str = ""


def existence_check(f_meta, dims: Dims, direction: str = "forward", *,
                    growth_test: bool = False) -> ExistenceDiagnostic:
    """Existence of ``R_{j,k} f`` (forward) or ``R*_{k,j} phi`` (dual) for radial data.

    ``f_meta`` is anything with ``zero_exponent``, ``decay_exponent`` and
    ``log_factor`` attributes.  With ``growth_test`` (and a callable
    ``f_meta``) a dyadic-shell divergence test of the tail integral is run;
    when it disagrees with the metadata, the shell test wins.
    """
    if direction == "forward":
        a, b = dims.j, dims.k
    elif direction == "dual":
        a, b = dims.k, dims.j
    else:
        raise ValueError(f"direction must be 'forward' or 'dual': {direction!r}")
    n = dims.n
    if getattr(f_meta, "is_zero", False):
        return ExistenceDiagnostic(True, True, True, _lp(n, a, b))
    lam0 = f_meta.zero_exponent or 0.0
    local_ok = lam0 < n - a
    tail_ok = b == 0 or ekfrac.metadata_tail_ok(f_meta.decay_exponent, b)
    shells = None
    note = ""
    if growth_test and b > 0 and callable(f_meta):
        shells = ekfrac.dyadic_shell_test(f_meta, b - 1)
        if (not shells.divergent) != tail_ok:
            note = "shell test overrides the decay metadata"
        tail_ok = not shells.divergent
    return ExistenceDiagnostic(local_ok and tail_ok, local_ok, tail_ok, _lp(n, a, b), shells, note)


def _lp(n: int, a: int, b: int) -> float:
    return math.inf if b == 0 else (n - a) / b


def _require(f0: RadialProfile, dims: Dims, direction: str) -> None:
    diag = existence_check(f0, dims, direction)
    if not diag.exists:
        what = "local integrability at 0" if not diag.local_ok else "tail integrability"
        raise ExistenceViolation(f"{direction} mixed transform does not exist: {what} fails")


# }}}

# {{{ chains


def _inner_minus(f0: RadialProfile, a: float, r_max: float) -> RadialProfile:
    """Tabulate ``I^a_{-,2} f0`` on ``(0, r_max]``."""
    if a == 0 or f0.is_zero:
        return f0
    lam0 = f0.zero_exponent or 0.0
    grid = default_grid(max(r_max, 0.2), h=min(0.01, r_max / 64))
    return materialize(
        lambda r: ekfrac.ek_integral_minus(f0, a, r),
        grid,
        zero_exponent=max(lam0 - 2 * a, 0.0),
        decay_exponent=f0.decay_exponent - 2 * a,
        name=f"I-^{a:g}[{f0.name}]",
    )


def plus_weighted_minus(f0: RadialProfile, a_minus: float, power: float, a_plus: float, s):
    """``I^{a_plus}_{+,2} [ r**power * I^{a_minus}_{-,2} f0 ](s)``.

    The inner integral is materialised on a grid before the outer one is applied.
    """
    s = np.asarray(s, dtype=float)
    if np.any(~(s > 0)):
        from mixradon.errors import NonPositivePoint

        raise NonPositivePoint("evaluation points must be positive")
    if f0.is_zero:
        return np.zeros(s.shape) if s.ndim else 0.0
    inner = _inner_minus(f0, a_minus, float(np.max(s)))
    return ekfrac.ek_integral_plus(inner.times_power(power), a_plus, s)


def minus_deriv_weighted_plus_deriv(g: RadialProfile, pre: float, a_plus: float,
                                    mid: float, a_minus: float, t, *, h_max: float = 0.02):
    """``D^{a_minus}_{-,2} [ r**mid * D^{a_plus}_{+,2} [ s**pre g ] ](t)``.

    For a fractional ``a_minus`` the inner derivative is tabulated on a grid
    reaching far into the tail, since the outer operator integrates over
    ``(t, inf)``; otherwise it is evaluated pointwise.
    """
    t = np.asarray(t, dtype=float)
    if g.is_zero:
        return np.zeros(t.shape) if t.ndim else 0.0
    u = g.times_power(pre)
    lam_u0 = u.zero_exponent or 0.0
    inner_zero = lam_u0 + 2 * a_plus
    inner_decay = u.decay_exponent + 2 * a_plus

    def inner_fn(r):
        return ekfrac.ek_derivative_plus(u, a_plus, r, h_max=h_max)

    _, a0 = ekfrac._split_order(a_minus)
    if a0 == 0:
        inner = RadialProfile(
            kind="closed_form", func=inner_fn, zero_exponent=inner_zero,
            decay_exponent=inner_decay,
        )
    else:
        tmin, tmax = float(np.min(t)), float(np.max(t))
        r_lo = 0.8 * tmin
        r_hi = max(1.5 * tmax, 6.0)
        grid = default_grid(r_hi, r_min=r_lo, h=0.01, r_far=64.0)
        inner = materialize(inner_fn, grid, zero_exponent=inner_zero, decay_exponent=inner_decay)
    return ekfrac.ek_derivative_minus(inner.times_power(mid), a_minus, t, h_max=h_max)


# }}}

# {{{ transforms


def kplane_radial(f0: RadialProfile, n: int, k: int, s):
    """Radial profile of the k-plane transform ``R_k f`` at distance ``s``."""
    if not 0 <= k < n:
        raise DimsViolation(f"need 0 <= k < n, got k={k}, n={n}")
    if k == 0:
        return f0(s)
    return math.pi ** (k / 2) * ekfrac.ek_integral_minus(f0, k / 2, s)


def dual_kplane_radial(phi0: RadialProfile, n: int, k: int, r):
    """Radial profile of the dual k-plane transform ``R_k^* phi`` at ``|x| = r``."""
    if not 0 <= k < n:
        raise DimsViolation(f"need 0 <= k < n, got k={k}, n={n}")
    if k == 0:
        return phi0(r)
    lam0 = phi0.zero_exponent or 0.0
    if lam0 >= n - k:
        raise DivergentAtZero(f"s^(n-k-1) phi0 is not integrable at 0 (zero_exponent={lam0})")
    r = np.asarray(r, dtype=float)
    val = ekfrac.ek_integral_plus(phi0.times_power(n - k - 2), k / 2, r)
    return G(n / 2) / G((n - k) / 2) * r ** (2 - n) * val


def mixed_radial(f0: RadialProfile, dims: Dims, s):
    """Radial profile ``I_{j,k} f0`` of ``R_{j,k} f`` for ``f(t) = f0(|t|)``."""
    _require(f0, dims, "forward")
    s = np.asarray(s, dtype=float)
    val = plus_weighted_minus(f0, dims.k / 2, dims.ell - 2, dims.j / 2, s)
    return c1_tilde(dims) * s ** (dims.k + 2 - dims.n) * val


def mixed_radial_dual(phi0: RadialProfile, dims: Dims, t):
    """Radial profile ``I*_{j,k} phi0`` of the dual transform ``R*_{k,j} phi``."""
    _require(phi0, dims, "dual")
    return mixed_radial(phi0, dims.swapped(), t)


def _check_riesz_order(n: int, alpha: float) -> None:
    if alpha >= n and (alpha - n) % 2 == 0:
        raise ForbiddenOrder(f"Riesz order alpha={alpha} is excluded for n={n}")
    if not 0 < alpha < n:
        raise ExistenceViolation(f"need 0 < alpha < n for the Riesz potential, got {alpha}")


def riesz_radial(h0: RadialProfile, n: int, alpha: float, r):
    """Radial profile of the Riesz potential ``I_n^alpha h`` at ``|x| = r``."""
    _check_riesz_order(n, alpha)
    if not h0.is_zero and not ekfrac.metadata_tail_ok(h0.decay_exponent, alpha):
        raise ExistenceViolation(f"profile decays too slowly for I_{n}^{alpha}")
    r = np.asarray(r, dtype=float)
    val = plus_weighted_minus(h0, alpha / 2, n - alpha - 2, alpha / 2, r)
    return 2.0 ** (-alpha) * r ** (2 - n) * val


def riesz_derivative_radial(F0: RadialProfile, n: int, alpha: float, r, *,
                            h_max: float = 0.02):
    """Radial Riesz derivative ``D_n^alpha`` (left inverse of :func:`riesz_radial`).

    ``h_max`` caps the finite-difference step in ``y = r^2``.
    """
    _check_riesz_order(n, alpha)
    val = minus_deriv_weighted_plus_deriv(F0, n - 2, alpha / 2, alpha + 2 - n, alpha / 2, r,
                                          h_max=h_max)
    return 2.0**alpha * val


def invert_mixed_radial(g: RadialProfile, dims: Dims, t, *, h_max: float = 0.02):
    """Recover ``f0`` from ``g = I_{j,k} f0``."""
    n, j, k = dims.n, dims.j, dims.k
    val = minus_deriv_weighted_plus_deriv(g, n - k - 2, j / 2, 2 - n + j + k, k / 2, t,
                                          h_max=h_max)
    return val / c1_tilde(dims)


# }}}


def radial_profile_of(fn, *, zero_exponent=0.0, decay_exponent=math.inf, name="",
                      grid=None) -> RadialProfile:
    """Wrap a vectorised radial evaluator as a profile, tabulating it when ``grid`` is given."""
    if grid is None:
        return RadialProfile(kind="closed_form", func=fn, zero_exponent=zero_exponent,
                             decay_exponent=decay_exponent, name=name)
    return materialize(fn, grid, zero_exponent=zero_exponent, decay_exponent=decay_exponent,
                       name=name)
