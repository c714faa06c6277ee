"""Funk transform on the 2-sphere and the projective bridge to Radon transforms.

Hyperplanes of the plane (lines) are written ``{x : x . eta = t}`` with the
identification ``(-eta, -t) == (eta, t)``.  The hyperplane Radon transform,
its dual and their inverses factor through the Funk transform on S^2 via the
pointwise operators ``A, B, A_*, B_*``.  The last part of the module chains
the two inversions into the reconstruction of a function on lines of R^3
from its mixed line-to-line transform.

Every evaluator is vectorised over leading axes.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from mixradon.errors import (
    ClassViolation,
    DimsViolation,
    ExistenceViolation,
    ExtrapolationDiverged,
    InterpolationGap,
    OddField,
    PoleSingularity,
)
from mixradon.grassmann import AffinePlane, GrassmannField, complement_frame
from mixradon.radial_transforms import Dims

log = logging.getLogger(__name__)

SIGMA1 = 2.0 * math.pi  # length of the unit circle
LEVELS = tuple(range(3, 9))  # t_m = 1 - 2**-m
BAND = 1e-3  # band around the singular set of A^{-1}, A_*^{-1} filled from its edge
PARITY_TOL = 1e-12
EQUATOR_GAP = 1e-7  # the equatorial sample row sits at |y| = tan(pi/2 - gap)


# {{{ fields


@dataclass(frozen=True)
class SphereField:
    """A function on S^2; ``func`` maps points ``(..., 3)`` to values ``(...)``."""

    func: Callable[[np.ndarray], np.ndarray]
    even: bool = True
    name: str = ""

    n = 2

    def __call__(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return np.broadcast_to(np.asarray(self.func(theta), dtype=float), theta.shape[:-1])

    def check_parity(self, probes: int = 32, seed: int = 0) -> None:
        """Raise :class:`OddField` unless ``f(-theta) = f(theta)`` on random probes."""
        if not self.even:
            raise OddField(f"field {self.name or '<anonymous>'} is not declared even")
        x = np.random.default_rng(seed).standard_normal((probes, 3))
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
        a, b = self(x), self(-x)
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - b)) > PARITY_TOL * scale:
            raise OddField(f"field {self.name or '<anonymous>'} fails the parity probe")


def zonal_harmonic(degree: int, axis=(0.0, 0.0, 1.0), scale: float = 1.0) -> SphereField:
    """``scale * P_degree(theta . axis)``, a spherical harmonic of the given degree."""
    from scipy.special import eval_legendre

    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return SphereField(lambda th: scale * eval_legendre(degree, th @ axis),
                       even=degree % 2 == 0, name=f"P{degree}")


def sectoral_harmonic(degree: int) -> SphereField:
    """``Re (theta_1 + i theta_2)**degree``, a non-zonal harmonic of the given degree."""

    def f(th):
        return np.real((th[..., 0] + 1j * th[..., 1]) ** degree)

    return SphereField(f, even=degree % 2 == 0, name=f"sect{degree}")


def canonicalize(eta, t):
    """Representative of ``(eta, t)`` whose first nonzero coordinate of ``eta`` is positive."""
    eta = np.asarray(eta, dtype=float)
    t = np.asarray(t, dtype=float)
    first = np.where(eta[..., 0] != 0.0, eta[..., 0], eta[..., 1])
    sgn = np.where(first < 0.0, -1.0, 1.0)
    return eta * sgn[..., None], t * sgn


@dataclass(frozen=True)
class HyperplaneCoords:
    """The hyperplane ``{x : x . eta = t}``, stored in canonical form."""

    eta: np.ndarray
    t: float

    def __post_init__(self) -> None:
        eta = np.asarray(self.eta, dtype=float).reshape(-1)
        norm = np.linalg.norm(eta)
        if norm == 0.0:
            raise ValueError("eta must be nonzero")
        eta, t = canonicalize(eta / norm, float(self.t))
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "t", float(t))

    @classmethod
    def from_angle(cls, angle: float, t: float) -> HyperplaneCoords:
        return cls(np.array([math.cos(angle), math.sin(angle)]), t)

    @property
    def n(self) -> int:
        return self.eta.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, HyperplaneCoords):
            return NotImplemented
        return bool(np.allclose(self.eta, other.eta, atol=1e-14) and abs(self.t - other.t) <= 1e-14)

    __hash__ = None


@dataclass(frozen=True)
class PlaneFunction:
    """A function on R^2; ``func`` maps points ``(..., 2)`` to values."""

    func: Callable[[np.ndarray], np.ndarray]
    decay_exponent: float = math.inf
    name: str = ""

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape[:-1])


@dataclass(frozen=True)
class HyperplaneField:
    """A function on lines of R^2, evaluated on the canonical representative."""

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    decay_exponent: float = math.inf
    name: str = ""

    def __call__(self, eta, t) -> np.ndarray:
        eta, t = canonicalize(eta, t)
        shape = np.broadcast_shapes(eta.shape[:-1], t.shape)
        return np.broadcast_to(np.asarray(self.func(eta, t), dtype=float), shape)

    def at(self, tau: HyperplaneCoords) -> float:
        return float(self(tau.eta, tau.t))


def gaussian_mixture(weights, centers, widths) -> PlaneFunction:
    """``sum_i w_i exp(-|x - c_i|^2 / s_i^2)`` on R^2."""
    w = np.asarray(weights, dtype=float)
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    s = np.asarray(widths, dtype=float)

    def f(x):
        d2 = np.sum((x[..., None, :] - c) ** 2, axis=-1)
        return np.sum(w * np.exp(-d2 / s**2), axis=-1)

    return PlaneFunction(f, name="gaussian_mixture")


def gaussian_mixture_radon(weights, centers, widths) -> HyperplaneField:
    """Closed-form line integrals of :func:`gaussian_mixture`."""
    w = np.asarray(weights, dtype=float)
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    s = np.asarray(widths, dtype=float)

    def h(eta, t):
        p = eta @ c.T
        return np.sum(w * math.sqrt(math.pi) * s * np.exp(-((t[..., None] - p) / s) ** 2), axis=-1)

    return HyperplaneField(h, name="gaussian_mixture_radon")


# }}}


# {{{ Funk transform and its inverse


def _circle_frames(theta: np.ndarray):
    """Orthonormal ``e1, e2`` spanning ``theta^perp``; ``e1`` is horizontal where possible."""
    e3 = np.array([0.0, 0.0, 1.0])
    e1 = np.cross(theta, e3)
    norm = np.linalg.norm(e1, axis=-1, keepdims=True)
    polar = norm[..., 0] < 1e-12
    e1 = np.where(polar[..., None], np.array([1.0, 0.0, 0.0]), e1 / np.where(norm > 0, norm, 1.0))
    e2 = np.cross(theta, e1)
    return e1, e2


def _unit(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    norm = np.linalg.norm(theta, axis=-1, keepdims=True)
    if np.any(np.abs(norm - 1.0) > 1e-10):
        raise ValueError("theta must be a unit vector")
    return theta / norm


def _circle_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    a = 2.0 * math.pi * (np.arange(m) + 0.5) / m
    return np.cos(a), np.sin(a)


def slice_means(phi: SphereField, theta: np.ndarray, beta: np.ndarray, m: int,
                chunk: int = 2_000_000) -> np.ndarray:
    """Means of ``phi`` over the circles at polar angle ``beta`` around ``theta``.

    ``theta`` has shape ``(P, 3)`` and ``beta`` shape ``(P, B)``; the result has shape ``(P, B)``.
    The uniform rule on ``m`` half-shifted nodes never hits the horizontal
    directions of the frame, where the operators B and A_* are singular.
    """
    e1, e2 = _circle_frames(theta)
    ca, sa = _circle_nodes(m)
    sig = ca[:, None] * e1[:, None, :] + sa[:, None] * e2[:, None, :]  # (P, m, 3)
    cb, sb = np.cos(beta), np.sin(beta)
    out = np.empty(beta.shape)
    rows = max(1, chunk // max(1, m * beta.shape[1]))
    for lo in range(0, theta.shape[0], rows):
        sl = slice(lo, lo + rows)
        pts = (cb[sl, :, None, None] * theta[sl, None, None, :]
               + sb[sl, :, None, None] * sig[sl, None, :, :])
        out[sl] = phi(pts).mean(axis=-1)
    return out


def funk_transform(f: SphereField, theta, quad_order: int = 64) -> np.ndarray | float:
    """Mean of ``f`` over the great circle ``S^2 cap theta^perp`` (trapezoid rule)."""
    f.check_parity()
    theta = _unit(theta)
    flat = theta.reshape(-1, 3)
    out = slice_means(f, flat, np.full((flat.shape[0], 1), 0.5 * math.pi), quad_order)[:, 0]
    out = out.reshape(theta.shape[:-1])
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SliceAverage:
    """``Phi_theta(s)``: mean of ``phi`` over the circle ``s sigma + sqrt(1-s^2) theta``."""

    theta: np.ndarray
    s: np.ndarray
    values: np.ndarray


def slice_average(phi: SphereField, theta, s, quad_order: int = 64) -> SliceAverage:
    theta = _unit(theta).reshape(3)
    s = np.asarray(s, dtype=float).reshape(-1)
    if np.any((s < 0) | (s >= 1)):
        raise ValueError("slice radii must lie in [0, 1)")
    vals = slice_means(phi, theta[None], np.arcsin(s)[None], quad_order)[0]
    return SliceAverage(theta, s, vals)


def richardson(seq: np.ndarray) -> np.ndarray:
    """Richardson table for a sequence at step ratios 2 with error ``sum_p a_p h^p``.

    ``seq`` has shape ``(L, ...)``; row ``p`` of the result eliminates ``h^1 .. h^p``.
    """
    rows = [np.asarray(seq, dtype=float)]
    for p in range(1, len(seq)):
        prev = rows[-1]
        rows.append((2.0**p * prev[1:] - prev[:-1]) / (2.0**p - 1.0))
    return rows


@dataclass(frozen=True)
class FunkInversion:
    """Raw limit sequence ``G'(t_m)`` and its extrapolation."""

    t: np.ndarray
    sequence: np.ndarray
    value: np.ndarray
    residual: np.ndarray


def _abel_derivative(phi, theta, t, quad_order, abel_order, h):
    """``d/dt t int_0^{pi/2} Phi(t sin psi) sin psi dpsi`` for every ``theta`` and ``t``."""
    x, w = np.polynomial.legendre.leggauss(abel_order)
    psi = 0.25 * math.pi * (x + 1.0)
    w = 0.25 * math.pi * w
    s = t[:, None] * np.sin(psi)[None, :]  # (T, Q)
    beta = np.arcsin(s).reshape(-1)
    shifts = np.array([0.0, -2.0, -1.0, 1.0, 2.0]) * h
    b = (beta[None, :] + shifts[:, None]).reshape(-1)
    P = theta.shape[0]
    m = slice_means(phi, theta, np.broadcast_to(b, (P, b.size)), quad_order)
    m = m.reshape(P, 5, t.size, abel_order)
    mb = (m[:, 1] - 8.0 * m[:, 2] + 8.0 * m[:, 3] - m[:, 4]) / (12.0 * h)
    dphi = mb / np.sqrt(1.0 - s**2)
    integrand = (m[:, 0] + s * dphi) * np.sin(psi)
    return integrand @ w  # (P, T)


def funk_invert_table(phi: SphereField, theta, *, quad_order: int = 64, abel_order: int = 48,
                      h: float = 1e-3, levels=LEVELS, chunk: int = 64) -> FunkInversion:
    """Reconstruct ``f`` from ``phi = F f`` at ``theta``, keeping the limit sequence."""
    phi.check_parity()
    theta = _unit(theta)
    shape = theta.shape[:-1]
    flat = theta.reshape(-1, 3)
    t = 1.0 - 2.0 ** -np.asarray(levels, dtype=float)
    seq = np.empty((flat.shape[0], t.size))
    for lo in range(0, flat.shape[0], chunk):
        seq[lo:lo + chunk] = _abel_derivative(phi, flat[lo:lo + chunk], t, quad_order,
                                              abel_order, h)
    table = richardson(seq.T)
    value = table[-1][0]
    residual = np.abs(table[-1][0] - table[-2][-1])
    return FunkInversion(t, seq.reshape(shape + (t.size,)), value.reshape(shape),
                         residual.reshape(shape))


def funk_invert(phi: SphereField, theta, *, quad_order: int = 64, abel_order: int = 48,
                h: float = 1e-3, levels=LEVELS, diverge_tol: float = 1e-2):
    """Inverse Funk transform through the Abel-type limit formula and Richardson extrapolation.

    Raises :class:`ExtrapolationDiverged` when the last increment of the raw
    sequence both grows and exceeds ``diverge_tol``, or when the last two
    extrapolants disagree by more than ``diverge_tol``, relative to the field scale.
    """
    res = funk_invert_table(phi, theta, quad_order=quad_order, abel_order=abel_order, h=h,
                            levels=levels)
    seq = res.sequence.reshape(-1, res.t.size)
    scale = max(1.0, float(np.max(np.abs(seq))))
    d = np.abs(np.diff(seq, axis=-1))
    # growth alone is not enough: near-cancelling error terms make small increments wobble
    growing = (d[:, -1] > d[:, -2]) & (d[:, -1] > diverge_tol * scale)
    if np.any(growing) or np.any(res.residual > diverge_tol * scale):
        raise ExtrapolationDiverged(
            f"limit sequence is not Cauchy (max residual {np.max(res.residual):.3g})")
    log.debug("funk_invert residual %.3g", float(np.max(res.residual, initial=0.0)))
    v = res.value
    return float(v) if v.ndim == 0 else v


# }}}


# {{{ projective operators


def mu(x) -> np.ndarray:
    """``x -> (x, 1) / |(x, 1)|``, the projection of R^2 onto the upper hemisphere."""
    x = np.asarray(x, dtype=float)
    p = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def mu_tilde(eta, t) -> np.ndarray:
    """Unit normal ``(-eta, t) / sqrt(1 + t^2)`` of the subspace spanned by the lifted line."""
    eta = np.asarray(eta, dtype=float)
    t = np.asarray(t, dtype=float)
    p = np.concatenate([-eta, t[..., None] * np.ones(eta.shape[:-1] + (1,))], axis=-1)
    return p / np.sqrt(1.0 + t**2)[..., None]


def op_B(g: PlaneFunction) -> SphereField:
    """``(Bg)(theta) = |theta_3|^{-2} g(theta' / theta_3)``."""

    def f(th):
        th3 = th[..., 2]
        if np.any(th3 == 0.0):
            raise PoleSingularity("B evaluated on the equator theta_3 = 0")
        return g(th[..., :2] / th3[..., None]) / th3**2

    return SphereField(f, name=f"B[{g.name}]")


def op_A_inv(h: HyperplaneField) -> SphereField:
    """``(A^{-1}h)(omega) = 2 / (sigma_1 |omega'|) h(-omega'/|omega'|, omega_3/|omega'|)``.

    Inside the polar band ``|omega'| < BAND`` the value on the band edge is used.
    """

    def f(om):
        r = np.linalg.norm(om[..., :2], axis=-1)
        e = np.where(r[..., None] > 0.0, om[..., :2] / np.where(r > 0.0, r, 1.0)[..., None],
                     np.array([1.0, 0.0]))
        rs = np.maximum(r, BAND)
        z = np.sign(om[..., 2]) * np.sqrt(1.0 - rs**2)
        return 2.0 / (SIGMA1 * rs) * h(-e, z / rs)

    return SphereField(f, name=f"Ainv[{h.name}]")


def op_B_star(h: HyperplaneField) -> SphereField:
    """``(B_* h)(theta) = |theta'|^{-2} h(theta'/|theta'|, theta_3/|theta'|)``."""

    def f(th):
        r = np.linalg.norm(th[..., :2], axis=-1)
        if np.any(r == 0.0):
            raise PoleSingularity("B_* evaluated at a pole theta' = 0")
        return h(th[..., :2] / r[..., None], th[..., 2] / r) / r**2

    return SphereField(f, name=f"Bstar[{h.name}]")


def op_A_star_inv(g: PlaneFunction) -> SphereField:
    """``(A_*^{-1} g)(theta) = |theta_3|^{-1} g(-theta'/theta_3)``.

    Inside the equatorial band ``|theta_3| < BAND`` the value on the band edge is used.
    """

    def f(th):
        th = np.where(th[..., 2:3] < 0.0, -th, th)
        z = np.maximum(th[..., 2], BAND)
        r = np.linalg.norm(th[..., :2], axis=-1)
        scale = np.where(r > 0.0, np.sqrt(1.0 - z**2) / np.where(r > 0.0, r, 1.0), 0.0)
        return g(-th[..., :2] * (scale / z)[..., None]) / z

    return SphereField(f, name=f"Astarinv[{g.name}]")


def _require_radon(g: PlaneFunction) -> None:
    if not g.decay_exponent > 1.0:
        raise ExistenceViolation(
            f"integral of |g| / sqrt(1 + |x|^2) diverges for decay exponent {g.decay_exponent}")


def _require_dual(h: HyperplaneField) -> None:
    if not h.decay_exponent > 0.0:
        raise ExistenceViolation(
            f"integral of |h| / sqrt(1 + |t|^2) diverges for decay exponent {h.decay_exponent}")


def _line_args(tau, t=None):
    if isinstance(tau, HyperplaneCoords):
        return tau.eta, np.asarray(tau.t)
    eta, t = canonicalize(tau, t)
    return eta / np.linalg.norm(eta, axis=-1, keepdims=True), t


def _scalar(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def radon_via_funk(g: PlaneFunction, tau, t=None, *, quad_order: int = 128):
    """Line integrals ``(Rg)(eta, t)`` computed as ``A F B g``.

    ``tau`` is a :class:`HyperplaneCoords` or an array of normals with ``t`` given separately.
    """
    _require_radon(g)
    eta, t = _line_args(tau, t)
    om = mu_tilde(eta, t)
    vals = funk_transform(op_B(g), om, quad_order)
    return _scalar(SIGMA1 / (2.0 * np.sqrt(1.0 + t**2)) * vals)


def radon_invert(h: HyperplaneField, x, **funk_kw):
    """Recover ``g(x)`` from its line integrals ``h`` as ``B^{-1} F^{-1} A^{-1} h``."""
    x = np.asarray(x, dtype=float)
    vals = funk_invert(op_A_inv(h), mu(x), **funk_kw)
    return _scalar(vals / (1.0 + np.sum(x**2, axis=-1)))


def dual_radon_via_funk(h: HyperplaneField, x, *, quad_order: int = 128):
    """Mean of ``h`` over the lines through ``x``, computed as ``A_* F B_* h``."""
    _require_dual(h)
    x = np.asarray(x, dtype=float)
    w = np.sqrt(1.0 + np.sum(x**2, axis=-1))
    om = mu(-x)
    vals = funk_transform(op_B_star(h), om, quad_order)
    return _scalar(vals / w)


def dual_radon_invert(g: PlaneFunction, tau, t=None, **funk_kw):
    """Recover ``h(eta, t)`` from ``g = R^* h`` as ``B_*^{-1} F^{-1} A_*^{-1} g``."""
    eta, t = _line_args(tau, t)
    theta = mu_tilde(eta, -t)
    vals = funk_invert(op_A_star_inv(g), theta, **funk_kw)
    return _scalar(vals / (1.0 + t**2))


def radon_direct(g: PlaneFunction, tau, t=None, *, nodes: int = 64, panels: int = 32,
                 scale: float = 1.0) -> np.ndarray | float:
    """Line integrals by composite Gauss-Legendre after ``y = scale * sinh(w)``."""
    eta, t = _line_args(tau, t)
    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(-8.0, 8.0, panels + 1)
    half = 0.5 * np.diff(edges)
    ws = (edges[:-1, None] + half[:, None] * (x + 1.0)).reshape(-1)
    wt = (half[:, None] * w).reshape(-1)
    y = scale * np.sinh(ws)
    jac = scale * np.cosh(ws) * wt
    perp = np.stack([-eta[..., 1], eta[..., 0]], axis=-1)
    pts = t[..., None, None] * eta[..., None, :] + y[:, None] * perp[..., None, :]
    return _scalar(np.sum(g(pts) * jac, axis=-1))


def dual_radon_direct(h: HyperplaneField, x, *, nodes: int = 256):
    """Mean of ``h`` over lines through ``x`` by the trapezoid rule on the normal angle."""
    x = np.asarray(x, dtype=float)
    a = math.pi * (np.arange(nodes) + 0.5) / nodes
    eta = np.stack([np.cos(a), np.sin(a)], axis=-1)
    t = x[..., None, :] @ eta.T if x.ndim > 1 else eta @ x
    vals = h(np.broadcast_to(eta, np.shape(t) + (2,)), np.asarray(t))
    return _scalar(np.mean(vals, axis=-1))


# }}}


# {{{ codimension-one mixed inversion (n = 3, j = k = 1)


@dataclass(frozen=True)
class Codim1Grid:
    """Sampling resolution of the two-step reconstruction.

    ``n_eta`` directions on the projective circle of lines in ``xi^perp``;
    per direction, ``phi(eta, .)`` is sampled on a polar grid of ``eta^perp``
    with ``n_azimuth`` angles and ``n_radial`` compactified radii
    ``|v| = tan w`` uniform in ``w``; ``n_offset`` offsets ``t = tan a`` of the
    intermediate lines, uniform in ``a``.
    """

    n_eta: int = 48
    n_offset: int = 48
    n_azimuth: int = 64
    n_radial: int = 64
    quad_order: int = 48
    abel_order: int = 32
    outer_quad_order: int = 64
    outer_abel_order: int = 48
    interp_degree: int = 3

    def __post_init__(self) -> None:
        for name in ("n_eta", "n_offset", "n_azimuth", "n_radial"):
            if getattr(self, name) < 8:
                raise InterpolationGap(f"{name}={getattr(self, name)} is too coarse (need >= 8)")


@dataclass(frozen=True)
class Codim1Samples:
    """Samples ``phi(eta_i, y)`` of a field on lines of R^3 along one projective circle.

    ``xi`` is the target direction, ``frame`` an orthonormal frame ``(p1, p2)``
    of ``xi^perp`` and ``eta_i = -sin(chi_i) p1 + cos(chi_i) p2``.  The point
    ``y = tan(w) (cos(a) xi + sin(a) nu_i)`` of ``eta_i^perp``, with
    ``nu_i = cos(chi_i) p1 + sin(chi_i) p2``, carries the value ``values[i, l, m]``
    at ``w = w[l]``, ``a = a[m]``.
    """

    xi: np.ndarray
    frame: np.ndarray
    chi: np.ndarray
    w: np.ndarray
    a: np.ndarray
    values: np.ndarray
    degree: int = 3

    def etas(self) -> np.ndarray:
        c, s = np.cos(self.chi), np.sin(self.chi)
        return -s[:, None] * self.frame[0] + c[:, None] * self.frame[1]

    def normals(self) -> np.ndarray:
        c, s = np.cos(self.chi), np.sin(self.chi)
        return c[:, None] * self.frame[0] + s[:, None] * self.frame[1]

    def offsets(self) -> np.ndarray:
        """Sample offsets ``y`` with shape ``(n_eta, n_radial, n_azimuth, 3)``."""
        r = np.tan(self.w)[None, :, None, None]
        ca = np.cos(self.a)[None, None, :, None]
        sa = np.sin(self.a)[None, None, :, None]
        return r * (ca * self.xi + sa * self.normals()[:, None, None, :])

    def manifest(self) -> dict:
        return {
            "xi": self.xi.tolist(),
            "frame": self.frame.tolist(),
            "chi": self.chi.tolist(),
            "w": self.w.tolist(),
            "a": self.a.tolist(),
        }

    @classmethod
    def from_manifest(cls, manifest: dict, values) -> Codim1Samples:
        chi, w, a = (np.asarray(manifest[k], dtype=float) for k in ("chi", "w", "a"))
        vals = np.asarray(values, dtype=float).reshape(chi.size, w.size, a.size)
        # stored geometry may be rounded; restore exact orthonormality
        xi = np.asarray(manifest["xi"], dtype=float)
        xi = xi / np.linalg.norm(xi)
        frame = np.asarray(manifest["frame"], dtype=float)
        frame = frame - np.outer(frame @ xi, xi)
        q, r = np.linalg.qr(frame.T)
        frame = (q * np.sign(np.diag(r))).T
        return cls(xi, frame, chi, w, a, vals)


def codim1_grid(xi, grid: Codim1Grid = Codim1Grid()) -> Codim1Samples:
    """Sampling layout for the target direction ``xi`` with unset (zero) values."""
    xi = np.asarray(xi, dtype=float).reshape(3)
    xi = xi / np.linalg.norm(xi)
    frame = complement_frame(xi[None], 3)
    chi = math.pi * np.arange(grid.n_eta) / grid.n_eta
    # radii up to the equator; sample_codim1 moves the last row just inside it
    w = 0.5 * math.pi * np.arange(grid.n_radial + 1) / grid.n_radial
    a = 2.0 * math.pi * np.arange(grid.n_azimuth) / grid.n_azimuth
    return Codim1Samples(xi, frame, chi, w, a, np.zeros((chi.size, w.size, a.size)))


def sample_codim1(vphi: GrassmannField, xi, grid: Codim1Grid = Codim1Grid()) -> Codim1Samples:
    """Evaluate ``vphi`` on the layout of :func:`codim1_grid`.

    Stored values are ``phi * sqrt(1 + |y|^2)``, which stays bounded for the
    ``|y|^-1`` decay of mixed transforms; the equatorial row is taken at
    ``w = pi/2 - EQUATOR_GAP``.
    """
    lay = codim1_grid(xi, grid)
    if vphi.dim != 1:
        raise DimsViolation("codimension-one inversion expects a field on lines")
    w = lay.w.copy()
    w[-1] = 0.5 * math.pi - EQUATOR_GAP
    samples = Codim1Samples(lay.xi, lay.frame, lay.chi, w, lay.a, lay.values)
    ys = samples.offsets()
    etas = np.broadcast_to(lay.etas()[:, None, None, None, :], ys.shape[:-1] + (1, 3))
    vals = vphi.batch(etas, ys) / np.cos(w)[None, :, None]
    return Codim1Samples(lay.xi, lay.frame, lay.chi, lay.w, lay.a, vals, grid.interp_degree)


class _PeriodicSpline:
    """Tensor-product spline on ``(x, y)``; ``x`` uniform and ``2 pi``-periodic."""

    PAD = 4

    def __init__(self, x, y, table, degree: int = 3):
        p = self.PAD
        dx = x[1] - x[0]
        xx = np.concatenate([x[-p:] - 2.0 * math.pi, x, x[:p] + 2.0 * math.pi])
        tt = np.concatenate([table[-p:], table, table[:p]], axis=0)
        if abs(x[0] + x.size * dx - 2.0 * math.pi - x[0]) > 1e-9:
            raise InterpolationGap("periodic axis must be a uniform grid of the full period")
        self._spline = RectBivariateSpline(xx, y, tt, kx=degree, ky=degree)
        self._y = (y[0], y[-1])

    def __call__(self, x, y):
        x = np.mod(x, 2.0 * math.pi)
        y = np.clip(y, *self._y)
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        x, y = np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()
        return self._spline.ev(x, y).reshape(shape)


def _inner_sphere_field(samples: Codim1Samples, i: int) -> SphereField:
    """``A_*^{-1} phi(eta_i, .)`` on the sphere of ``eta_i^perp`` in the frame ``(xi, nu_i)``."""
    interp = _PeriodicSpline(samples.a, samples.w, samples.values[i].T, samples.degree)

    def f(th):
        th = np.where(th[..., 2:3] < 0.0, -th, th)
        # A_*^{-1} g(theta) = g(x) sqrt(1 + |x|^2) with x = -theta'/theta_3
        az = np.mod(np.arctan2(-th[..., 1], -th[..., 0]), 2.0 * math.pi)
        w = np.arccos(np.clip(th[..., 2], -1.0, 1.0))
        return interp(az, w)

    return SphereField(f, name=f"inner[{i}]")


def codim1_intermediate(samples: Codim1Samples, grid: Codim1Grid = Codim1Grid()):
    """Step one: ``f~(chi_i, t_l)`` on lines of ``xi^perp`` with offsets ``t_l = tan(alpha_l)``.

    Returns ``(alpha, table)``; ``table[i, l]`` is the inverse dual line
    transform of ``phi(eta_i, .)`` on the line ``{v : v . nu_i = t_l}`` of ``eta_i^perp``.
    """
    alpha = -0.5 * math.pi + math.pi * (np.arange(grid.n_offset) + 0.5) / grid.n_offset
    t = np.tan(alpha)
    # the line of eta^perp with direction xi and offset t nu has normal (0, 1) in (xi, nu)
    theta = mu_tilde(np.broadcast_to([0.0, 1.0], (t.size, 2)), -t)
    table = np.empty((samples.chi.size, t.size))
    for i in range(samples.chi.size):
        psi = _inner_sphere_field(samples, i)
        table[i] = funk_invert(psi, theta, quad_order=grid.quad_order,
                               abel_order=grid.abel_order) / (1.0 + t**2)
    return alpha, table


def _outer_field(samples: Codim1Samples, alpha: np.ndarray, table: np.ndarray) -> HyperplaneField:
    """Lines ``{x . (cos chi, sin chi) = t}`` of ``xi^perp`` in the frame ``(p1, p2)``."""
    scaled = table * np.sqrt(1.0 + np.tan(alpha) ** 2)
    # chi in [0, pi) and the flip (chi + pi, a) == (chi, -a) give a 2 pi-periodic table
    full = np.concatenate([scaled, scaled[:, ::-1]], axis=0)
    chi = np.concatenate([samples.chi, samples.chi + math.pi])
    interp = _PeriodicSpline(chi, alpha, full, samples.degree)

    def h(eta, t):
        chi_q = np.mod(np.arctan2(eta[..., 1], eta[..., 0]), 2.0 * math.pi)
        a = np.arctan(t)
        return interp(chi_q, a) / np.sqrt(1.0 + t**2)

    return HyperplaneField(h, name="codim1_intermediate")


@dataclass(frozen=True)
class LlogDiagnostic:
    ok: bool
    reason: str


def llog_check(f_meta) -> LlogDiagnostic:
    """Whether a function on lines of R^3 lies in the ``L_log`` class.

    Membership needs local integrability in the offset plane (zero exponent
    below 2) and ``int |f| (1+r)^{-1} log(2+r) r dr`` finite at infinity,
    i.e. decay exponent above 1; a bare ``1/log`` factor does not rescue the
    boundary exponent.
    """
    zero = getattr(f_meta, "zero_exponent", 0.0) or 0.0
    decay = getattr(f_meta, "decay_exponent", math.inf)
    if zero >= 2.0:
        return LlogDiagnostic(False, f"not locally integrable (zero exponent {zero})")
    if not decay > 1.0:
        return LlogDiagnostic(False, f"tail integral diverges (decay exponent {decay})")
    return LlogDiagnostic(True, "")


def invert_codim1(vphi, dims: Dims, tau: AffinePlane | None = None, *, offsets=None,
                  grid: Codim1Grid = Codim1Grid(), f_meta=None):
    """Reconstruct ``f(xi, u)`` on lines of R^3 from ``vphi = R_{1,1} f``.

    ``vphi`` is a :class:`GrassmannField` on lines or a :class:`Codim1Samples`
    prepared for the direction of ``tau``.  Either pass one target plane
    ``tau``, or a plane giving the direction together with several ``offsets``
    (points of ``xi^perp`` in R^3), which share the intermediate table.
    ``f_meta`` carries the decay descriptor of ``f`` for the class check.
    """
    if (dims.n, dims.j, dims.k) != (3, 1, 1):
        raise DimsViolation("codimension-one inversion is implemented for n=3, j=k=1")
    if tau is None or tau.n != 3 or tau.dim != 1:
        raise DimsViolation("target must be a line in R^3")
    if f_meta is not None:
        diag = llog_check(f_meta)
        if not diag.ok:
            raise ClassViolation(diag.reason)
    pts = np.atleast_2d(tau.offset if offsets is None else np.asarray(offsets, dtype=float))
    xi = tau.basis[0]
    if np.any(np.abs(pts @ xi) > 1e-10 * np.maximum(1.0, np.linalg.norm(pts, axis=-1))):
        raise ValueError("offsets must be perpendicular to the target direction")
    if isinstance(vphi, GrassmannField) and vphi.is_zero:
        out = np.zeros(len(pts))
    else:
        if isinstance(vphi, Codim1Samples):
            samples = vphi
            if abs(abs(float(samples.xi @ xi)) - 1.0) > 1e-12:
                raise InterpolationGap("samples were taken along a different projective circle")
        else:
            samples = sample_codim1(vphi, xi, grid)
        if samples.chi.size < 8 or samples.w.size < 8 or samples.a.size < 8:
            raise InterpolationGap("too few samples near the required slices")
        alpha, table = codim1_intermediate(samples, grid)
        h = _outer_field(samples, alpha, table)
        u2 = pts @ samples.frame.T
        out = np.atleast_1d(radon_invert(h, u2, quad_order=grid.outer_quad_order,
                                         abel_order=grid.outer_abel_order))
    if offsets is None:
        return float(out[0])
    return out


# }}}
