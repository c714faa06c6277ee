"""Affine Grassmannians, Haar sampling and Monte Carlo mixed transforms.

A j-plane ``tau = xi + u`` is stored as an orthonormal frame of ``xi`` (rows of
``basis``) and the offset ``u``, perpendicular to ``xi``.  Fields on planes are
vectorised: they receive arrays of bases ``(..., dim, n)`` and offsets
``(..., n)`` with broadcastable leading axes.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from mixradon.errors import BudgetExhausted, DimsViolation, ExistenceViolation
from mixradon.profiles import RadialProfile
from mixradon.radial_transforms import Dims, existence_check

ORTHO_TOL = 1e-12
DEFAULT_SEED = 20240611
T_DOF = 3.0


# {{{ planes


@dataclass(frozen=True, eq=False)
class AffinePlane:
    """The affine plane ``{offset + basis.T @ c}``; ``offset`` is perpendicular to the basis."""

    basis: np.ndarray
    offset: np.ndarray

    def __post_init__(self) -> None:
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.size == 0:
            basis = np.zeros((0, np.asarray(self.offset).size))
        offset = np.asarray(self.offset, dtype=float).reshape(-1)
        if basis.shape[1] != offset.size:
            raise DimsViolation("basis vectors and offset live in different dimensions")
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(len(basis)), atol=ORTHO_TOL * 10):
            raise ValueError("basis is not orthonormal")
        if np.any(np.abs(basis @ offset) > 1e-10 * max(1.0, np.linalg.norm(offset))):
            raise ValueError("offset is not perpendicular to the plane")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "offset", offset)

    @classmethod
    def from_vectors(cls, directions, point) -> AffinePlane:
        """Plane through ``point`` spanned by (not necessarily orthonormal) ``directions``."""
        point = np.asarray(point, dtype=float)
        d = np.atleast_2d(np.asarray(directions, dtype=float))
        if d.size == 0:
            return cls(np.zeros((0, point.size)), point)
        q, _ = np.linalg.qr(d.T)
        basis = q.T
        return cls(basis, point - basis.T @ (basis @ point))

    @property
    def n(self) -> int:
        return self.offset.size

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def norm(self) -> float:
        """Distance from the plane to the origin."""
        return float(np.linalg.norm(self.offset))

    @property
    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def complement_frame(self) -> np.ndarray:
        """Orthonormal frame of the orthogonal complement, completed deterministically."""
        return complement_frame(self.basis, self.n)

    def moved(self, rotation, shift) -> AffinePlane:
        """Image under ``x -> rotation @ x + shift``."""
        rotation = np.asarray(rotation, dtype=float)
        basis = self.basis @ rotation.T
        point = rotation @ self.offset + np.asarray(shift, dtype=float)
        return AffinePlane(basis, point - basis.T @ (basis @ point))

    def with_basis(self, basis) -> AffinePlane:
        return AffinePlane(np.asarray(basis, dtype=float), self.offset)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AffinePlane) or other.n != self.n or other.dim != self.dim:
            return NotImplemented if not isinstance(other, AffinePlane) else False
        return bool(
            np.allclose(self.projector, other.projector, atol=1e-10)
            and np.allclose(self.offset, other.offset, atol=1e-10)
        )

    __hash__ = None


def complement_frame(basis: np.ndarray, n: int) -> np.ndarray:
    if basis.shape[0] == 0:
        return np.eye(n)
    _, _, vt = np.linalg.svd(basis, full_matrices=True)
    return vt[basis.shape[0]:]


# }}}

# {{{ fields


@dataclass(frozen=True)
class GrassmannField:
    """A function on the affine Grassmannian of ``dim``-planes.

    ``func(bases, offsets)`` must depend on the plane only, not on the frame.
    The exponents describe ``|f(tau)| ~ |tau|^-zero_exponent`` near the
    origin and ``|tau|^-decay_exponent`` at infinity.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dim: int
    zero_exponent: float = 0.0
    decay_exponent: float = math.inf
    log_factor: bool = False
    is_zero: bool = False
    radial: RadialProfile | None = None
    name: str = ""

    def __call__(self, plane: AffinePlane) -> float:
        if plane.dim != self.dim:
            raise DimsViolation(f"field lives on {self.dim}-planes, got a {plane.dim}-plane")
        return float(self.batch(plane.basis[None], plane.offset[None])[0])

    def batch(self, bases: np.ndarray, offsets: np.ndarray) -> np.ndarray:
        shape = np.broadcast_shapes(bases.shape[:-2], offsets.shape[:-1])
        if self.is_zero:
            return np.zeros(shape)
        return np.broadcast_to(np.asarray(self.func(bases, offsets), dtype=float), shape)

    def moved(self, rotation, shift) -> GrassmannField:
        """The field ``tau -> f(g tau)`` with ``g x = rotation @ x + shift``."""
        rotation = np.asarray(rotation, dtype=float)
        shift = np.asarray(shift, dtype=float)

        def g(bases, offsets):
            nb = bases @ rotation.T
            pt = offsets @ rotation.T + shift
            pt = pt - np.einsum("...in,...i->...n", nb, np.einsum("...in,...n->...i", nb, pt))
            return self.func(nb, pt)

        return GrassmannField(g, self.dim, self.zero_exponent, self.decay_exponent,
                              self.log_factor, self.is_zero, None, f"moved[{self.name}]")


def radial_field(profile: RadialProfile, dim: int) -> GrassmannField:
    """``f(tau) = profile(|tau|)``."""

    def g(bases, offsets):
        return profile(np.linalg.norm(offsets, axis=-1))

    return GrassmannField(g, dim, profile.zero_exponent or 0.0, profile.decay_exponent,
                          profile.log_factor, profile.is_zero, profile, profile.name)


def zero_field(dim: int) -> GrassmannField:
    return GrassmannField(lambda b, o: 0.0, dim, is_zero=True, name="zero")


def distance_to_point(bases: np.ndarray, offsets: np.ndarray, point) -> np.ndarray:
    """Euclidean distance from ``point`` to each plane."""
    d = np.asarray(point, dtype=float) - offsets
    along = np.einsum("...in,...n->...i", bases, d)
    return np.sqrt(np.maximum(np.sum(d * d, axis=-1) - np.sum(along * along, axis=-1), 0.0))


def anisotropic_bump(dim: int, center, axis) -> GrassmannField:
    """``exp(-dist(center, tau)^2) (1 + |P_xi a|^2)``: smooth, non-radial, Gaussian decay."""
    center = np.asarray(center, dtype=float)
    axis = np.asarray(axis, dtype=float)

    def g(bases, offsets):
        dist = distance_to_point(bases, offsets, center)
        proj = np.einsum("...in,n->...i", bases, axis)
        return np.exp(-dist**2) * (1.0 + np.sum(proj * proj, axis=-1))

    return GrassmannField(g, dim, name="anisotropic_bump")


# }}}

# {{{ sampling


@dataclass(frozen=True)
class HaarSampler:
    """Deterministic random stream keyed by ``(seed, stream)``."""

    seed: int = DEFAULT_SEED
    stream: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        object.__setattr__(self, "_rng", np.random.default_rng(ss))

    @property
    def rng(self) -> np.random.Generator:
        return self._rng

    def spawn(self, stream: int) -> HaarSampler:
        return HaarSampler(self.seed, stream)


def sample_rotations(s: HaarSampler, n: int, size: int) -> np.ndarray:
    """``size`` Haar-distributed elements of ``O(n)``, shape ``(size, n, n)``."""
    z = s.rng.standard_normal((size, n, n))
    q, r = np.linalg.qr(z)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d[d == 0] = 1.0
    return q * d[:, None, :]


def sample_rotation(s: HaarSampler, n: int) -> np.ndarray:
    if n < 1:
        raise DimsViolation(f"need n >= 1, got {n}")
    return sample_rotations(s, n, 1)[0]


def student_t_logpdf(y: np.ndarray, scale: float, dof: float = T_DOF) -> np.ndarray:
    d = y.shape[-1]
    q = np.sum(y * y, axis=-1) / (dof * scale**2)
    return (
        gammaln((dof + d) / 2) - gammaln(dof / 2) - 0.5 * d * math.log(dof * math.pi)
        - d * math.log(scale) - 0.5 * (dof + d) * np.log1p(q)
    )


def student_t(rng: np.random.Generator, d: int, scale: float, size: int, dof: float = T_DOF):
    """Draws from the isotropic ``d``-variate Student-t law and their reciprocal densities."""
    z = rng.standard_normal((size, d))
    w = rng.chisquare(dof, size)
    y = scale * z / np.sqrt(w / dof)[:, None]
    return y, np.exp(-student_t_logpdf(y, scale, dof))


def cusp_logpdf(y: np.ndarray, scale: float, gamma: float) -> np.ndarray:
    """Log density of ``C |y|^-gamma`` on the ball of radius ``scale`` (``-inf`` outside)."""
    d = y.shape[-1]
    r = np.linalg.norm(y, axis=-1)
    logc = (math.log(d - gamma) - (d - gamma) * math.log(scale)
            - (math.log(2) + 0.5 * d * math.log(math.pi) - gammaln(d / 2)))
    with np.errstate(divide="ignore"):
        out = logc - gamma * np.log(r)
    return np.where(r < scale, out, -np.inf)


@dataclass(frozen=True)
class OffsetProposal:
    """Equal-weight mixture of Student-t(3), an optional cusp ``|u|^-cusp`` on the
    ball of radius ``scale``, and an optional heavier Student-t with ``tail_dof``.

    The extra components keep importance weights square integrable for
    integrands singular at the origin or decaying slowly.
    """

    scale: float = 1.0
    cusp: float | None = None
    tail_dof: float | None = None

    def sample(self, rng: np.random.Generator, d: int, size: int):
        if self.cusp is not None and not 0 <= self.cusp < d:
            raise ValueError(f"cusp exponent must lie in [0, {d}), got {self.cusp}")
        comps = ["t"] + (["cusp"] if self.cusp is not None else []) + (
            ["tail"] if self.tail_dof is not None else [])
        if comps == ["t"]:
            return student_t(rng, d, self.scale, size)
        which = rng.integers(len(comps), size=size)
        y = np.empty((size, d))
        for c, name in enumerate(comps):
            idx = np.flatnonzero(which == c)
            if name == "t":
                y[idx] = student_t(rng, d, self.scale, idx.size)[0]
            elif name == "tail":
                y[idx] = student_t(rng, d, self.scale, idx.size, self.tail_dof)[0]
            else:
                z = rng.standard_normal((idx.size, d))
                z /= np.linalg.norm(z, axis=1, keepdims=True)
                r = self.scale * rng.random(idx.size) ** (1.0 / (d - self.cusp))
                y[idx] = z * r[:, None]
        logs = [student_t_logpdf(y, self.scale)]
        if self.cusp is not None:
            logs.append(cusp_logpdf(y, self.scale, self.cusp))
        if self.tail_dof is not None:
            logs.append(student_t_logpdf(y, self.scale, self.tail_dof))
        logp = np.logaddexp.reduce(np.array(logs), axis=0) - math.log(len(logs))
        return y, np.exp(-logp)


def sample_affine_planes(s: HaarSampler, n: int, dim: int, size: int, offset_scale: float = 1.0,
                         proposal: OffsetProposal | None = None):
    """Batch version of :func:`sample_affine_plane`: ``(bases, offsets, weights)``.

    Offsets come from ``proposal`` when given, otherwise from Student-t(3)
    with scale ``offset_scale``.
    """
    if not 0 <= dim < n:
        raise DimsViolation(f"need 0 <= dim < n, got dim={dim}, n={n}")
    rot = sample_rotations(s, n, size)
    cols = np.swapaxes(rot, 1, 2)
    bases = cols[:, :dim]
    if proposal is None:
        y, w = student_t(s.rng, n - dim, offset_scale, size)
    else:
        y, w = proposal.sample(s.rng, n - dim, size)
    offsets = np.einsum("si,sin->sn", y, cols[:, dim:])
    return bases, offsets, w


def sample_affine_plane(s: HaarSampler, n: int, dim: int, offset_scale: float = 1.0):
    """A random ``dim``-plane and its importance weight against ``d xi du``."""
    bases, offsets, w = sample_affine_planes(s, n, dim, 1, offset_scale)
    return AffinePlane(bases[0], offsets[0]), float(w[0])


def _sub_bases(frames: np.ndarray, s: HaarSampler, dim: int) -> np.ndarray:
    """Haar-random ``dim``-subspaces of the spans of ``frames`` (shape ``(N, m, n)``)."""
    size, m, _ = frames.shape
    if dim == 0:
        return np.zeros((size, 0, frames.shape[2]))
    q = sample_rotations(s, m, size)
    return np.einsum("sab,san->sbn", q[:, :, :dim], frames)


def orthoplanes_through(zeta: AffinePlane, s: HaarSampler, dims: Dims,
                        count: int) -> Iterator[tuple[AffinePlane, np.ndarray]]:
    """Yield ``count`` j-planes ``xi + v`` with ``xi`` Haar in ``eta^perp``, each with a frame of ``eta``.

    Here ``zeta = eta + v``.  Moving the yielded plane by any ``u`` in ``eta``
    gives a plane that meets ``zeta`` at a right angle.
    """
    if zeta.dim != dims.k:
        raise DimsViolation(f"zeta must be a {dims.k}-plane")
    perp = np.broadcast_to(zeta.complement_frame(), (count, dims.n - dims.k, dims.n))
    bases = _sub_bases(np.ascontiguousarray(perp), s, dims.j)
    for b in bases:
        off = zeta.offset - b.T @ (b @ zeta.offset)
        yield AffinePlane(b, off), zeta.basis


# }}}

# {{{ mixed transforms


@dataclass(frozen=True)
class MCBudget:
    """Sampling and quadrature controls for the Monte Carlo transforms."""

    n_samples: int = 20_000
    seed: int = DEFAULT_SEED
    stream: int = 0
    target_rel_stderr: float | None = None
    max_samples: int = 1_000_000
    inner_panels: int = 24
    inner_nodes: int = 8
    inner_angles: int = 16
    inner_radius: float = 1e8
    offset_scale: float = 1.0
    chunk_evals: int = 2_000_000

    def sampler(self) -> HaarSampler:
        return HaarSampler(self.seed, self.stream)


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_samples: int

    @classmethod
    def from_samples(cls, x: np.ndarray) -> MCEstimate:
        n = x.size
        if n == 0:
            return cls(0.0, 0.0, 0)
        sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
        return cls(float(np.mean(x)), sd / math.sqrt(n), n)

    def as_dict(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "n_samples": self.n_samples}


def _inner_rule(k: int, budget: MCBudget):
    """Nodes in unit-scaled ``w`` and the angle set for the inner quadrature over ``eta``."""
    x, w = np.polynomial.legendre.leggauss(budget.inner_nodes)
    p = budget.inner_panels
    if k == 1:
        edges = np.linspace(-1.0, 1.0, 2 * p + 1)
    else:
        edges = np.linspace(0.0, 1.0, p + 1)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * x + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights


def _inner_quadrature(field: GrassmannField, bases: np.ndarray, base_off: np.ndarray,
                      eta: np.ndarray, budget: MCBudget) -> np.ndarray:
    """``int_eta f(xi + u + v) du`` for each row, ``k = dim eta`` in ``{1, 2}``.

    Radii are mapped by ``r = c sinh(w)`` with ``c`` the distance of the
    plane ``xi + v`` from the origin, which resolves every scale from ``c``
    up to ``inner_radius``.  A power-law tail correction follows the field's
    decay exponent.
    """
    k = eta.shape[-2]
    c = np.maximum(np.linalg.norm(base_off, axis=-1), 1e-12)[:, None]
    W = np.arcsinh(budget.inner_radius / c)
    nodes, weights = _inner_rule(k, budget)
    wv = W * nodes[None, :]
    r = c * np.sinh(wv)
    jac = W * weights[None, :] * c * np.cosh(wv)
    lam = field.decay_exponent
    if k == 1:
        dirs = eta[..., 0, :][:, None, :]
        u = r[..., None] * dirs
        vals = field.batch(bases[:, None], base_off[:, None] + u)
        total = np.sum(vals * jac, axis=1)
        if math.isfinite(lam) and lam > 1:
            R = budget.inner_radius
            ends = field.batch(bases[:, None], base_off[:, None] + np.stack([R * dirs[:, 0], -R * dirs[:, 0]], 1))
            total = total + np.sum(ends, axis=1) * R / (lam - 1)
        return total
    m = budget.inner_angles
    phi = 2 * math.pi * np.arange(m) / m
    circ = np.cos(phi)[:, None, None] * eta[:, 0] + np.sin(phi)[:, None, None] * eta[:, 1]
    circ = np.swapaxes(circ, 0, 1)  # (N, m, n)
    u = r[:, None, :, None] * circ[:, :, None, :]
    vals = field.batch(bases[:, None, None], base_off[:, None, None] + u)
    total = (2 * math.pi / m) * np.sum(vals * (jac * r)[:, None, :], axis=(1, 2))
    if math.isfinite(lam) and lam > 2:
        R = budget.inner_radius
        ends = field.batch(bases[:, None], base_off[:, None] + R * circ)
        total = total + (2 * math.pi / m) * np.sum(ends, axis=1) * R**2 / (lam - 2)
    return total


def _inner_mc(field: GrassmannField, bases, base_off, eta, rng, scale):
    """One importance sample of ``int_eta f(xi + u + v) du`` per row."""
    size, k, _ = eta.shape
    y, w = student_t(rng, k, scale, size)
    u = np.einsum("si,sin->sn", y, eta)
    return field.batch(bases, base_off + u) * w


def incidence_values(field: GrassmannField, eta: np.ndarray, v: np.ndarray, perp: np.ndarray,
                     s: HaarSampler, budget: MCBudget, inner: str = "quadrature") -> np.ndarray:
    """Per-sample values of ``int_eta f(xi + u + v) du`` with ``xi`` Haar in ``eta^perp``.

    ``eta``, ``v`` and ``perp`` hold one outer plane per row.  With
    ``inner="mc"`` a single importance sample replaces the quadrature, which
    keeps nested estimators unbiased at one field call per row.
    """
    bases = _sub_bases(perp, s, field.dim)
    along = np.einsum("sbn,sn->sb", bases, v)
    base_off = v - np.einsum("sb,sbn->sn", along, bases)
    k = eta.shape[1]
    if k == 0:
        return field.batch(bases, base_off)
    if inner == "mc" or k > 2:
        return _inner_mc(field, bases, base_off, eta, s.rng, budget.offset_scale)
    return _inner_quadrature(field, bases, base_off, eta, budget)


def _estimate(field: GrassmannField, plane: AffinePlane, budget: MCBudget) -> MCEstimate:
    if field.is_zero:
        return MCEstimate(0.0, 0.0, budget.n_samples)
    s = budget.sampler()
    k, n = plane.dim, plane.n
    nodes = 1 if k == 0 else (2 * budget.inner_panels * budget.inner_nodes if k == 1
                              else budget.inner_angles * budget.inner_panels * budget.inner_nodes)
    chunk = max(1, budget.chunk_evals // nodes)
    perp_one = plane.complement_frame()
    parts: list[np.ndarray] = []
    done = 0
    target = budget.n_samples
    while True:
        while done < target:
            m = min(chunk, target - done)
            eta = np.broadcast_to(plane.basis, (m, k, n))
            v = np.broadcast_to(plane.offset, (m, n))
            perp = np.broadcast_to(perp_one, (m, n - k, n))
            parts.append(incidence_values(field, eta, v, np.ascontiguousarray(perp), s, budget))
            done += m
        est = MCEstimate.from_samples(np.concatenate(parts))
        goal = budget.target_rel_stderr
        if goal is None or est.stderr <= goal * abs(est.value):
            return est
        if done >= budget.max_samples:
            raise BudgetExhausted(
                f"relative stderr {est.stderr / abs(est.value):.3g} above {goal} "
                f"after {done} samples"
            )
        target = min(2 * done, budget.max_samples)


def _check_exists(field: GrassmannField, dims: Dims, direction: str) -> None:
    if field.is_zero:
        return
    diag = existence_check(field, dims, direction)
    if not diag.exists:
        raise ExistenceViolation(f"{direction} transform does not exist for this field's decay")


def mixed_transform(f: GrassmannField, zeta: AffinePlane, dims: Dims,
                    budget: MCBudget = MCBudget()) -> MCEstimate:
    """``(R_{j,k} f)(zeta)``: the integral of ``f`` over j-planes meeting ``zeta`` orthogonally."""
    if f.dim != dims.j or zeta.dim != dims.k or zeta.n != dims.n:
        raise DimsViolation("field or plane does not match dims")
    _check_exists(f, dims, "forward")
    return _estimate(f, zeta, budget)


def mixed_transform_dual(phi: GrassmannField, tau: AffinePlane, dims: Dims,
                         budget: MCBudget = MCBudget()) -> MCEstimate:
    """``(R*_{k,j} phi)(tau)``: the integral of ``phi`` over k-planes meeting ``tau`` orthogonally."""
    if phi.dim != dims.k or tau.dim != dims.j or tau.n != dims.n:
        raise DimsViolation("field or plane does not match dims")
    _check_exists(phi, dims, "dual")
    return _estimate(phi, tau, budget)


def plane_at_distance(n: int, dim: int, dist: float) -> AffinePlane:
    """The plane spanned by the first ``dim`` axes, shifted by ``dist`` along the next one."""
    basis = np.eye(n)[:dim]
    offset = np.zeros(n)
    offset[dim] = dist
    return AffinePlane(basis, offset)


# }}}
