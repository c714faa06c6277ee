r"""Erdélyi--Kober fractional integrals and derivatives on the half-line.

.. math::

    (I^\alpha_{+,2} f)(t) = \frac{2}{\Gamma(\alpha)} \int_0^t (t^2 - r^2)^{\alpha-1} f(r)\, r\, dr,
    \qquad
    (I^\alpha_{-,2} f)(t) = \frac{2}{\Gamma(\alpha)} \int_t^\infty (r^2 - t^2)^{\alpha-1} f(r)\, r\, dr.

Everything is computed in the squared variable ``y = r**2`` where the kernels
become Abel kernels ``|y_t - y|**(alpha-1)`` and ``D = (1/2t) d/dt`` becomes
``d/dy``.  Singular endpoints are handled with Gauss--Jacobi rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from mixradon.errors import (
    DivergentAtZero,
    DivergentTail,
    InsufficientSmoothness,
    NonPositivePoint,
)
from mixradon.profiles import STENCIL, RadialProfile

QUAD_NODES = 64
PANEL_RADIUS = 1.0
TAIL_RATIO = 4.0
TAIL_TOL = 1e-16
MAX_TAIL_PANELS = 150
INT_TOL = 1e-12
SHELL_MIN_START = 4.0


@lru_cache(maxsize=None)
def jacobi_rule(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss--Jacobi nodes/weights for the weight ``(1-x)**a (1+x)**b`` on [-1, 1]."""
    x, w = roots_jacobi(n, a, b)
    return x, w


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha < 0:
        raise ValueError(f"fractional order must be a finite positive real: {alpha}")
    return alpha


def _split_order(alpha: float) -> tuple[int, float]:
    """Split ``alpha = m + alpha0`` with ``0 <= alpha0 < 1``; snaps near-integers."""
    m = round(alpha)
    if abs(alpha - m) < INT_TOL:
        return int(m), 0.0
    m = math.floor(alpha)
    return m, alpha - m


def _points(t) -> tuple[np.ndarray, bool]:
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0)):
        raise NonPositivePoint(f"evaluation points must be positive: {t}")
    return arr, arr.ndim == 0


def _ret(out: np.ndarray, scalar: bool):
    return float(out.reshape(())) if scalar else out


def squared_variable(f: RadialProfile) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``y_i = r_i**2`` and values of a tabulated profile."""
    if f.kind != "tabulated":
        raise ValueError("only tabulated profiles have a node set")
    return f.grid**2, f.values.copy()


# {{{ tail condition


@dataclass(frozen=True)
class ShellTest:
    """Partial integrals of ``|f(r)| r**w`` over dyadic shells ``[a 2^i, a 2^(i+1)]``."""

    start: float
    shells: np.ndarray
    partial_sums: np.ndarray
    power_rate: float
    log_power: float
    divergent: bool


def dyadic_shell_test(
    f: RadialProfile,
    weight_exponent: float,
    start: float = 64.0,
    nshells: int = 8,
    *,
    rate_tol: float = 0.05,
    log_tol: float = 0.25,
) -> ShellTest:
    """Decide divergence of ``int^inf |f(r)| r**w dr`` from ``nshells`` dyadic shells.

    Shell integrals are fitted to ``s_i ~ C 2**(-rate*i) (log r_i)**(-log_power)``.
    The tail diverges iff ``rate < 0`` or ``rate ~ 0`` with ``log_power <= 1``.
    """
    x, w = jacobi_rule(QUAD_NODES, 0.0, 0.0)
    edges = start * 2.0 ** np.arange(nshells + 1)
    shells = np.empty(nshells)
    for i in range(nshells):
        lo, hi = math.log(edges[i]), math.log(edges[i + 1])
        v = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        r = np.exp(v)
        shells[i] = 0.5 * (hi - lo) * np.sum(w * np.abs(f(r)) * r ** (weight_exponent + 1))
    partial = np.cumsum(shells)

    i = np.arange(nshells)
    mid = np.sqrt(edges[:-1] * edges[1:])
    if np.all(shells > 0) and np.all(np.isfinite(shells)):
        cols = [np.ones(nshells), -i * math.log(2.0)]
        if np.all(mid > math.e):
            cols.append(-np.log(np.log(mid)))
        coef, *_ = np.linalg.lstsq(np.column_stack(cols), np.log(shells), rcond=None)
        rate = float(coef[1])
        log_power = float(coef[2]) if len(coef) > 2 else 0.0
    else:
        rate, log_power = math.inf, 0.0
    divergent = rate < -rate_tol or (abs(rate) <= rate_tol and log_power <= 1 + log_tol)
    return ShellTest(start, shells, partial, rate, log_power, bool(divergent))


@dataclass(frozen=True)
class TailDiagnostic:
    holds: bool
    metadata_ok: bool
    growth: ShellTest | None = None
    note: str = ""


def metadata_tail_ok(decay_exponent: float, threshold: float) -> bool:
    """``int^inf r**(-decay) r**(threshold-1) dr < inf``; the boundary case fails."""
    return decay_exponent > threshold


def tail_diagnostic(f: RadialProfile, alpha: float) -> TailDiagnostic:
    alpha = _check_alpha(alpha)
    if f.is_zero:
        return TailDiagnostic(True, True)
    meta = metadata_tail_ok(f.decay_exponent, 2 * alpha)
    if f.kind != "tabulated":
        return TailDiagnostic(meta, meta)

    rmin, rmax = max(f.grid[0], SHELL_MIN_START), f.grid[-1]
    nshells = min(8, int(math.floor(math.log2(rmax / rmin)))) if rmax > rmin else 0
    if nshells < 3:
        return TailDiagnostic(meta, meta, note="grid too short for a shell test")
    data_only = RadialProfile(kind="closed_form", func=_clipped(f, rmax))
    growth = dyadic_shell_test(data_only, 2 * alpha - 1, rmax / 2**nshells, nshells)
    holds = not growth.divergent
    note = ""
    if holds != meta:
        note = (
            f"metadata (decay_exponent={f.decay_exponent}) and shell growth test "
            f"disagree; using the growth test (rate={growth.power_rate:.3g}, "
            f"log_power={growth.log_power:.3g})"
        )
    return TailDiagnostic(holds, meta, growth, note)


def _clipped(f: RadialProfile, rmax: float):
    def g(r):
        return f(np.minimum(r, rmax))

    return g


def ek_tail_condition(f: RadialProfile, alpha: float) -> bool:
    r"""True iff :math:`\int_a^\infty |f(r)| r^{2\alpha-1} dr < \infty`."""
    return tail_diagnostic(f, alpha).holds


# }}}

# {{{ integrals


def ek_integral_plus(f: RadialProfile, alpha: float, t, n_nodes: int = QUAD_NODES):
    """Left Erdélyi--Kober integral ``I^alpha_{+,2} f`` at ``t`` (scalar or array)."""
    alpha = _check_alpha(alpha)
    t, scalar = _points(t)
    if alpha == 0:
        return _ret(np.asarray(f(t), dtype=float), scalar)
    lam0 = f.zero_exponent or 0.0
    if lam0 >= 2:
        raise DivergentAtZero(f"r f(r) is not integrable at 0 (zero_exponent={lam0})")
    flat = t.ravel()
    out = np.zeros(flat.shape)
    if f.is_zero or flat.size == 0:
        return _ret(out.reshape(t.shape), scalar)

    panels = np.maximum(1, np.ceil(flat / PANEL_RADIUS)).astype(int)
    for m in np.unique(panels):
        sel = panels == m
        out[sel] = _plus_group(f, alpha, flat[sel] ** 2, int(m), n_nodes)
    out /= math.gamma(alpha)
    return _ret(out.reshape(t.shape), scalar)


def _plus_group(f, alpha, T, m, n):
    beta = f.beta
    frac = (np.arange(m + 1) / m) ** 2
    total = np.zeros(T.shape)
    for i in range(m):
        p = alpha - 1 if i == m - 1 else 0.0
        q = beta if i == 0 else 0.0
        x, w = jacobi_rule(n, p, q)
        lo, hi = frac[i] * T, frac[i + 1] * T
        half = 0.5 * (hi - lo)
        y = lo[:, None] + half[:, None] * (1 + x)[None, :]
        vals = f(np.sqrt(y))
        if q != 0:
            vals = vals / y**q
        if p == 0 and alpha != 1:
            vals = vals * (T[:, None] - y) ** (alpha - 1)
        total += half ** (p + q + 1) * (vals @ w)
    return total


def ek_integral_minus(f: RadialProfile, alpha: float, t, n_nodes: int = QUAD_NODES):
    """Right Erdélyi--Kober integral ``I^alpha_{-,2} f`` at ``t`` (scalar or array)."""
    alpha = _check_alpha(alpha)
    t, scalar = _points(t)
    if alpha == 0:
        return _ret(np.asarray(f(t), dtype=float), scalar)
    diag = tail_diagnostic(f, alpha)
    if not diag.holds:
        raise DivergentTail(
            f"tail condition fails for alpha={alpha} "
            f"(decay_exponent={f.decay_exponent}) {diag.note}".rstrip()
        )
    flat = t.ravel()
    if f.is_zero or flat.size == 0:
        return _ret(np.zeros(t.shape), scalar)

    T = flat**2
    a = np.minimum(T, 1.0)
    decay = f.decay_exponent
    rate = TAIL_RATIO ** (alpha - 0.5 * decay) if math.isfinite(decay) else 0.0

    # near-singular panel u in [0, a] with weight u**(alpha-1)
    x, w = jacobi_rule(n_nodes, 0.0, alpha - 1)
    half = 0.5 * a
    u = half[:, None] * (1 + x)[None, :]
    total = half**alpha * (f(np.sqrt(T[:, None] + u)) @ w)
    abs_total = np.abs(total)

    xl, wl = jacobi_rule(n_nodes, 0.0, 0.0)
    done = np.zeros(T.shape, dtype=bool)
    quiet = np.zeros(T.shape, dtype=int)
    last = np.zeros(T.shape)
    lo = a.copy()
    for _ in range(MAX_TAIL_PANELS):
        hi = lo * TAIL_RATIO
        half = 0.5 * (hi - lo)
        u = lo[:, None] + half[:, None] * (1 + xl)[None, :]
        vals = f(np.sqrt(T[:, None] + u)) * u ** (alpha - 1)
        contrib = half * (vals @ wl)
        contrib = np.where(done, 0.0, contrib)
        total += contrib
        absc = half * (np.abs(vals) @ wl)
        abs_total += np.where(done, 0.0, absc)
        last = np.where(done, last, contrib)
        if math.isfinite(decay):
            remainder = absc * rate / (1 - rate)
            newly = remainder <= TAIL_TOL * abs_total
        else:
            quiet = np.where(absc <= TAIL_TOL * abs_total, quiet + 1, 0)
            newly = (quiet >= 2) & (hi >= 100.0)
        done |= newly
        lo = hi
        if np.all(done):
            break
    else:
        # power-law tail not yet negligible: add the geometric remainder
        if math.isfinite(decay):
            total += np.where(done, 0.0, last * rate / (1 - rate))

    out = total / math.gamma(alpha)
    return _ret(out.reshape(t.shape), scalar)


# }}}

# {{{ derivatives

_STENCIL_OFFSETS = np.arange(STENCIL) - 0.5 * (STENCIL - 1)
_VANDER_INV = np.linalg.inv(np.vander(_STENCIL_OFFSETS, STENCIL, increasing=True))


def y_derivative(q, y0, p: int, beta: float = 0.0, h_rel: float = 0.02, h_max: float = 0.02):
    """``(d/dy)**p`` of ``y**beta * g(y)`` at ``y0`` from samples ``q(y) = y**beta g(y)``.

    ``g`` is interpolated on a centred 8-node stencil of spacing
    ``h = min(h_rel*y0, h_max)`` and differentiated analytically.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if p == 0:
        return np.asarray(q(y0), dtype=float)
    h = np.minimum(h_rel * y0, h_max)
    ys = y0[:, None] + h[:, None] * _STENCIL_OFFSETS[None, :]
    vals = np.asarray(q(ys.ravel()), dtype=float).reshape(ys.shape)
    if beta != 0:
        vals = vals / ys**beta
    coef = vals @ _VANDER_INV.T  # coefficients in s = (y - y0)/h
    # derivatives of g at y0
    dg = [coef[:, r] * math.factorial(r) / h**r for r in range(p + 1)]
    if beta == 0:
        out = dg[p]
    else:
        out = np.zeros(y0.shape)
        for i in range(p + 1):
            falling = math.prod(beta - s for s in range(i))
            out += math.comb(p, i) * falling * y0 ** (beta - i) * dg[p - i]
    return out


def _stencil_guard(phi: RadialProfile):
    if phi.kind == "tabulated" and phi.grid.size < STENCIL:
        raise InsufficientSmoothness(
            f"tabulated profile has {phi.grid.size} nodes; {STENCIL} are needed"
        )


def ek_derivative_plus(phi: RadialProfile, alpha: float, t, *, h_rel: float = 0.02,
                       h_max: float = 0.02):
    """Left-inverse ``D^alpha_{+,2}`` of :func:`ek_integral_plus` at ``t``."""
    alpha = _check_alpha(alpha)
    t, scalar = _points(t)
    if alpha == 0:
        return _ret(np.asarray(phi(t), dtype=float), scalar)
    _stencil_guard(phi)
    if phi.is_zero:
        return _ret(np.zeros(t.shape), scalar)
    m, a0 = _split_order(alpha)
    y0 = t.ravel() ** 2

    if a0 == 0:
        def q(y):
            return phi(np.sqrt(y))

        out = y_derivative(q, y0, m, phi.beta, h_rel, h_max)
    else:
        def q(y):
            return ek_integral_plus(phi, 1 - a0, np.sqrt(y))

        out = y_derivative(q, y0, m + 1, phi.beta + 1 - a0, h_rel, h_max)
    return _ret(out.reshape(t.shape), scalar)


def ek_derivative_minus(phi: RadialProfile, alpha: float, t, *, h_rel: float = 0.02,
                        h_max: float = 0.02):
    """Left-inverse ``D^alpha_{-,2}`` of :func:`ek_integral_minus` at ``t``.

    Integer orders use ``(-D)**m``; fractional orders use
    ``t**(2(1-alpha0)) (-D)**(m+1) t**(2 alpha) psi`` with
    ``psi = I^{1-alpha0}_{-,2} t**(-2m-2) phi``.
    """
    alpha = _check_alpha(alpha)
    t, scalar = _points(t)
    if alpha == 0:
        return _ret(np.asarray(phi(t), dtype=float), scalar)
    _stencil_guard(phi)
    if phi.is_zero:
        return _ret(np.zeros(t.shape), scalar)
    m, a0 = _split_order(alpha)
    y0 = t.ravel() ** 2

    if a0 == 0:
        def q(y):
            return phi(np.sqrt(y))

        out = (-1) ** m * y_derivative(q, y0, m, phi.beta, h_rel, h_max)
    else:
        chi = phi.times_power(-2 * m - 2)
        if not ek_tail_condition(chi, 1 - a0):
            raise DivergentTail(f"t^(-2m-2) phi violates the tail condition at order {1 - a0}")

        def q(y):
            return y**alpha * ek_integral_minus(chi, 1 - a0, np.sqrt(y))

        deriv = y_derivative(q, y0, m + 1, phi.beta, h_rel, h_max)
        out = y0 ** (1 - a0) * (-1) ** (m + 1) * deriv
    return _ret(out.reshape(t.shape), scalar)


# }}}
