"""Radial profiles: functions ``r -> f0(r)`` on the half-line with decay metadata.

A profile is either *closed form* (a vectorised callable) or *tabulated*
(values on a strictly increasing grid of positive radii).  Tabulated
profiles are interpolated with a local 8-node polynomial stencil in the
squared variable ``y = r**2`` after the declared power behaviour at the
origin has been factored out; beyond the last node they are continued
with a fitted power-law tail.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np

STENCIL = 8


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """A radial function ``f0`` on ``(0, inf)``.

    ``zero_exponent`` is the exponent ``l0`` of the leading behaviour
    ``r**(-l0)`` at the origin (``None`` means bounded/unknown), and
    ``decay_exponent`` the exponent of the power decay ``r**(-l_inf)`` at
    infinity (``math.inf`` for faster than any power).  ``log_factor``
    marks an extra ``1/log r`` factor in the decay.
    """

    kind: str
    func: Callable[[np.ndarray], np.ndarray] | None = None
    grid: np.ndarray | None = None
    values: np.ndarray | None = None
    zero_exponent: float | None = 0.0
    decay_exponent: float = math.inf
    log_factor: bool = False
    name: str = ""
    is_zero: bool = field(default=False)

    def __post_init__(self) -> None:
        if self.kind not in ("closed_form", "tabulated"):
            raise ValueError(f"unknown profile kind: {self.kind!r}")
        if self.kind == "closed_form":
            if self.func is None:
                raise ValueError("closed-form profile needs a callable")
            return
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1d arrays of equal length")
        if grid.size < 2:
            raise ValueError("a tabulated profile needs at least two nodes")
        if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing and positive")
        if not np.all(np.isfinite(values)):
            raise ValueError("tabulated values must be finite")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    # {{{ evaluation

    @property
    def beta(self) -> float:
        """Exponent of ``y**beta`` factored out at the origin (``y = r**2``)."""
        return -0.5 * (self.zero_exponent or 0.0)

    def __call__(self, r):
        r_arr = np.asarray(r, dtype=float)
        if self.is_zero:
            out = np.zeros_like(r_arr)
        elif self.kind == "closed_form":
            out = np.asarray(self.func(r_arr), dtype=float)
            out = np.broadcast_to(out, r_arr.shape).copy()
        else:
            out = self._eval_tabulated(r_arr)
        return float(out) if out.ndim == 0 else out

    @cached_property
    def _squared(self):
        y = self.grid**2
        return y, self.values / y**self.beta

    @cached_property
    def _tail_coeffs(self) -> np.ndarray | None:
        if not math.isfinite(self.decay_exponent):
            return None
        m = min(STENCIL, self.grid.size)
        r = self.grid[-m:]
        rmax = self.grid[-1]
        x = (rmax / r) ** 2
        scaled = self.values[-m:] * (r / rmax) ** self.decay_exponent
        deg = min(2, m - 1)
        return np.polynomial.polynomial.polyfit(x, scaled, deg)

    def _eval_tabulated(self, r: np.ndarray) -> np.ndarray:
        shape = r.shape
        r = r.ravel()
        out = np.zeros_like(r)
        yg, gg = self._squared
        rmax = self.grid[-1]

        inside = r <= rmax
        if np.any(inside):
            y = r[inside] ** 2
            m = min(STENCIL, yg.size)
            idx = np.searchsorted(yg, y)
            start = np.clip(idx - m // 2, 0, yg.size - m)
            cols = start[:, None] + np.arange(m)[None, :]
            out[inside] = _lagrange(yg[cols], gg[cols], y) * y**self.beta

        outside = ~inside
        if np.any(outside) and self._tail_coeffs is not None:
            ro = r[outside]
            x = (rmax / ro) ** 2
            poly = np.polynomial.polynomial.polyval(x, self._tail_coeffs)
            out[outside] = poly * (rmax / ro) ** self.decay_exponent
        return out.reshape(shape)

    # }}}

    # {{{ derived profiles

    def times_power(self, p: float, name: str = "") -> RadialProfile:
        """Return the closed-form profile ``r**p * f0(r)``."""
        if p == 0:
            return self
        zero = (self.zero_exponent or 0.0) - p
        return RadialProfile(
            kind="closed_form",
            func=lambda r, f=self, p=p: np.asarray(r, dtype=float) ** p * f(r),
            zero_exponent=zero,
            decay_exponent=self.decay_exponent - p,
            log_factor=self.log_factor,
            name=name or f"r^{p:g}*{self.name}",
            is_zero=self.is_zero,
        )

    def scaled(self, c: float) -> RadialProfile:
        if c == 1:
            return self
        return RadialProfile(
            kind="closed_form",
            func=lambda r, f=self, c=c: c * f(r),
            zero_exponent=self.zero_exponent,
            decay_exponent=self.decay_exponent,
            log_factor=self.log_factor,
            name=f"{c:g}*{self.name}",
            is_zero=self.is_zero or c == 0,
        )

    def dilated(self, lam: float) -> RadialProfile:
        """Return ``r -> f0(r / lam)``."""
        return replace(
            self,
            kind="closed_form",
            func=lambda r, f=self, lam=lam: f(np.asarray(r, dtype=float) / lam),
            grid=None,
            values=None,
            name=f"{self.name}(r/{lam:g})",
        )

    def meta(self) -> dict:
        return {
            "zero_exponent": self.zero_exponent,
            "decay_exponent": None
            if not math.isfinite(self.decay_exponent)
            else self.decay_exponent,
            "log_factor": self.log_factor,
        }

    # }}}


def _lagrange(nodes: np.ndarray, vals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row-wise Lagrange interpolation; ``nodes``/``vals`` have shape (q, m)."""
    m = nodes.shape[1]
    diff = x[:, None] - nodes
    exact = diff == 0
    out = np.zeros(x.shape)
    for i in range(m):
        num = np.ones(x.shape)
        den = np.ones(x.shape)
        for k in range(m):
            if k == i:
                continue
            num *= diff[:, k]
            den *= nodes[:, i] - nodes[:, k]
        out += vals[:, i] * num / den
    hit = exact.any(axis=1)
    if np.any(hit):
        out[hit] = vals[hit][exact[hit]]
    return out


# {{{ constructors


def closed_form(
    func: Callable,
    *,
    zero_exponent: float | None = 0.0,
    decay_exponent: float = math.inf,
    log_factor: bool = False,
    name: str = "",
) -> RadialProfile:
    return RadialProfile(
        kind="closed_form",
        func=func,
        zero_exponent=zero_exponent,
        decay_exponent=decay_exponent,
        log_factor=log_factor,
        name=name,
    )


def tabulated(
    grid,
    values,
    *,
    zero_exponent: float | None = 0.0,
    decay_exponent: float = math.inf,
    log_factor: bool = False,
    name: str = "",
) -> RadialProfile:
    return RadialProfile(
        kind="tabulated",
        grid=np.asarray(grid, dtype=float),
        values=np.asarray(values, dtype=float),
        zero_exponent=zero_exponent,
        decay_exponent=decay_exponent,
        log_factor=log_factor,
        name=name,
    )


def zero() -> RadialProfile:
    return RadialProfile(
        kind="closed_form",
        func=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        name="0",
        is_zero=True,
    )


def constant(c: float = 1.0) -> RadialProfile:
    return closed_form(
        lambda r: np.full_like(np.asarray(r, dtype=float), c),
        decay_exponent=0.0,
        name=f"{c:g}",
    )


def power(mu: float) -> RadialProfile:
    """``r**mu``."""
    return closed_form(
        lambda r: np.asarray(r, dtype=float) ** mu,
        zero_exponent=-mu,
        decay_exponent=-mu,
        name=f"r^{mu:g}",
    )


def gaussian(scale: float = 1.0) -> RadialProfile:
    """``exp(-(r/scale)**2)``."""
    return closed_form(
        lambda r: np.exp(-((np.asarray(r, dtype=float) / scale) ** 2)),
        name="gauss" if scale == 1 else f"gauss({scale:g})",
    )


def cauchy(n: float) -> RadialProfile:
    """``(1 + r**2)**(-n/2)``."""
    return closed_form(
        lambda r: (1.0 + np.asarray(r, dtype=float) ** 2) ** (-0.5 * n),
        decay_exponent=float(n),
        name=f"cauchy{n:g}",
    )


def log_boundary(j: int, n: int, p: float) -> RadialProfile:
    """The sharpness counterexample ``(2+r)**((j-n)/p) / log(2+r)``."""
    e = (j - n) / p

    def f(r):
        r = np.asarray(r, dtype=float)
        return (2.0 + r) ** e / np.log(2.0 + r)

    return closed_form(f, decay_exponent=-e, log_factor=True, name=f"logb(p={p:g})")


def default_grid(r_max: float, *, r_min: float | None = None, h: float = 0.02,
                 r_far: float = 0.0, ratio: float = 1.02) -> np.ndarray:
    """Uniform grid on ``[r_min, r_max]`` optionally followed by a geometric run to ``r_far``."""
    if r_min is None:
        r_min = h
    n = max(STENCIL, int(math.ceil((r_max - r_min) / h)) + 1)
    grid = np.linspace(r_min, r_max, n)
    if r_far > r_max:
        m = int(math.ceil(math.log(r_far / r_max) / math.log(ratio)))
        grid = np.concatenate([grid, r_max * ratio ** np.arange(1, m + 1)])
    return grid


def materialize(
    func: Callable,
    grid,
    *,
    zero_exponent: float | None = 0.0,
    decay_exponent: float = math.inf,
    log_factor: bool = False,
    name: str = "",
) -> RadialProfile:
    """Tabulate ``func`` on ``grid`` and return the tabulated profile."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(func(grid), dtype=float)
    return tabulated(
        grid,
        values,
        zero_exponent=zero_exponent,
        decay_exponent=decay_exponent,
        log_factor=log_factor,
        name=name,
    )


# }}}

# {{{ csv / json


def read_csv(path: str | Path, meta_path: str | Path | None = None) -> RadialProfile:
    """Load a profile from a ``r,value`` CSV with an optional JSON metadata sidecar."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header[:2]] != ["r", "value"]:
            raise ValueError(f"{path}: expected header 'r,value', got {header!r}")
        rows = [(float(a), float(b)) for a, b, *_ in reader if a.strip()]
    grid, values = (np.array(c) for c in zip(*rows))

    meta = {}
    if meta_path is None:
        cand = path.with_suffix(".json")
        meta_path = cand if cand.exists() else None
    if meta_path is not None:
        meta = json.loads(Path(meta_path).read_text())
    decay = meta.get("decay_exponent")
    return tabulated(
        grid,
        values,
        zero_exponent=meta.get("zero_exponent", 0.0),
        decay_exponent=math.inf if decay is None else float(decay),
        log_factor=bool(meta.get("log_factor", False)),
        name=path.stem,
    )


def write_csv(path: str | Path, r, values, header=("r", "value")) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in zip(np.atleast_1d(r), np.atleast_1d(values)):
            w.writerow([f"{a:.9g}", f"{b:.9g}"])


def write_meta(path: str | Path, profile: RadialProfile) -> None:
    Path(path).write_text(json.dumps(profile.meta(), indent=2, sort_keys=True) + "\n")


# }}}
