"""Command-line front end.

Every subcommand writes ``<name>.csv`` (values with 9 significant digits),
``<name>.json`` (summary), ``<name>.png`` (figure) and
``<name>.provenance.json`` (configuration, seed, library versions and the
only timestamp) into the ``--out`` directory.

Exit codes: 0 success, 1 failed check or numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

DEFAULT_SEED = 20240611  # same constant as mixradon.grassmann.DEFAULT_SEED
BUNDLED = {"gaussian": "gaussian.csv"}


class CheckFailed(Exception):
    """A verification or round trip exceeded its tolerance."""


# {{{ output helpers


def _fmt(v) -> str:
    return f"{float(v):.9g}"


def _round(obj):
    """Round floats to 9 significant digits recursively."""
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(_fmt(obj))
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if hasattr(obj, "item") and getattr(obj, "ndim", 1) == 0:
        return _round(obj.item())
    if hasattr(obj, "tolist"):
        return _round(obj.tolist())
    return obj


def write_table(path: Path, header, columns) -> Path:
    cols = [list(map(float, c)) for c in columns]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
    return path


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(_round(data), indent=2, sort_keys=True) + "\n")
    return path


class Run:
    """Output bookkeeping for one subcommand."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.stem = args.command.replace("-", "_")
        self.files: list[str] = []

    def path(self, suffix: str) -> Path:
        p = self.out / f"{self.stem}{suffix}"
        self.files.append(p.name)
        return p

    def provenance(self, status: str) -> Path:
        versions = {"python": platform.python_version()}
        for pkg in ("numpy", "scipy", "matplotlib"):
            try:
                versions[pkg] = metadata.version(pkg)
            except metadata.PackageNotFoundError:
                versions[pkg] = None
        from mixradon import __version__

        versions["mixradon"] = __version__
        config = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        record = {
            "command": self.args.command,
            "config": config,
            "seed": self.args.seed,
            "versions": versions,
            "outputs": sorted(self.files),
            "status": status,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        p = self.out / f"{self.stem}.provenance.json"
        p.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        return p


def _dims(args):
    from mixradon.radial_transforms import Dims

    return Dims(args.n, args.j, args.k)


def _profile(source: str | None):
    """Load a radial profile: a CSV path, ``gaussian`` (bundled) or ``zero``."""
    from mixradon import profiles

    source = source or "gaussian"
    if source == "zero":
        return profiles.zero()
    if source in BUNDLED:
        path = Path(__file__).parent / "data" / BUNDLED[source]
        prof = profiles.read_csv(path)
        return prof
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"profile {source} not found")
    return profiles.read_csv(path)


def _radii(lo: float, hi: float, num: int):
    import numpy as np

    return np.linspace(lo, hi, num)


# }}}


# {{{ subcommands


def cmd_ek(args, run: Run) -> dict:
    """Apply an Erdelyi-Kober integral or derivative to a profile."""
    from mixradon import ekfrac

    f = _profile(args.input)
    alpha = 0.5 if args.alpha is None else args.alpha
    which = args.which or "plus"
    ops = {
        "plus": ekfrac.ek_integral_plus,
        "minus": ekfrac.ek_integral_minus,
        "dplus": ekfrac.ek_derivative_plus,
        "dminus": ekfrac.ek_derivative_minus,
    }
    if which not in ops:
        raise ValueError(f"--which must be one of {sorted(ops)} for ek")
    hi = 4.0 if f.kind == "closed_form" else min(4.0, 0.5 * float(f.grid[-1]))
    t = _radii(0.1, hi, 40)
    vals = ops[which](f, alpha, t)
    write_table(run.path(".csv"), ("t", "value"), (t, vals))
    from mixradon import plotting

    plotting.curves(run.path(".png"), t, {"input": f(t), f"{which} alpha={alpha:g}": vals},
                    xlabel="t", title="Erdelyi-Kober operator")
    return {"operator": which, "alpha": alpha, "points": len(t)}


def cmd_mixed_radial(args, run: Run) -> dict:
    from mixradon import plotting
    from mixradon.radial_transforms import existence_check, mixed_radial

    f = _profile(args.input)
    dims = _dims(args)
    diag = existence_check(f, dims, "forward")
    if not diag.exists:
        from mixradon.errors import ExistenceViolation

        what = "local integrability at 0" if not diag.local_ok else "tail integrability"
        raise ExistenceViolation(f"mixed transform does not exist: {what} fails")
    s = _radii(0.1, 5.0, 50)
    vals = mixed_radial(f, dims, s)
    write_table(run.path(".csv"), ("s", "value"), (s, vals))
    plotting.curves(run.path(".png"), s, {"f0": f(s), "mixed transform": vals}, xlabel="s",
                    title=f"mixed transform n={dims.n}, j={dims.j}, k={dims.k}")
    return {"dims": [dims.n, dims.j, dims.k], "points": len(s)}


def cmd_invert_radial(args, run: Run) -> dict:
    """Invert a mixed-transform profile; without ``--in`` round-trips the bundled Gaussian."""
    import numpy as np

    from mixradon import plotting
    from mixradon.profiles import default_grid, materialize
    from mixradon.radial_transforms import invert_mixed_radial, mixed_radial

    dims = _dims(args)
    t = _radii(0.2, 3.0, 29)
    if args.input:
        g = _profile(args.input)
        rec = invert_mixed_radial(g, dims, t)
        write_table(run.path(".csv"), ("t", "value"), (t, rec))
        plotting.curves(run.path(".png"), t, {"reconstruction": rec}, xlabel="t")
        return {"mode": "invert", "points": len(t)}
    f = _profile("gaussian")
    grid = default_grid(8.0, r_far=64.0)
    g = materialize(lambda s: mixed_radial(f, dims, s), grid, decay_exponent=dims.ell,
                    name="forward")
    rec = invert_mixed_radial(g, dims, t)
    exact = np.exp(-t**2)
    rel = float(np.max(np.abs(rec - exact) / exact))
    tol = args.tol if args.tol is not None else 1e-3
    write_table(run.path(".csv"), ("t", "reconstruction", "exact"), (t, rec, exact))
    plotting.curves(run.path(".png"), t, {"reconstruction": rec, "exp(-t^2)": exact},
                    xlabel="t", error={"abs": rec - exact}, title="radial round trip")
    summary = {"mode": "round_trip", "max_rel_err": rel, "tol": tol, "pass": rel <= tol}
    if rel > tol:
        raise CheckFailed(f"round trip error {rel:.3g} exceeds {tol:g}", summary)
    return summary


def cmd_mixed_mc(args, run: Run) -> dict:
    import numpy as np

    from mixradon import plotting
    from mixradon.grassmann import MCBudget, mixed_transform, plane_at_distance, radial_field
    from mixradon.radial_transforms import mixed_radial

    f0 = _profile(args.input)
    dims = _dims(args)
    budget = MCBudget(n_samples=args.samples or 20_000, seed=args.seed,
                      offset_scale=args.offset_scale)
    fld = radial_field(f0, dims.j)
    s = np.array([0.25, 0.5, 1.0, 1.5, 2.0])
    est = [mixed_transform(fld, plane_at_distance(dims.n, dims.k, float(x)), dims, budget)
           for x in s]
    val = np.array([e.value for e in est])
    err = np.array([e.stderr for e in est])
    ref = mixed_radial(f0, dims, s)
    z = np.where(err > 0, (val - ref) / np.where(err > 0, err, 1.0), 0.0)
    write_table(run.path(".csv"), ("s", "mc", "stderr", "radial"), (s, val, err, ref))
    plotting.curves(run.path(".png"), s, {"monte carlo": val, "radial closed form": ref},
                    xlabel="s", title="mixed transform, Monte Carlo vs radial")
    ok = bool(np.all(np.abs(z) <= 3.0))
    summary = {"z_scores": z.tolist(), "samples": budget.n_samples, "pass": ok}
    if not ok:
        raise CheckFailed("Monte Carlo estimate outside 3 sigma of the radial value", summary)
    return summary


def _verify_report(args):
    from mixradon import identities as idt
    from mixradon.grassmann import MCBudget, radial_field

    name = args.check
    if name not in idt.CHECKS:
        raise ValueError(f"unknown check {name!r}; choose from {sorted(idt.CHECKS)}")
    dims = _dims(args)
    f0 = _profile(args.input)
    budget = MCBudget(n_samples=args.samples or 200_000, seed=args.seed,
                      offset_scale=args.offset_scale)
    kw = {} if args.tol is None else {"tol": args.tol}
    if name == "duality":
        return idt.check_duality(radial_field(f0, dims.j), radial_field(f0, dims.k), dims, budget)
    if name.startswith("dra"):
        dim = dims.j if name in ("dra1", "dra2") else dims.k
        return idt.check_weighted_identity(name, radial_field(f0, dim), dims, args.lam, budget)
    if name == "intertwining":
        alpha = args.alpha if args.alpha is not None else 0.5 * dims.ell
        return idt.check_intertwining(f0, dims, alpha, **kw)
    if name == "fuglede":
        return idt.check_fuglede_mixed(f0, dims, **kw)
    if name == "invert_on_range":
        return idt.invert_on_range(f0, dims, args.alpha or 0.0, **kw)
    return idt.check_gonzalez_consistency(f0, dims, **kw)


def cmd_verify(args, run: Run) -> dict:
    from mixradon import plotting

    if not args.check:
        raise ValueError("verify needs --check NAME")
    rep = _verify_report(args)
    print(rep.line())
    d = rep.as_dict()
    write_table(run.path(".csv"), ("lhs", "rhs", "abs_err", "rel_err", "mc_stderr", "tolerance"),
                ([rep.lhs], [rep.rhs], [rep.abs_err], [rep.rel_err], [rep.mc_stderr],
                 [rep.tolerance]))
    plotting.bars(run.path(".png"), ["abs_err", "tolerance", "3 stderr"],
                  [rep.abs_err, rep.tolerance, 3 * rep.mc_stderr], title=rep.name)
    if not rep.passed:
        raise CheckFailed(f"check {rep.name} failed", d)
    return d


def cmd_funk(args, run: Run) -> dict:
    """Funk transform and inversion of an even zonal harmonic (``--which`` = degree)."""
    import numpy as np
    from scipy.special import eval_legendre

    from mixradon import funk_bridge as fb
    from mixradon import plotting

    deg = int(args.which or 2)
    axis = (0.3, 0.4, np.sqrt(0.75))
    f = fb.zonal_harmonic(deg, axis)
    rng = np.random.default_rng(args.seed)
    th = rng.standard_normal((64, 3))
    th /= np.linalg.norm(th, axis=-1, keepdims=True)
    ff = fb.funk_transform(f, th)
    mult = float(eval_legendre(deg, 0.0))
    phi = fb.SphereField(lambda p: mult * f(p), name=f"F[{f.name}]")
    back = fb.funk_invert(phi, th)
    fv = f(th)
    e_fwd = float(np.max(np.abs(ff - mult * fv)))
    e_inv = float(np.max(np.abs(back - fv)))
    tol = args.tol if args.tol is not None else 1e-2
    write_table(run.path(".csv"), ("x", "y", "z", "f", "funk", "inverse"),
                (th[:, 0], th[:, 1], th[:, 2], fv, ff, back))
    order = np.argsort(th @ np.asarray(axis))
    plotting.curves(run.path(".png"), (th @ np.asarray(axis))[order],
                    {"f": fv[order], "F f": ff[order], "F^-1 F f": back[order]},
                    xlabel="cos(angle to axis)", title=f"Funk transform, degree {deg}")
    summary = {"degree": deg, "multiplier": mult, "forward_err": e_fwd, "inverse_err": e_inv,
               "tol": tol, "pass": e_inv <= tol}
    if e_inv > tol:
        raise CheckFailed("Funk inversion error exceeds tolerance", summary)
    return summary


def cmd_radon2d(args, run: Run) -> dict:
    """Line integrals of the planar Gaussian through the Funk transform and the round trip."""
    import numpy as np

    from mixradon import funk_bridge as fb
    from mixradon import plotting

    g = fb.PlaneFunction(lambda x: np.exp(-np.sum(x**2, axis=-1)), name="gaussian")
    ang = np.pi * np.arange(16) / 16
    ts = np.linspace(-2.0, 2.0, 16)
    A, T = np.meshgrid(ang, ts)
    eta = np.stack([np.cos(A), np.sin(A)], axis=-1)
    via = fb.radon_via_funk(g, eta, T)
    direct = fb.radon_direct(g, eta, T)
    e_fwd = float(np.max(np.abs(via - direct) / np.abs(direct)))
    h = fb.HyperplaneField(lambda e, t: np.sqrt(np.pi) * np.exp(-t**2), name="radon gaussian")
    r = np.linspace(0.0, 2.0, 9)
    pts = np.stack([r * np.cos(0.7), r * np.sin(0.7)], axis=-1)
    back = fb.radon_invert(h, pts)
    e_inv = float(np.max(np.abs(back - np.exp(-r**2))))
    tol = args.tol if args.tol is not None else 1e-2
    write_table(run.path(".csv"), ("angle", "t", "via_funk", "direct"),
                (A.ravel(), T.ravel(), via.ravel(), direct.ravel()))
    plotting.heatmap(run.path(".png"), ang, ts, via, xlabel="normal angle", ylabel="t",
                     title="line integrals via the Funk transform")
    summary = {"forward_rel_err": e_fwd, "round_trip_err": e_inv, "tol": tol,
               "pass": e_fwd <= 1e-3 and e_inv <= tol}
    if not summary["pass"]:
        raise CheckFailed("planar Radon check failed", summary)
    return summary


def _codim1_inputs(args, run: Run):
    """Manifest and phi samples: read from ``--in`` or generated from the bundled Gaussian."""
    import numpy as np

    from mixradon import funk_bridge as fb
    from mixradon.grassmann import radial_field
    from mixradon.profiles import default_grid, materialize
    from mixradon.radial_transforms import Dims, mixed_radial

    if args.input:
        manifest = json.loads(Path(args.input).read_text())
        values_path = Path(args.input).parent / manifest["values_csv"]
        with values_path.open(newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        vals = np.array([float(r[-1]) for r in rows])
        expected = len(manifest["chi"]) * len(manifest["w"]) * len(manifest["a"])
        if vals.size != expected:
            from mixradon.errors import InterpolationGap

            raise InterpolationGap(f"{vals.size} phi samples for a grid of {expected}")
        return fb.Codim1Samples.from_manifest(manifest, vals), manifest.get("source")
    f0 = _profile("gaussian")
    dims = Dims(3, 1, 1)
    grid = default_grid(8.0, r_far=64.0)
    phi0 = materialize(lambda s: mixed_radial(f0, dims, s), grid, decay_exponent=1.0,
                       name="phi0")
    xi = np.array([1.0, 2.0, 2.0]) / 3.0
    samples = fb.sample_codim1(radial_field(phi0, 1), xi)
    manifest = samples.manifest() | {"values_csv": f"{run.stem}_phi.csv", "source": "gaussian",
                                     "value_scaling": "phi * sqrt(1 + |y|^2)"}
    # full precision: the grid axes are re-checked for uniformity on reload
    run.path("_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    y = samples.offsets().reshape(-1, 3)
    e = np.broadcast_to(samples.etas()[:, None, None, :], samples.values.shape + (3,))
    e = e.reshape(-1, 3)
    write_table(run.path("_phi.csv"), ("eta_x", "eta_y", "eta_z", "y_x", "y_y", "y_z", "value"),
                (*e.T, *y.T, samples.values.ravel()))
    return samples, "gaussian"


def cmd_invert_codim1(args, run: Run) -> dict:
    import numpy as np

    from mixradon import funk_bridge as fb
    from mixradon import plotting
    from mixradon.grassmann import AffinePlane
    from mixradon.radial_transforms import Dims

    samples, source = _codim1_inputs(args, run)
    tau = AffinePlane(samples.xi[None], np.zeros(3))
    radii = np.array([0.5, 1.0, 1.5])
    ang = np.array([0.0, 0.9, 2.1])
    dirs = np.cos(ang)[:, None] * samples.frame[0] + np.sin(ang)[:, None] * samples.frame[1]
    rec = fb.invert_codim1(samples, Dims(3, 1, 1), tau, offsets=radii[:, None] * dirs)
    summary = {"radii": radii.tolist(), "values": rec.tolist()}
    cols = [radii, rec]
    header = ["u", "value"]
    if source == "gaussian":
        exact = _profile("gaussian")(radii)
        rel = np.abs(rec - exact) / exact
        tol = args.tol if args.tol is not None else 5e-2
        summary |= {"max_rel_err": float(rel.max()), "tol": tol, "pass": bool(rel.max() <= tol)}
        cols.append(exact)
        header.append("exact")
    write_table(run.path(".csv"), header, cols)
    plotting.curves(run.path(".png"), radii,
                    {"reconstruction": rec} | ({"exact": cols[2]} if len(cols) > 2 else {}),
                    xlabel="|u|", title="codimension-one reconstruction")
    if summary.get("pass") is False:
        raise CheckFailed("codimension-one reconstruction error exceeds tolerance", summary)
    return summary


def cmd_constants(args, run: Run) -> dict:
    from mixradon import plotting
    from mixradon.radial_transforms import GammaConstants

    consts = GammaConstants(_dims(args)).as_dict(args.lam)
    if args.which:
        if args.which not in consts:
            raise ValueError(f"unknown constant {args.which!r}; choose from {sorted(consts)}")
        consts = {args.which: consts[args.which]}
    for k in sorted(consts):
        print(f"{k} = {_fmt(consts[k])}")
    names = sorted(consts)
    write_table(run.path(".csv"), ("index", "value"), (range(len(names)), [consts[k] for k in names]))
    plotting.bars(run.path(".png"), names, [consts[k] for k in names], title="Gamma constants")
    return consts


COMMANDS = {
    "ek": (cmd_ek, "apply an Erdelyi-Kober integral/derivative to a CSV profile"),
    "mixed-radial": (cmd_mixed_radial, "radial closed form of the mixed transform"),
    "invert-radial": (cmd_invert_radial, "invert a radial mixed-transform profile"),
    "mixed-mc": (cmd_mixed_mc, "Monte Carlo mixed transform vs the radial closed form"),
    "verify": (cmd_verify, "run an identity check by name"),
    "funk": (cmd_funk, "Funk transform and its inversion on even harmonics"),
    "radon2d": (cmd_radon2d, "planar line integrals via the Funk transform, and inversion"),
    "invert-codim1": (cmd_invert_codim1, "reconstruct a line function in R^3 from R_{1,1} f"),
    "constants": (cmd_constants, "named Gamma constants as JSON"),
}

# }}}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixradon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, (func, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--n", type=int, default=4)
        sp.add_argument("--j", type=int, default=1)
        sp.add_argument("--k", type=int, default=1)
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--in", dest="input", default=None,
                        help="input CSV/JSON path, or 'gaussian' / 'zero'")
        sp.add_argument("--out", default="mixradon_out", help="output directory")
        sp.add_argument("--check", default=None)
        sp.add_argument("--which", default=None)
        sp.add_argument("--lambda", dest="lam", type=float, default=None)
        sp.add_argument("--alpha", type=float, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--offset-scale", dest="offset_scale", type=float, default=1.0)
        sp.add_argument("--config", default=None,
                        help="JSON run config; explicit flags take precedence")
    return p


# JSON config keys and the flags they stand for
CONFIG_KEYS = {
    "n": "--n", "j": "--j", "k": "--k", "seed": "--seed", "n_samples": "--samples",
    "samples": "--samples", "offset_scale": "--offset-scale", "tol": "--tol",
    "lambda": "--lambda", "alpha": "--alpha", "check": "--check", "which": "--which",
    "in": "--in", "threads": "--threads",
}


def expand_config(argv: list[str]) -> list[str]:
    """Splice ``--config FILE`` into flag tokens placed before the explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    with open(argv[i + 1]) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    unknown = sorted(set(cfg) - set(CONFIG_KEYS))
    if unknown:
        raise ValueError(f"unknown config keys {unknown}")
    extra = []
    for key, val in cfg.items():
        if val is not None:
            extra += [CONFIG_KEYS[key], str(val)]
    rest = argv[:i] + argv[i + 2:]
    return rest[:1] + extra + rest[1:]


def _cap_threads(n: int | None) -> None:
    if not n:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return
    threadpool_limits(n)


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = expand_config(argv)
    except (OSError, ValueError) as exc:
        print(f"usage error: config: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _cap_threads(args.threads)

    from mixradon.errors import (
        BudgetExhausted,
        ExtrapolationDiverged,
        InterpolationGap,
        RadonError,
    )

    run = Run(args)
    status, code = "ok", 0
    try:
        summary = args.func(args, run)
    except CheckFailed as exc:
        summary = exc.args[1] if len(exc.args) > 1 else {}
        print(f"check failed: {exc.args[0]}", file=sys.stderr)
        status, code = "check_failed", 1
    except (BudgetExhausted, ExtrapolationDiverged, InterpolationGap) as exc:
        summary = {"error": type(exc).__name__, "message": str(exc)}
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        status, code = "numerical_failure", 1
    except (RadonError, ValueError, OSError, KeyError) as exc:
        summary = {"error": type(exc).__name__, "message": str(exc)}
        print(f"usage error: {type(exc).__name__}: {exc}", file=sys.stderr)
        status, code = "usage_error", 2
    write_json(run.path(".json"), summary)
    run.provenance(status)
    return code


if __name__ == "__main__":
    sys.exit(main())
