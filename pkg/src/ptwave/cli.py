"""Command-line front end.

    ptwave profile find              --config C [--out DIR]
    ptwave evans map                 --config C [--profile P] [--out DIR] [--threads N]
    ptwave verify theorem1           --config C [--profile P] [--out DIR] [--threads N] [--seed N]
    ptwave dispersion hyperbolicity  --config C [--profile P] [--out DIR] [--threads N]

Every flag can also be set through an environment variable with the prefix
``PTWAVE_`` (``PTWAVE_CONFIG``, ``PTWAVE_PROFILE``, ``PTWAVE_OUT``,
``PTWAVE_THREADS``, ``PTWAVE_SEED``); command-line flags take precedence.
Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import build_system, load_config
from .errors import ConfigError, SolverError
from .util import fmt

ENV_PREFIX = "PTWAVE_"
SVG_SALT = "ptwave"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}")


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", default=_env("CONFIG"), help="YAML or JSON run configuration")
    p.add_argument("--profile", default=_env("PROFILE"), help="profile JSON from `profile find`")
    p.add_argument("--out", default=_env("OUT"), help="output directory")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for sweeps (results merged in input order)")
    p.add_argument("--seed", type=int, default=None, help="sampling seed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ptwave", description="Low-frequency Evans function analysis of "
                     "periodic traveling waves of viscous conservation laws.")
    top = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)
    groups = {"profile": ["find"], "evans": ["map"], "verify": ["theorem1"],
              "dispersion": ["hyperbolicity"]}
    for g, cmds in groups.items():
        gp = top.add_parser(g)
        sub = gp.add_subparsers(dest="command", required=True, parser_class=_Parser)
        for c in cmds:
            _common(sub.add_parser(c))
    return parser


# helpers ------------------------------------------------------------------

def _outdir(args, cfg) -> Path:
    out = Path(args.out or cfg.get("output", {}).get("dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _find_profile(system, sec: dict):
    from .profile import (DEFAULT_SAMPLES, ProfileParams, constant_profile, continue_amplitude,
                          find_periodic)
    m = int(sec.get("samples", DEFAULT_SAMPLES))
    d = system.d
    if "constant" in sec:
        c = sec["constant"]
        return constant_profile(system, c["state"], c.get("X", 2 * np.pi), m)
    s = float(sec.get("s", 0.0))
    delta = sec.get("delta")
    q = sec.get("q")
    if "continuation" in sec:
        c = sec["continuation"]
        params = ProfileParams.make(c["center"], s=s, q=q, delta=delta, d=d)
        unknowns = tuple(sec.get("unknowns", ("X", "s")))
        return continue_amplitude(system, params, c["center"], c["amplitudes"], unknowns=unknowns,
                                  direction=c.get("direction"), m=m)[-1]
    for key in ("anchor", "X"):
        if key not in sec:
            raise ConfigError(f"profile section needs '{key}' (or 'continuation' / 'constant')")
    params = ProfileParams.make(sec["anchor"], s=s, q=q, delta=delta, d=d)
    res = find_periodic(system, params, float(sec["X"]), unknowns=tuple(sec.get("unknowns", ("a", "X"))),
                        m=m, tol=float(sec.get("tol", 1e-12)), maxiter=int(sec.get("maxiter", 30)))
    return res.profile


def _load_profile(args, cfg, system):
    from .profile import PeriodicProfile
    if args.profile:
        prof = PeriodicProfile.load(args.profile)
        if prof.system_hash and prof.system_hash != system.system_hash():
            raise ConfigError("profile file was computed for a different system")
        return prof
    sec = cfg.get("profile", {})
    if "constant" in sec:
        return _find_profile(system, sec)
    raise ConfigError("--profile is required (or a 'profile.constant' section)")


def _evans(cfg, system, prof):
    from .evans import EvansFunction
    sec = cfg.get("analysis", {}).get("evans", {})
    return EvansFunction(system, prof, method=sec.get("method", "magnus"), steps=int(sec.get("steps", 1024)))


def _jacobians(args, cfg, system, prof_loader):
    """Homogenized Jacobians from ``analysis.jacobians.file`` or by differencing the family."""
    from .manifold import FamilyChart, HomogenizedJacobians, homogenized_jacobians
    sec = cfg.get("analysis", {}).get("jacobians", {})
    if "file" in sec:
        import json
        try:
            with open(sec["file"]) as fh:
                return HomogenizedJacobians.from_dict(json.load(fh)), False
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read Jacobians file: {exc}") from exc
    prof = prof_loader()
    chart = FamilyChart(system, prof, dependent=sec.get("dependent"), h=float(sec.get("h", 1e-5)))
    return homogenized_jacobians(chart, threads=args.threads, max_error=float(sec.get("max_error", 1e-5))), True


def _svg(fig, path):
    import matplotlib
    matplotlib.rcParams["svg.hashsalt"] = SVG_SALT
    fig.savefig(path, format="svg", metadata={"Date": None})


def _figure(ncols: int = 1):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    fig, axes = plt.subplots(1, ncols, figsize=(4.5 * ncols, 4), squeeze=False)
    return plt, fig, axes[0]


# commands -----------------------------------------------------------------

def cmd_profile_find(args, cfg) -> int:
    system = build_system(cfg)
    prof = _find_profile(system, cfg.get("profile", {}))
    out = _outdir(args, cfg)
    prof.save(out / "profile.json")
    print(f"X = {fmt(prof.X)}")
    print(f"s = {fmt(prof.params.s)}")
    print(f"amplitude = {fmt(prof.amplitude)}")
    print(f"closure residual = {fmt(prof.closure_residual)}")
    print(f"wrote {out / 'profile.json'}")
    return 0


def cmd_evans_map(args, cfg) -> int:
    from .evans import find_roots
    from .errors import ContourError
    system = build_system(cfg)
    grid = cfg.get("analysis", {}).get("grid")
    if not grid:
        raise ConfigError("analysis.grid is required for `evans map`")
    prof = _load_profile(args, cfg, system)
    ev = _evans(cfg, system, prof)
    re = np.asarray(grid["lambda_re"], dtype=float)
    im = np.asarray(grid["lambda_im"], dtype=float)
    xis = [np.asarray(x, dtype=float) for x in grid["xi"]]
    for x in xis:
        if x.size != system.d:
            raise ConfigError(f"grid xi entries need {system.d} components")
    lam = (re[None, :] + 1j * im[:, None]).ravel()
    oracle = None
    if cfg["system"]["builtin"] == "constant_coefficient":
        from .oracle import ConstCoeffSystem
        p = cfg["system"]["params"]
        oracle = ConstCoeffSystem(A=p["A"], B=p.get("B"), X=prof.X)

    def sweep(x):
        D, ls = ev.evaluate(lam, x[0], x[1:])
        closed = None
        if oracle is not None:
            from .oracle import evans_closed_form
            closed = np.array([evans_closed_form(oracle, l, x[0], x[1:]) for l in lam])
        return D, ls, closed

    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            results = list(pool.map(sweep, xis))
    else:
        results = [sweep(x) for x in xis]
    out = _outdir(args, cfg)
    head = ["re_lambda", "im_lambda"] + [f"xi{j + 1}" for j in range(system.d)] + ["re_D", "im_D", "log_scale"]
    if oracle is not None:
        head += ["re_D_closed_form", "im_D_closed_form"]
    with open(out / "evans_map.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(head)
        for x, (D, ls, closed) in zip(xis, results):
            for i, l in enumerate(lam):
                row = [l.real, l.imag, *x, D[i].real, D[i].imag, float(ls[i])]
                if closed is not None:
                    row += [closed[i].real, closed[i].imag]
                w.writerow([fmt(v) for v in row])
    svg = cfg.get("output", {}).get("svg", True)
    if svg:
        contour = cfg.get("analysis", {}).get("contour")
        plt, fig, axes = _figure(len(xis))
        for ax, x, (D, ls, _) in zip(axes, xis, results):
            Dg = D.reshape(im.size, re.size)
            logabs = np.log10(np.abs(Dg) + 1e-300) + ls.reshape(Dg.shape) / np.log(10)
            if re.size > 1 and im.size > 1:
                mesh = ax.pcolormesh(re, im, logabs, shading="nearest", cmap="viridis")
                fig.colorbar(mesh, ax=ax, label="log10 |D|")
                for part, style in ((Dg.real, "-"), (Dg.imag, "--")):
                    if part.min() < 0 < part.max():
                        ax.contour(re, im, part, levels=[0.0], colors="w", linestyles=style, linewidths=0.8)
            if contour:
                c = complex(*contour.get("center", [0.0, 0.0]))
                try:
                    roots = find_roots(ev, x, c, float(contour.get("radius", 1e-2)))
                    ax.plot(roots.real, roots.imag, "r+", ms=9)
                except ContourError:
                    ax.set_title("root search failed", fontsize=8, loc="right")
            ax.set_xlabel("Re lambda")
            ax.set_ylabel("Im lambda")
            ax.set_title("xi = (" + ", ".join(f"{v:g}" for v in x) + ")", fontsize=9)
        fig.tight_layout()
        _svg(fig, out / "evans_map.svg")
        plt.close(fig)
    print(f"wrote {out / 'evans_map.csv'} ({len(xis) * lam.size} rows)")
    return 0


def cmd_verify_theorem1(args, cfg) -> int:
    from .dispersion import check_nondegenerate
    from .variational import assemble_delta1, solve_variations
    from .verify import verify_theorem1
    system = build_system(cfg)
    prof = None

    def loader():
        nonlocal prof
        if prof is None:
            prof = _load_profile(args, cfg, system)
        return prof

    H, computed = _jacobians(args, cfg, system, loader)
    check_nondegenerate(H)
    prof = loader()
    ev = _evans(cfg, system, prof)
    leading = None
    if system.laplacian_flag and abs(prof.params.s) <= 1e-10 and not np.any(prof.params.delta):
        leading = assemble_delta1(solve_variations(system, prof))
    sec = cfg.get("analysis", {}).get("theorem1", {})
    rep = verify_theorem1(ev.at, H, int(sec.get("directions", 10)), rho0=float(sec.get("rho0", 1e-2)),
                          K=int(sec.get("K", 6)), seed=args.seed, lam_min=float(sec.get("lam_min", 0.3)),
                          symmetric=bool(sec.get("symmetric", False)), levels=int(sec.get("levels", 3)),
                          spread_tol=float(sec.get("spread_tol", 1e-2)), leading=leading,
                          threads=args.threads)
    out = _outdir(args, cfg)
    if computed:
        H.save(out / "jacobians.json")
    rep.save(out / "theorem1.json")
    print(rep.summary())
    return 0


def cmd_dispersion_hyperbolicity(args, cfg) -> int:
    from .dispersion import hyperbolicity_verdict
    from .model import sphere_directions
    system = build_system(cfg)
    H, computed = _jacobians(args, cfg, system, lambda: _load_profile(args, cfg, system))
    sec = cfg.get("analysis", {}).get("dispersion", {})
    count = int(sec.get("samples", 64 if H.d == 2 else 242))
    samples = sphere_directions(H.d, count)
    rep = hyperbolicity_verdict(H, samples, tol=float(sec.get("tol", 1e-6)))
    out = _outdir(args, cfg)
    if computed:
        H.save(out / "jacobians.json")
    rep.save(out / "dispersion.json")
    rep.write_csv(out / "dispersion.csv")
    if cfg.get("output", {}).get("svg", True):
        plt, fig, axes = _figure()
        ax = axes[0]
        t = np.arange(len(rep.directions))
        if H.d == 2:
            t = np.array([np.arctan2(r.xi_hat[1], r.xi_hat[0]) for r in rep.directions])
        A = np.array([r.a for r in rep.directions])
        for j in range(A.shape[1]):
            ax.plot(t, A[:, j].imag, ".", ms=4, label=f"Im a{j + 1}")
        ax.set_xlabel("direction angle" if H.d == 2 else "direction index")
        ax.set_ylabel("Im a_j")
        ax.legend(fontsize=8)
        ax.set_title("weakly hyperbolic" if rep.weakly_hyperbolic else "not weakly hyperbolic", fontsize=9)
        fig.tight_layout()
        _svg(fig, out / "dispersion.svg")
        plt.close(fig)
    print(f"det P = {fmt(rep.det_P)}")
    print(f"weakly hyperbolic: {'yes' if rep.weakly_hyperbolic else 'no'}")
    print(f"verdict from Delta roots: {'yes' if rep.root_verdict else 'no'}")
    return 0


COMMANDS = {("profile", "find"): cmd_profile_find, ("evans", "map"): cmd_evans_map,
            ("verify", "theorem1"): cmd_verify_theorem1,
            ("dispersion", "hyperbolicity"): cmd_dispersion_hyperbolicity}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        for name, default in (("threads", "1"), ("seed", "0")):
            if getattr(args, name) is None:
                raw = _env(name.upper(), default)
                try:
                    setattr(args, name, int(raw))
                except ValueError:
                    raise ConfigError(f"{ENV_PREFIX}{name.upper()} must be an integer, got {raw!r}") from None
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if not args.config:
            raise ConfigError("--config is required")
        cfg = load_config(args.config)
        return COMMANDS[(args.group, args.command)](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
