"""Command-line front end.

Exit codes: 0 ok, 2 solvability conditions fail, 3 a residual exceeds its
bound, 64 bad configuration, 65 contour construction, 66 solver failure,
67 spectrum meets the contour, 68 oracle failure, 70 any other library error.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import errors as E
from .config import RunConfig, dump_json, load_config
from .contour import admissibility
from .factorization import (adjoint_relation_residual, adjoint_spectrum_gap, default_loops,
                            eigenprojection_residues,
                            factorization_residual, omega_identities, region_samples, solve_pair,
                            w1_inverse_check)
from .linalg import TOL_EIG, match_multisets
from .oracle import SWEEP_COLUMNS, find_transfer_zeros, o_region_rectangles, resonance_sweep, schur_identity_check
from .solver import solve_basic_equation, spectrum_H1
from .transfer import m1_continued

log = logging.getLogger("resfact")

EXIT_OK, EXIT_NOT_ADMISSIBLE, EXIT_RESIDUAL, EXIT_CONFIG = 0, 2, 3, 64
_EXIT_BY_ERROR = [
    (E.ConfigError, EXIT_CONFIG),
    (E.NotAdmissible, EXIT_NOT_ADMISSIBLE),
    (E.ContourError, 65),
    (E.OutsideHolomorphyDomain, 65),
    (E.NoConvergence, 66),
    (E.SpectrumMeetsContour, 67),
    (E.NearContour, 67),
    (E.UnresolvedRegion, 68),
    (E.IllConditionedSample, 68),
    (E.ResfactError, 70),
]

# contracted bounds checked by `verify`
BOUNDS = {
    "factorization": 1e-6,
    "m_omega": 1e-6,
    "h_omega_left": 1e-6,
    "h_omega_right": 1e-6,
    "similarity": 1e-6,
    "omega_adjoint": 1e-8,
    "residue_pp_left": 1e-6,
    "residue_pp_right": 1e-6,
    "adjoint": 1e-6,
    "adjoint_spectrum": 1e-8,
    "spectral_equality": 1e-6,
    "contour_independence": 1e-6,
    "schur_identity": 1e-10,
}


def exit_code_for(exc: BaseException) -> int:
    for cls, code in _EXIT_BY_ERROR:
        if isinstance(exc, cls):
            return code
    raise exc


class Artifacts:
    """Collects outputs and writes them only once the command has finished."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[str, str] = {}

    def json(self, name, payload):
        self.files[name] = dump_json(payload) + "\n"

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self.files[name] = buf.getvalue()

    def commit(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            fd, tmp = tempfile.mkstemp(dir=self.out_dir, prefix=f".{name}.")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.chmod(tmp, 0o644)
            os.replace(tmp, self.out_dir / name)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def _meta(cfg: RunConfig, contour=None, **extra):
    tol = {"solver": cfg.tol, "eig": TOL_EIG}
    if contour is not None:
        tol["quadrature"] = contour.tol_quad
        tol["tail"] = contour.tail_error_bound
    out = {"config_sha256": cfg.source_hash, "tolerances": tol, "seed": cfg.seed}
    if contour is not None:
        out["contour"] = contour.describe()
    out.update(extra)
    return out


def _sheet(cfg, args):
    return args.sheet if args.sheet is not None else int(cfg.contour.get("l", 1))


# ---------------------------------------------------------------------------
# subcommands; each returns an exit code and fills `art`


def cmd_admissibility(cfg, args, art) -> int:
    model = cfg.build_model()
    contour = cfg.build_contour(model, _sheet(cfg, args))
    rep = admissibility(model, contour)
    art.json("admissibility.json", {"report": rep.to_dict(), **_meta(cfg, contour)})
    return EXIT_OK if rep.admissible else EXIT_NOT_ADMISSIBLE


def _solve(cfg, args, model, contour):
    return solve_basic_equation(model, contour, cfg.tol, cfg.max_iter, cfg.allow_noncertified)


def cmd_solve(cfg, args, art) -> int:
    model = cfg.build_model()
    contour = cfg.build_contour(model, _sheet(cfg, args))
    rep = _solve(cfg, args, model, contour)
    art.json("solve.json", {"report": rep.to_dict(), **_meta(cfg, contour)})
    return EXIT_OK if rep.certified else EXIT_RESIDUAL


def cmd_spectrum(cfg, args, art) -> int:
    model = cfg.build_model()
    l = _sheet(cfg, args)
    contour = cfg.build_contour(model, l)
    rep = _solve(cfg, args, model, contour)
    rows = []
    bound = 10 * (cfg.tol + contour.tol_quad)
    worst = 0.0
    for lam, v, res in spectrum_H1(rep):
        transport = float(np.linalg.norm(m1_continued(model, contour, lam) @ v))
        worst = max(worst, transport)
        rows.append([lam.real, lam.imag, res, transport, l])
    art.csv("spectrum.csv", ["re_lambda", "im_lambda", "eig_residual", "transfer_residual", "sheet"], rows)
    ok = rep.certified and worst <= bound
    return EXIT_OK if ok else EXIT_RESIDUAL


def cmd_verify(cfg, args, art) -> int:
    model = cfg.build_model()
    l = _sheet(cfg, args)
    contour = cfg.build_contour(model, l)
    rng = np.random.default_rng(cfg.seed)
    count = int(cfg.verify.get("z_sample_count", 20))
    points = int(cfg.verify.get("circle_points", 64))
    pair = solve_pair(model, contour, cfg.tol, cfg.max_iter, cfg.allow_noncertified)
    rho = pair.region_radius
    zs = region_samples(model, rho, count, rng)
    res = {}
    res["factorization"] = factorization_residual(model, contour, pair.report, zs)
    ids = omega_identities(model, contour, pair, default_loops(pair, points))
    res.update(ids)
    res["adjoint"] = adjoint_relation_residual(model, contour, pair.mirror, pair, zs)
    res["adjoint_spectrum"] = adjoint_spectrum_gap(pair)
    w_inv, w_dev, w_bound = w1_inverse_check(model, contour, pair, zs)
    res.update({"w1_inverse_max": w_inv, "w1_inverse_bound": w_bound, "w1_minus_identity_max": w_dev})
    lam = _isolated_eigenvalue(pair)
    if lam is not None:
        ep = eigenprojection_residues(model, contour, pair, lam, points=points)
        res.update({"residue_pp_left": ep["residue_pp_left"], "residue_pp_right": ep["residue_pp_right"],
                    "residue_lambda": ep["lambda"]})
    ev = np.linalg.eigvals(pair.H)
    gap = 0.0
    for region in o_region_rectangles(model, rho):
        zeros = find_transfer_zeros(model, contour, region)
        gap = max(gap, match_multisets(zeros, ev[region.contains(ev)]))
    res["spectral_equality"] = gap
    other = cfg.second_contour(model, l)
    rep_b = solve_basic_equation(model, other, cfg.tol, cfg.max_iter, cfg.allow_noncertified)
    res["contour_independence"] = float(np.linalg.norm(pair.report.X - rep_b.X, 2))
    dfm = cfg.discretization(model)
    if dfm is not None:
        samples = 2.0 * rng.standard_normal(count) + 1j * (0.1 + np.abs(rng.standard_normal(count)))
        res["schur_identity"] = schur_identity_check(dfm, samples)

    checks = {k: bool(res[k] <= b) for k, b in BOUNDS.items() if k in res}
    checks["omega_norm"] = bool(res["omega_norm"] < 1)
    checks["w1_inverse"] = bool(w_inv <= 1.05 * w_bound)
    checks["w1_deviation"] = bool(w_dev < 1)
    checks["certified"] = bool(pair.report.certified and pair.report_mirror.certified)
    art.json("identity_residuals.json", {
        "residuals": res, "bounds": BOUNDS, "checks": checks, "passed": all(checks.values()),
        **_meta(cfg, contour, region_radius=rho)})
    return EXIT_OK if all(checks.values()) else EXIT_RESIDUAL


def _isolated_eigenvalue(pair):
    """Eigenvalue with the largest imaginary part that is well separated
    from the rest of the spectrum, if any."""
    ev = np.linalg.eigvals(pair.H)
    for k in np.argsort(-np.abs(ev.imag)):
        others = np.delete(ev, k)
        if others.size == 0 or np.abs(others - ev[k]).min() > 1e-3:
            return complex(ev[k])
    return None


def cmd_sweep(cfg, args, art) -> int:
    model = cfg.build_model()
    l = _sheet(cfg, args)
    contour = cfg.build_contour(model, l)
    s_max = args.s_max if args.s_max is not None else float(cfg.sweep.get("s_max", 1.0))
    steps = args.steps if args.steps is not None else int(cfg.sweep.get("steps", 10))
    if not s_max > 0 or steps < 1:
        raise E.ConfigError("sweep needs s_max > 0 and steps >= 1")
    rows = resonance_sweep(model, s_max, steps, contour, cfg.tol, cfg.max_iter)
    art.csv("sweep.csv", list(SWEEP_COLUMNS), [[r[c] for c in SWEEP_COLUMNS] for r in rows])
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_RESIDUAL


def cmd_continue_eval(cfg, args, art) -> int:
    model = cfg.build_model()
    l = _sheet(cfg, args)
    contour = cfg.build_contour(model, l)
    g = cfg.grid
    spec = model.spectrum_tilde_a1
    re_min = float(g.get("re_min", spec.min() - 0.5))
    re_max = float(g.get("re_max", spec.max() + 0.5))
    im_min = float(g.get("im_min", -0.5 * contour.height))
    im_max = float(g.get("im_max", 0.5 * contour.height))
    nre, nim = int(g.get("nre", 41)), int(g.get("nim", 21))
    if nre < 1 or nim < 1 or re_max < re_min or im_max < im_min:
        raise E.ConfigError("invalid grid specification")
    rows = []
    for y in np.linspace(im_min, im_max, nim):
        for x in np.linspace(re_min, re_max, nre):
            z = complex(x, y)
            if contour.too_close(z):
                rows.append([x, y, float("nan"), float("nan"), l])
                continue
            M = m1_continued(model, contour, z)
            s = np.linalg.svd(M, compute_uv=False)
            rows.append([x, y, float(np.prod(s)), float(s[-1]), l])
    art.csv("continue_eval.csv", ["re_z", "im_z", "abs_det", "sigma_min", "sheet"], rows)
    return EXIT_OK


COMMANDS = {
    "admissibility": cmd_admissibility,
    "solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "continue-eval": cmd_continue_eval,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resfact", description=__doc__.splitlines()[0])
    p.add_argument("config", help="YAML or JSON run configuration")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--out-dir", default=".", help="directory for output artifacts")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--sheet", type=int, choices=(1, -1), default=None, help="sheet index (default: contour.l)")
    p.add_argument("--tol", type=float, default=None, help="fixed-point step tolerance")
    p.add_argument("--max-iter", type=int, default=None, help="iteration limit")
    p.add_argument("--allow-noncertified", action="store_true",
                   help="run even if the solvability conditions fail")
    p.add_argument("--s-max", type=float, default=None, help="largest coupling factor of a sweep")
    p.add_argument("--steps", type=int, default=None, help="number of sweep steps")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    art = Artifacts(Path(args.out_dir))
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tol is not None:
            if not args.tol > 0:
                raise E.ConfigError("--tol must be positive")
            cfg.solver["tol"] = args.tol
        if args.max_iter is not None:
            if args.max_iter < 1:
                raise E.ConfigError("--max-iter must be positive")
            cfg.solver["max_iter"] = args.max_iter
        if args.allow_noncertified:
            cfg.solver["allow_noncertified"] = True
        code = COMMANDS[args.command](cfg, args, art)
    except E.ResfactError as exc:
        code = exit_code_for(exc)
        log.error("%s failed in %s: %s", args.command, type(exc).__name__, exc)
        if code == EXIT_CONFIG:
            return code
        # keep whatever the command produced before failing, plus the error
        art.json("error.json", {"command": args.command, "error": type(exc).__name__,
                                "message": str(exc), "exit_code": code})
    art.commit()
    return code


if __name__ == "__main__":
    sys.exit(main())
