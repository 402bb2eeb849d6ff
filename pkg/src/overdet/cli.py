"""Command-line front end: ``overdet {profile,spectrum,bifurcate,verify,sweep}``.

Exit status is 0 when every requested check passes, 1 on a numerical
failure (the message names the failing check and its tolerance) and 2 on
a usage or configuration error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, OverdetError
from .pipeline import convergence_sweep, run_pipeline, BranchReport
from .pullback import build_first_order_state, physical_boundary, residual_scaling_study
from .radial_ode import build_profile, integrate_ivp, locate_critical_points
from .sturm_liouville import BifurcationDatum, compute_datum

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

CONVERGENCE_FIELDS = ("n", "lambda_m", "lambda_m_error", "delta_m", "delta_m_error",
                      "beta_m", "beta_m_error", "kernel_residual")

_CHECK_TOLERANCES = {
    "closed_form": lambda c: f"|U''(1) + mu^2|c|^(p-2)c| <= {c.tol_closed_form:g}",
    "identity": lambda c: f"relative discrepancy <= {c.tol_identity:g}",
    "backend_agreement": lambda c: f"gamma_1 within {c.tol_gamma:g}, delta_m within {c.tol_delta:g}",
    "kernel": lambda c: f"ratio >= {c.kernel_ratio:g} per doubling or floor {c.kernel_floor:g}",
    "transversality": lambda c: f"pointwise error <= {c.tol_transversality:g}, pairing < 0",
    "residual_scaling": lambda c: f"slope in [{c.slope_min:g}, {c.slope_max:g}], boundary <= 1e-12",
    "kernel_simplicity": lambda c: "unique (l, j) = (1, 1)",
    "negative_ground_state": lambda c: "gamma_1 < 0",
}


def _common_parser():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("problem")
    g.add_argument("--N", type=int, help="spatial dimension")
    g.add_argument("--p", type=float, help="nonlinearity exponent")
    g.add_argument("--k", type=int, help="branches m = 1..k-2 are computed")
    g.add_argument("--m", type=int, help="restrict to a single branch")
    g.add_argument("--oracle-mode", action="store_true", default=None,
                   help="allow the linear limit p = 2")
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="flat key=value config file")
    g.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    g = p.add_argument_group("output")
    g.add_argument("--format", choices=("json", "csv", "both"), default="both")
    g.add_argument("--output-dir", type=Path,
                   help=f"defaults to ${io.ENV_OUTPUT_DIR} or the current directory")
    g.add_argument("--figures", action="store_true", help="also write PNG figures")
    return p


def build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="overdet",
        description="Bifurcating solutions of the overdetermined Neumann problem "
                    "on perturbed cylinders R^N x R/2piZ.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("profile", parents=[common], help="radial IVP, mu_m and c_m")
    sub.add_parser("spectrum", parents=[common], help="Dirichlet spectra of the linearization")
    b = sub.add_parser("bifurcate", parents=[common],
                       help="bifurcation constants and first-order boundary curves")
    b.add_argument("--s", type=float, default=1e-2, help="branch parameter for the curves")
    sub.add_parser("verify", parents=[common], help="all verification checks per branch")
    s = sub.add_parser("sweep", parents=[common],
                       help="residual scaling study and resolution sweep")
    s.add_argument("--resolutions", type=int, nargs="+", default=[256, 512, 1024, 2048])
    s.add_argument("--backend", choices=("finite_difference", "collocation"),
                   default="finite_difference")
    return parser


class _Writer:
    def __init__(self, outdir, fmt):
        self.outdir = Path(outdir)
        self.fmt = fmt
        self.written = []

    def json(self, name, obj):
        if self.fmt in ("json", "both"):
            self.written.append(io.write_json(self.outdir / name, obj))

    def csv(self, name, header, rows):
        if self.fmt in ("csv", "both"):
            self.written.append(io.write_csv(self.outdir / name, header, rows))

    def figure(self, func, name, *args):
        self.written.append(func(*args, self.outdir / name))


def _branches(config, m):
    if m is None:
        return config.branches
    if not 1 <= m <= config.k - 2:
        raise ConfigError(f"--m {m} outside 1..{config.k - 2}")
    return [m]


def _problem_dict(config):
    return {k: v for k, v in config.to_dict().items() if k != "output_dir"}


def _profiles(config, branches):
    sol = integrate_ivp(config.params)
    locate_critical_points(sol, max(branches))
    return sol, [build_profile(sol, m, config.n_radial) for m in branches]


def cmd_profile(config, args, out):
    sol, profiles = _profiles(config, _branches(config, args.m))
    n = len(sol.critical_points)
    out.json("profile.json", {
        "problem": _problem_dict(config),
        "trajectory": sol.to_dict(),
        "profiles": [dict(p.to_dict(), closed_form_d2U_at_1=p.closed_form_d2U_at_1())
                     for p in profiles],
    })
    rows = [[j + 1, sol.zeros[j] if j < len(sol.zeros) else None, sol.critical_points[j],
             sol.critical_values[j]] for j in range(n)]
    out.csv("trajectory.csv", ("r", "u", "du"),
            np.column_stack([sol.nodes, sol.u_values, sol.du_values]).tolist())
    out.csv("critical_points.csv", ("j", "r_j", "mu_j", "u_at_mu_j"), rows)
    for p in profiles:
        r, U, dU = p.uniform_export(config.n_radial)
        out.csv(f"profile_m{p.m}.csv", ("r", "U", "dU"), np.column_stack([r, U, dU]).tolist())
        print(f"m={p.m} mu_m={io.format_float(p.mu_m)} c_m={io.format_float(p.c_m)} "
              f"U''(1)={io.format_float(p.d2U_at_1)}")
    print(f"r_1={io.format_float(sol.zeros[0]) if sol.zeros else 'none'}")
    if args.figures:
        from .plotting import plot_profiles
        out.figure(plot_profiles, "profiles.png", profiles)
    return EXIT_OK


def _data(config, args):
    _, profiles = _profiles(config, _branches(config, args.m))
    return [compute_datum(p, config.backends[0], config.n_radial, j_max=max(3, p.m + 1))
            for p in profiles]


def cmd_spectrum(config, args, out):
    data = _data(config, args)
    out.json("spectrum.json", {
        "problem": _problem_dict(config),
        "branches": [{"m": d.m, "gamma_spectrum": d.gamma_spectrum,
                      "eigenpair": d.V_m.to_dict()} for d in data],
    })
    out.csv("spectrum.csv", ("m", "j", "gamma"),
            [[d.m, j, g] for d in data for j, g in enumerate(d.gamma_spectrum, start=1)])
    for d in data:
        V, dV, _ = d.V_m.jets()
        out.csv(f"eigenfunction_m{d.m}.csv", ("r", "V", "dV"),
                np.column_stack([d.V_m.nodes, V, dV]).tolist())
        print(f"m={d.m} gamma=" + " ".join(io.format_float(g) for g in d.gamma_spectrum))
    if args.figures:
        from .plotting import plot_eigenfunctions
        out.figure(plot_eigenfunctions, "eigenfunctions.png", data)
    return EXIT_OK


def cmd_bifurcate(config, args, out):
    data = _data(config, args)
    out.json("bifurcation.json", {"problem": _problem_dict(config),
                                  "data": [d.to_dict() for d in data]})
    out.csv("bifurcation.csv", BifurcationDatum.CSV_FIELDS, [d.csv_row() for d in data])
    curves = []
    for d in data:
        state = build_first_order_state(args.s, d, config.n_x)
        curve = physical_boundary(state)
        curves.append((f"m = {d.m}", curve))
        out.json(f"state_m{d.m}.json", state.to_dict())
        out.csv(f"boundary_m{d.m}.csv", ("x", "boundary_radius"), curve.radius_rows().tolist())
        out.csv(f"u_tilde_m{d.m}.csv", ("r", "x", "u_tilde"), state.u_tilde.rows().tolist())
        print(f"m={d.m} " + " ".join(f"{k}={io.format_float(getattr(d, k))}"
                                     for k in BifurcationDatum.CSV_FIELDS[3:]))
    if args.figures:
        from .plotting import plot_boundary
        out.figure(plot_boundary, "boundary.png", curves)
    return EXIT_OK


def failure_lines(reports, config):
    lines = []
    for r in reports:
        for name, ok in sorted(r.checks.items()):
            if not ok:
                tol = _CHECK_TOLERANCES.get(name, lambda c: "see report")(config)
                lines.append(f"FAIL m={r.m} {name} ({tol})")
        lines += [f"ERROR m={r.m} {e}" for e in r.errors]
    return lines


def _write_reports(reports, config, out, args):
    for r in reports:
        out.json(f"branch_m{r.m}.json", {"problem": _problem_dict(config), "report": r.to_dict()})
    out.csv("summary.csv", BranchReport.SUMMARY_FIELDS, [r.summary_row() for r in reports])
    if args.figures:
        from .plotting import plot_kernel, plot_scaling
        from .pullback import ScalingReport
        for r in reports:
            if r.scaling:
                out.figure(plot_scaling, f"scaling_m{r.m}.png", ScalingReport.from_dict(r.scaling))
            if r.kernel:
                out.figure(plot_kernel, f"kernel_m{r.m}.png", r.kernel)


def cmd_verify(config, args, out):
    reports = run_pipeline(config)
    if args.m is not None:
        reports = [r for r in reports if r.m in _branches(config, args.m)]
    _write_reports(reports, config, out, args)
    for r in reports:
        print(f"m={r.m} " + ("pass" if r.passed else "fail"))
    failures = failure_lines(reports, config)
    for line in failures:
        print(line, file=sys.stderr)
    return EXIT_FAIL if failures else EXIT_OK


def cmd_sweep(config, args, out):
    data = _data(config, args)
    status = EXIT_OK
    band = (config.slope_min, config.slope_max)
    for d in data:
        try:
            rep = residual_scaling_study(d, config.s_sweep, config.n_x, band)
        except OverdetError as exc:
            print(f"FAIL m={d.m} residual_scaling ({type(exc).__name__}: {exc})",
                  file=sys.stderr)
            status = EXIT_FAIL
            continue
        table = convergence_sweep(config, args.resolutions, args.backend, d.m)
        out.json(f"sweep_m{d.m}.json", {"problem": _problem_dict(config),
                                        "scaling": rep.to_dict(), "convergence": table})
        out.csv(f"scaling_m{d.m}.csv", ("s", "residual_interior", "residual_boundary"),
                list(zip(rep.s_values, rep.residuals, rep.boundary_residuals)))
        keys = CONVERGENCE_FIELDS
        out.csv(f"convergence_m{d.m}.csv", keys,
                [[row[k] for k in keys] for row in table["rows"]])
        print(f"m={d.m} slope={rep.slope:.6f}")
        if not rep.passed:
            print(f"FAIL m={d.m} residual_scaling "
                  f"({_CHECK_TOLERANCES['residual_scaling'](config)}; slope {rep.slope:.6f})",
                  file=sys.stderr)
            status = EXIT_FAIL
        if args.figures:
            from .plotting import plot_scaling
            out.figure(plot_scaling, f"scaling_m{d.m}.png", rep)
    return status


_COMMANDS = {"profile": cmd_profile, "spectrum": cmd_spectrum, "bifurcate": cmd_bifurcate,
             "verify": cmd_verify, "sweep": cmd_sweep}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {"N": args.N, "p": args.p, "k": args.k, "oracle_mode": args.oracle_mode,
             "output_dir": None if args.output_dir is None else str(args.output_dir)}
    try:
        config = io.load_config(args.config, args.set, flags)
        _branches(config, args.m)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = _Writer(config.output_dir, args.format)
    try:
        return _COMMANDS[args.command](config, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OverdetError as exc:
        print(f"FAIL {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
