"""End-to-end computation of all branches m = 1..k-2 with their verification reports."""

from dataclasses import dataclass, field, fields

import numpy as np

from .errors import OverdetError, InvalidParameters
from .pullback import (
    DEFAULT_L,
    DEFAULT_NX,
    SLOPE_BAND,
    kernel_residual,
    residual_scaling_study,
    transversality_check,
)
from .radial_ode import ProblemParams, build_profile, integrate_ivp, locate_critical_points
from .sturm_liouville import (
    BACKENDS,
    compute_datum,
    fd_richardson,
    kernel_simplicity_check,
    negativity_identity_check,
)

DEFAULT_S_SWEEP = tuple(10.0 ** e for e in (-1.5, -2.0, -2.5, -3.0, -3.5))
DEFAULT_KERNEL_RESOLUTIONS = (256, 512, 1024, 2048)


@dataclass
class PipelineConfig:
    """Inputs and tolerances of a pipeline run; every field is a config key."""

    N: int = 3
    p: float = 3.0
    k: int = 4
    oracle_mode: bool = False
    R_max: float = 50.0
    tol_ode: float = 1e-12
    tol_root: float = 1e-12
    n_radial: int = 257
    L: int = DEFAULT_L
    n_x: int = DEFAULT_NX
    s_sweep: tuple = DEFAULT_S_SWEEP
    backends: tuple = ("collocation",)
    output_dir: str = "."
    identity_n: int = 2049
    fd_n: int = 4096
    kernel_resolutions: tuple = DEFAULT_KERNEL_RESOLUTIONS
    tol_identity: float = 1e-6
    tol_gamma: float = 1e-6
    tol_delta: float = 1e-5
    tol_closed_form: float = 1e-8
    tol_transversality: float = 1e-6
    kernel_ratio: float = 3.5
    kernel_floor: float = 1e-10
    slope_min: float = SLOPE_BAND[0]
    slope_max: float = SLOPE_BAND[1]

    def __post_init__(self):
        self.s_sweep = tuple(float(s) for s in self.s_sweep)
        self.backends = tuple(self.backends)
        self.kernel_resolutions = tuple(int(n) for n in self.kernel_resolutions)
        self.validate()

    def validate(self):
        if self.k < 3:
            raise InvalidParameters(f"k = {self.k} < 3")
        if self.n_radial < 33:
            raise InvalidParameters(f"n_radial = {self.n_radial} < 33")
        s = self.s_sweep
        if len(s) < 2 or any(v <= 0 for v in s) or any(a <= b for a, b in zip(s, s[1:])):
            raise InvalidParameters("s_sweep must be strictly decreasing and positive")
        bad = [b for b in self.backends if b not in BACKENDS]
        if bad or not self.backends:
            raise InvalidParameters(f"unknown backends {bad}")
        if self.L < 1 or self.n_x < 2 * self.L + 2:
            raise InvalidParameters(f"n_x = {self.n_x} cannot resolve L = {self.L} modes")
        self.params  # validates (N, p)

    @property
    def params(self):
        return ProblemParams(self.N, self.p, R_max=self.R_max, tol_ode=self.tol_ode,
                             tol_root=self.tol_root, oracle_mode=self.oracle_mode)

    @property
    def branches(self):
        return list(range(1, self.k - 1))

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        for key in ("s_sweep", "backends", "kernel_resolutions"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def __eq__(self, other):
        return isinstance(other, PipelineConfig) and self.to_dict() == other.to_dict()

    __hash__ = None


@dataclass
class BranchReport:
    """Datum and verification results for one branch m.

    ``checks`` maps check names to pass flags; ``errors`` collects the
    messages of checks that raised.  A failed branch has ``datum = None``.
    """

    m: int
    datum: object = None
    identity: dict = None
    kernel: dict = None
    transversality: dict = None
    scaling: dict = None
    backend_agreement: dict = None
    convergence_table: list = None
    closed_form_residual: float = None
    kernel_simple: bool = None
    checks: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.errors and all(self.checks.values())

    def summary_row(self):
        d = self.datum
        slope = self.scaling["slope"] if self.scaling else None
        flags = ";".join(f"{k}={'pass' if v else 'fail'}" for k, v in sorted(self.checks.items()))
        if d is None:
            return [self.m, None, None, None, None, None, slope, flags or "error"]
        return [self.m, d.mu_m, d.lambda_m, d.c_m, d.delta_m, d.beta_m, slope, flags]

    SUMMARY_FIELDS = ("m", "mu_m", "lambda_m", "c_m", "delta_m", "beta_m", "slope",
                      "pass_flags")

    def to_dict(self):
        return {
            "m": self.m,
            "datum": None if self.datum is None else self.datum.to_dict(),
            "identity": self.identity,
            "kernel": self.kernel,
            "transversality": self.transversality,
            "scaling": self.scaling,
            "backend_agreement": self.backend_agreement,
            "convergence_table": self.convergence_table,
            "closed_form_residual": self.closed_form_residual,
            "kernel_simple": self.kernel_simple,
            "checks": dict(self.checks),
            "errors": list(self.errors),
            "passed": self.passed,
        }

    @classmethod
    def from_dict(cls, d):
        from .sturm_liouville import BifurcationDatum

        d = dict(d)
        d.pop("passed", None)
        if d["datum"] is not None:
            d["datum"] = BifurcationDatum.from_dict(d["datum"])
        return cls(**d)

    def __eq__(self, other):
        return isinstance(other, BranchReport) and self.to_dict() == other.to_dict()

    __hash__ = None


def kernel_convergence(datum, resolutions, ratio=3.5, floor=1e-10):
    """Kernel residuals of the FD ground state at each resolution.

    Passes when every doubling reduces the residual by ``ratio`` or the
    residual has already reached ``floor``.
    """
    res = [kernel_residual(datum, n) for n in resolutions]
    ratios = [a / b for a, b in zip(res[:-1], res[1:])]
    ok = all(q >= ratio or b <= floor for q, b in zip(ratios, res[1:]))
    return {"resolutions": list(resolutions), "residuals": res, "ratios": ratios,
            "passed": bool(ok)}


def _guarded(report, name, func):
    try:
        return func()
    except OverdetError as exc:
        report.errors.append(f"{name}: {type(exc).__name__}: {exc}")
        report.checks[name] = False
        return None


def verify_branch(profile, config):
    """Run every verification on one branch profile."""
    report = BranchReport(profile.m)
    datum = _guarded(report, "spectrum",
                     lambda: compute_datum(profile, config.backends[0], config.n_radial,
                                           j_max=max(3, profile.m + 1)))
    if datum is None:
        return report
    report.datum = datum
    report.checks["negative_ground_state"] = datum.gamma_spectrum[0] < 0

    cf = abs(profile.closed_form_d2U_at_1() - profile.d2U_at_1)
    report.closed_form_residual = cf
    report.checks["closed_form"] = cf <= config.tol_closed_form

    ident = _guarded(report, "identity",
                     lambda: negativity_identity_check(profile, config.identity_n))
    if ident is not None:
        report.identity = ident.to_dict()
        report.checks["identity"] = ident.relative_discrepancy <= config.tol_identity

    report.kernel_simple = kernel_simplicity_check(datum.gamma_spectrum, datum.lambda_m)
    report.checks["kernel_simplicity"] = report.kernel_simple

    rich = _guarded(report, "backend_agreement", lambda: fd_richardson(profile, config.fd_n))
    if rich is not None:
        dg = abs(rich["gamma_1"] - datum.gamma_spectrum[0])
        dd = abs(rich["delta_m"] - datum.delta_m)
        report.backend_agreement = {
            "fd_n": config.fd_n, "gamma_1_fd": rich["gamma_1"],
            "delta_m_fd": rich["delta_m"], "gamma_1_error": dg, "delta_m_error": dd}
        report.checks["backend_agreement"] = (dg <= config.tol_gamma
                                              and dd <= config.tol_delta)

    kern = _guarded(report, "kernel", lambda: kernel_convergence(
        datum, config.kernel_resolutions, config.kernel_ratio, config.kernel_floor))
    if kern is not None:
        report.kernel = kern
        report.checks["kernel"] = kern["passed"]

    tr = _guarded(report, "transversality", lambda: transversality_check(
        datum, tol=config.tol_transversality))
    if tr is not None:
        report.transversality = tr.to_dict()
        report.checks["transversality"] = tr.passed

    sc = _guarded(report, "residual_scaling", lambda: residual_scaling_study(
        datum, config.s_sweep, config.n_x, (config.slope_min, config.slope_max)))
    if sc is not None:
        report.scaling = sc.to_dict()
        report.checks["residual_scaling"] = sc.passed
    return report


def run_pipeline(config):
    """All branches m = 1..k-2; per-branch failures are recorded, not raised."""
    branches = config.branches
    try:
        sol = integrate_ivp(config.params)
        mus = locate_critical_points(sol, len(branches))
    except OverdetError as exc:
        msg = f"ode: {type(exc).__name__}: {exc}"
        return [BranchReport(m, errors=[msg], checks={"ode": False}) for m in branches]
    if any(a >= b for a, b in zip(mus, mus[1:])):
        raise AssertionError(f"critical points not strictly increasing: {mus}")
    reports = []
    for m in branches:
        try:
            profile = build_profile(sol, m, config.n_radial)
        except OverdetError as exc:
            reports.append(BranchReport(m, errors=[f"profile: {type(exc).__name__}: {exc}"],
                                        checks={"profile": False}))
            continue
        reports.append(verify_branch(profile, config))
    return reports


def observed_order(resolutions, errors):
    """Least-squares slope of -log(error) against log(n); None if any error is 0."""
    if any(e == 0 for e in errors):
        return None
    return float(-np.polyfit(np.log(resolutions), np.log(np.abs(errors)), 1)[0])


def convergence_sweep(config, resolutions, backend="finite_difference", m=1):
    """Constants of branch m at each resolution against a collocation reference.

    Each row holds the constants, their errors relative to the reference
    datum (collocation at ``config.n_radial``) and the kernel residual of
    the resolution-n eigenfunction at the reference lambda_m.  Observed
    orders are least-squares slopes of the errors; Richardson limits assume
    second order and use the two finest resolutions (FD backend only).
    """
    resolutions = [int(n) for n in resolutions]
    if len(resolutions) < 3 or min(resolutions) < 33:
        raise InvalidParameters("need at least three resolutions, each >= 33")
    sol = integrate_ivp(config.params)
    profile = build_profile(sol, m, config.n_radial)
    ref = compute_datum(profile, "collocation", config.n_radial, j_max=max(3, m + 1))
    keys = ("lambda_m", "delta_m", "beta_m")
    rows = []
    for n in resolutions:
        d = compute_datum(profile, backend, n, j_max=max(3, m + 1))
        row = {"n": n}
        for key in keys:
            row[key] = getattr(d, key)
            row[key + "_error"] = abs(getattr(d, key) - getattr(ref, key))
        row["kernel_residual"] = kernel_residual(ref, n, backend)
        rows.append(row)
    out = {"backend": backend, "m": m,
           "reference": {k: getattr(ref, k) for k in keys},
           "rows": rows, "orders": {}, "limits": {}}
    for key in keys + ("kernel_residual",):
        err = [r[key + "_error"] if key in keys else r[key] for r in rows]
        out["orders"][key] = observed_order(resolutions, err)
    if backend == "finite_difference":
        ratio = resolutions[-1] / resolutions[-2]
        for key in keys:
            a, b = rows[-2][key], rows[-1][key]
            out["limits"][key] = (ratio**2 * b - a) / (ratio**2 - 1)
    return out


def summary_rows(reports):
    return [r.summary_row() for r in reports]
