"""Radial initial value problem and the rescaled profiles U_m.

The trajectory solves

    u'' + (N-1)/r u' + |u|^{p-2} u = 0,   u(0) = 1, u'(0) = 0

on ``[0, R_max]``.  Its critical points ``mu_1 < mu_2 < ...`` give the
profiles ``U_m(r) = u(mu_m r)``, which satisfy ``U_m'(0) = U_m'(1) = 0``
and solve the same equation with the nonlinearity scaled by ``mu_m**2``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .chebyshev import lobatto_nodes
from .errors import (
    DegenerateCritical,
    HorizonTooShort,
    InvalidParameters,
    StepFailure,
)

# below this value of the scaled radius the Taylor series is used instead of
# the integrator (truncation error ~ rho**8)
SERIES_RADIUS = 1e-2


@dataclass(frozen=True)
class ProblemParams:
    """Dimension, exponent and numerical controls for the radial IVP.

    ``p == 2`` is the linear limit ``u = sin(r)/r`` (for N = 3).  It lies
    outside the admissible range and is only accepted with
    ``oracle_mode=True``.
    """

    N: int
    p: float
    R_max: float = 50.0
    tol_ode: float = 1e-12
    tol_root: float = 1e-12
    oracle_mode: bool = False
    r_start: float = 1e-6

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InvalidParameters(f"N must be an integer >= 2, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "p", float(self.p))
        p, N = self.p, self.N
        if p == 2.0:
            if not self.oracle_mode:
                raise InvalidParameters(
                    "p = 2 is the linear limit; set oracle_mode to use it")
        elif p < 2.0:
            raise InvalidParameters(f"p must exceed 2, got {p}")
        elif N >= 3 and p >= 2.0 * N / (N - 2):
            raise InvalidParameters(
                f"p must be below the critical exponent 2N/(N-2) = {2.0 * N / (N - 2):g}")
        for name in ("R_max", "tol_ode", "tol_root", "r_start"):
            if not getattr(self, name) > 0:
                raise InvalidParameters(f"{name} must be positive")
        if self.r_start >= self.R_max:
            raise InvalidParameters("r_start must lie below R_max")

    @property
    def linear_limit(self):
        return self.p == 2.0

    def to_dict(self):
        return {
            "N": self.N, "p": self.p, "R_max": self.R_max, "tol_ode": self.tol_ode,
            "tol_root": self.tol_root, "oracle_mode": self.oracle_mode,
            "r_start": self.r_start,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def nonlinearity(u, p):
    """Return ``(|u|^{p-2} u, (p-1)|u|^{p-2})``; works on scalars and arrays."""
    u = np.asarray(u, dtype=float)
    a = np.abs(u) ** (p - 2.0)
    f, df = a * u, (p - 1.0) * a
    if f.ndim == 0:
        return float(f), float(df)
    return f, df


def series_coefficients(N, p):
    """Coefficients (a, b, c) of u = 1 + a r^2 + b r^4 + c r^6 + O(r^8)."""
    a = -1.0 / (2 * N)
    b = -(p - 1) * a / (4 * (N + 2))
    c = -((p - 1) * b + 0.5 * (p - 1) * (p - 2) * a * a) / (6 * (N + 4))
    return a, b, c


def _series_jet(r, N, p):
    a, b, c = series_coefficients(N, p)
    r2 = r * r
    u = 1 + r2 * (a + r2 * (b + r2 * c))
    d1 = r * (2 * a + r2 * (4 * b + 6 * c * r2))
    d2 = 2 * a + r2 * (12 * b + 30 * c * r2)
    d3 = r * (24 * b + 120 * c * r2)
    return u, d1, d2, d3


class OdeSolution:
    """Dense trajectory of (u, u') with located zeros and critical points."""

    def __init__(self, params, nodes, u_values, du_values, zeros,
                 critical_points, critical_values, dense=None):
        self.params = params
        self.nodes = np.asarray(nodes, dtype=float)
        self.u_values = np.asarray(u_values, dtype=float)
        self.du_values = np.asarray(du_values, dtype=float)
        self.zeros = [float(z) for z in zeros]
        self.critical_points = [float(c) for c in critical_points]
        self.critical_values = [float(c) for c in critical_values]
        if dense is None:
            spline = CubicHermiteSpline(self.nodes, self.u_values, self.du_values)
            dspline = spline.derivative()

            def dense(r):
                return np.array([spline(r), dspline(r)])
        self._dense = dense

    def dense_eval(self, r):
        """(u, u') at ``r``; the Taylor series is used near the origin."""
        return self.jet(r, order=1)

    def jet(self, r, order=2):
        """Stack of u and its first ``order`` derivatives (order <= 3)."""
        P = self.params
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r < 0) or np.any(r > P.R_max * (1 + 1e-12)):
            raise ValueError(f"r outside [0, {P.R_max}]")
        out = np.empty((4, r.size))
        near = r < SERIES_RADIUS
        if near.any():
            out[:, near] = np.array(_series_jet(r[near], P.N, P.p))
        far = ~near
        if far.any():
            rf = r[far]
            u, du = self._dense(rf)
            f, df = nonlinearity(u, P.p)
            d2 = -(P.N - 1) / rf * du - f
            d3 = -(P.N - 1) / rf * d2 + (P.N - 1) / rf**2 * du - df * du
            out[:, far] = np.array([u, du, d2, d3])
        out = out[: order + 1]
        return out[:, 0] if scalar else out

    def energy(self):
        """E = u'^2/2 + |u|^p/p at the stored nodes (non-increasing in r)."""
        return 0.5 * self.du_values**2 + np.abs(self.u_values) ** self.params.p / self.params.p

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "nodes": self.nodes.tolist(),
            "u": self.u_values.tolist(),
            "du": self.du_values.tolist(),
            "zeros": list(self.zeros),
            "critical_points": list(self.critical_points),
            "critical_values": list(self.critical_values),
        }

    @classmethod
    def from_dict(cls, d):
        """Rebuild from a serialized record; dense output becomes cubic Hermite."""
        return cls(ProblemParams.from_dict(d["params"]), d["nodes"], d["u"], d["du"],
                   d["zeros"], d["critical_points"], d["critical_values"])

    def __eq__(self, other):
        return isinstance(other, OdeSolution) and self.to_dict() == other.to_dict()

    __hash__ = None


def _refine_sign_changes(func, grid, values, tol):
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(func, a, b, xtol=tol, rtol=4 * np.finfo(float).eps))
    return roots


def integrate_ivp(params):
    """Integrate the radial IVP on ``[0, R_max]`` and locate all crossings.

    The singular origin is skipped with a Taylor seed at ``params.r_start``;
    integration then uses an adaptive 8th-order Dormand-Prince pair with
    dense output.  Sign changes of u and u' are bracketed on the dense
    output (four samples per step) and refined by Brent's method to
    ``tol_root``.
    """
    P = params
    N, p = P.N, P.p

    def rhs(r, y):
        u, du = y
        return [du, -(N - 1) / r * du - abs(u) ** (p - 2) * u]

    u0, du0, _, _ = _series_jet(np.array([P.r_start]), N, p)
    res = solve_ivp(rhs, (P.r_start, P.R_max), [u0[0], du0[0]], method="DOP853",
                    rtol=P.tol_ode, atol=P.tol_ode, dense_output=True,
                    first_step=min(1e-3, P.R_max / 10))
    if res.status != 0:
        raise StepFailure(f"integrator stopped at r = {res.t[-1]:.6g}: {res.message}")
    if np.any(np.diff(res.t) < 1e-14):
        raise StepFailure("step size fell below the 1e-14 floor")

    dense = res.sol
    t = res.t
    sample = np.unique(np.concatenate(
        [t] + [t[:-1] + (t[1:] - t[:-1]) * k / 4.0 for k in (1, 2, 3)]))
    ys = dense(sample)
    zeros = _refine_sign_changes(lambda r: dense(r)[0], sample, ys[0], P.tol_root)
    crit = _refine_sign_changes(lambda r: dense(r)[1], sample, ys[1], P.tol_root)
    if not crit:
        raise HorizonTooShort(
            f"no critical point of u in [0, {P.R_max}]; increase R_max")
    crit_vals = [float(dense(c)[0]) for c in crit]

    nodes = np.concatenate([[0.0], t])
    u_vals = np.concatenate([[1.0], res.y[0]])
    du_vals = np.concatenate([[0.0], res.y[1]])
    return OdeSolution(P, nodes, u_vals, du_vals, zeros, crit, crit_vals, dense=dense)


def locate_critical_points(sol, m_required):
    """First ``m_required`` critical points, checked for degeneracy and interlacing."""
    if m_required <= 0:
        return []
    tol = sol.params.tol_root
    if len(sol.critical_points) < m_required:
        raise HorizonTooShort(
            f"only {len(sol.critical_points)} critical points in [0, {sol.params.R_max}], "
            f"{m_required} requested")
    mus = sol.critical_points[:m_required]
    for m, (mu, val) in enumerate(zip(mus, sol.critical_values[:m_required]), start=1):
        if abs(val) <= tol:
            raise DegenerateCritical(f"|u(mu_{m})| = {abs(val):.3g} <= tol_root")
    z = sol.zeros
    for m, mu in enumerate(mus, start=1):
        if m <= len(z) and not z[m - 1] < mu:
            raise DegenerateCritical(f"interlacing r_{m} < mu_{m} violated")
        if m < len(z) and not mu < z[m]:
            raise DegenerateCritical(f"interlacing mu_{m} < r_{m + 1} violated")
    return list(mus)


class RadialProfile:
    """U_m(r) = u(mu_m r) sampled on Chebyshev-Lobatto nodes of [0, 1].

    ``evaluate`` works for any r >= 0 as long as ``mu_m r <= R_max`` and
    is what the perturbed fields use when ``r / (1 + h) > 1``.
    """

    def __init__(self, m, mu_m, params, grid, U_values, dU_values, c_m,
                 d2U_at_1, interior_zeros, solution=None):
        self.m = int(m)
        self.mu_m = float(mu_m)
        self.params = params
        self.grid = np.asarray(grid, dtype=float)
        self.U_values = np.asarray(U_values, dtype=float)
        self.dU_values = np.asarray(dU_values, dtype=float)
        self.c_m = float(c_m)
        self.d2U_at_1 = float(d2U_at_1)
        self.interior_zeros = [float(z) for z in interior_zeros]
        self.solution = solution

    @property
    def N(self):
        return self.params.N

    @property
    def p(self):
        return self.params.p

    def evaluate(self, r, order=2):
        """U_m and its radial derivatives up to ``order`` at ``r``."""
        if self.solution is None:
            raise ValueError("profile was deserialized without its trajectory")
        r = np.asarray(r, dtype=float)
        jet = self.solution.jet(self.mu_m * r, order=order)
        scale = self.mu_m ** np.arange(order + 1)
        return jet * scale.reshape((-1,) + (1,) * r.ndim)

    def dense_eval(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > 1):
            raise ValueError("dense_eval is defined on [0, 1]; use extended_eval")
        return self.evaluate(r, order=1)

    def extended_eval(self, r):
        return self.evaluate(r, order=0)[0]

    def closed_form_d2U_at_1(self):
        """-mu_m^2 |c_m|^{p-2} c_m, forced by the ODE since U_m'(1) = 0."""
        return -self.mu_m**2 * nonlinearity(self.c_m, self.p)[0]

    def uniform_export(self, n):
        r = np.linspace(0.0, 1.0, n)
        U, dU = self.dense_eval(r)
        return r, U, dU

    def to_dict(self):
        return {
            "m": self.m, "mu_m": self.mu_m, "params": self.params.to_dict(),
            "grid": self.grid.tolist(), "U": self.U_values.tolist(),
            "dU": self.dU_values.tolist(), "c_m": self.c_m, "d2U_at_1": self.d2U_at_1,
            "interior_zeros": list(self.interior_zeros),
        }

    @classmethod
    def from_dict(cls, d, solution=None):
        return cls(d["m"], d["mu_m"], ProblemParams.from_dict(d["params"]), d["grid"],
                   d["U"], d["dU"], d["c_m"], d["d2U_at_1"], d["interior_zeros"],
                   solution=solution)

    def __eq__(self, other):
        return isinstance(other, RadialProfile) and self.to_dict() == other.to_dict()

    __hash__ = None


def build_profile(sol, m, n_grid=257):
    """Rescale the trajectory at its ``m``-th critical point onto [0, 1]."""
    mus = locate_critical_points(sol, m)
    mu = mus[m - 1]
    grid = lobatto_nodes(n_grid)
    u, du, d2 = sol.jet(mu * grid, order=2)
    U, dU = u, mu * du
    # U'(1) is ~tol_root rather than exactly 0; keep the ODE's own U''(1)
    d2U_1 = mu**2 * d2[-1]
    zeros = [z / mu for z in sol.zeros if z < mu]
    return RadialProfile(m, mu, sol.params, grid, U, dU, U[-1], d2U_1, zeros,
                         solution=sol)
