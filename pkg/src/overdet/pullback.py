"""Pull-back operator on the fixed cylinder B_1 x R/2piZ and first-order states.

Fields are radial in t and even, 2pi-periodic in x.  A :class:`TensorField`
stores them on a tensor grid (radial nodes x uniform x-nodes) together with
the partial derivatives the operators need.  Radial derivatives are carried
explicitly, x-derivatives come from the cosine modes the field was built
from; nonlinear terms are evaluated pointwise in physical space.

With ``H = 1 + h`` the pulled-back operator is

    L^H u = mu^2 |u|^{p-2} u + lam u_xx + H^2 Lap_t u + lam (H'/H)^2 D_t D_t u
            + 2 lam (H'/H) D_t u_x + lam (H''/H - (H'/H)^2) D_t u

where ``D_t u = r u_r`` for radial fields.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DomainCollapse, FloorDominated, SolverFailure, ZeroDenominator
from .radial_ode import nonlinearity
from .sturm_liouville import (
    DENOM_TOL,
    LinearizedPotential,
    assemble_eigenproblem,
    potential_values,
    radial_laplacian,
    solve_spectrum,
    sphere_area,
)

DEFAULT_NX = 64
DEFAULT_L = 16
SLOPE_BAND = (1.8, 2.2)
BOUNDARY_TOL = 1e-12

_JETS = ("v_r", "v_rr", "v_x", "v_xx", "v_rx")


def x_grid(n_x=DEFAULT_NX):
    return 2.0 * np.pi * np.arange(n_x) / n_x


@dataclass
class TensorField:
    """v(t, x) sampled at (|t| = r_i, x_j) with optional partial derivatives.

    Arrays have shape ``(len(r), len(x))``.  Missing derivatives are None;
    operators that need them raise ``ValueError``.
    """

    N: int
    r: np.ndarray
    x: np.ndarray
    v: np.ndarray
    v_r: np.ndarray = None
    v_rr: np.ndarray = None
    v_x: np.ndarray = None
    v_xx: np.ndarray = None
    v_rx: np.ndarray = None

    @classmethod
    def from_modes(cls, N, r, modes, n_x=DEFAULT_NX):
        """Build sum_l f_l(r) cos(l x) from ``{l: (f, f_r, f_rr)}``."""
        r = np.asarray(r, dtype=float)
        x = x_grid(n_x)
        shape = (len(r), n_x)
        v, vr, vrr, vx, vxx, vrx = (np.zeros(shape) for _ in range(6))
        for ell, (f, fr, frr) in modes.items():
            c, s = np.cos(ell * x), np.sin(ell * x)
            f, fr, frr = (np.asarray(a, dtype=float)[:, None] for a in (f, fr, frr))
            v += f * c
            vr += fr * c
            vrr += frr * c
            vx -= ell * f * s
            vxx -= ell**2 * f * c
            vrx -= ell * fr * s
        return cls(N, r, x, v, vr, vrr, vx, vxx, vrx)

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) is None]
        if missing:
            raise ValueError(f"field lacks derivatives {missing}")

    def cosine_modes(self, L=DEFAULT_L):
        """Coefficients v_l(r), l = 0..L, of v = sum v_l cos(l x)."""
        n_x = len(self.x)
        c = np.fft.rfft(self.v, axis=1).real / n_x
        c[:, 1:] *= 2.0
        if n_x % 2 == 0:
            c[:, -1] *= 0.5
        L = min(L, c.shape[1] - 1)
        return c[:, : L + 1].T

    def sup(self, radial_mask=None):
        v = self.v if radial_mask is None else self.v[radial_mask]
        return float(np.max(np.abs(v)))

    def scaled(self, factor):
        kw = {n: None if getattr(self, n) is None else factor * getattr(self, n)
              for n in _JETS}
        return TensorField(self.N, self.r, self.x, factor * self.v, **kw)

    def rows(self):
        """Long-format (r, x, value) triples for CSV export."""
        R, X = np.meshgrid(self.r, self.x, indexing="ij")
        return np.column_stack([R.ravel(), X.ravel(), self.v.ravel()])


def _x_spectral_derivatives(values):
    """First and second x-derivatives of periodic samples along the last axis."""
    n = values.shape[-1]
    k = np.fft.rfftfreq(n, d=1.0 / n)
    c = np.fft.rfft(values, axis=-1)
    ik = 1j * k
    if n % 2 == 0:
        ik[-1] = 0.0
    d1 = np.fft.irfft(ik * c, n=n, axis=-1)
    d2 = np.fft.irfft(-(k**2) * c, n=n, axis=-1)
    return d1, d2


@dataclass
class PerturbationField:
    """h, h', h'' on the uniform x-grid; the cylinder profile is 1 + h."""

    x: np.ndarray
    h: np.ndarray
    dh: np.ndarray
    d2h: np.ndarray

    @property
    def floor(self):
        return float(np.min(1.0 + self.h))

    @classmethod
    def from_cosine(cls, coeffs, n_x=DEFAULT_NX):
        """h = sum_l coeffs[l] cos(l x)."""
        x = x_grid(n_x)
        h, dh, d2h = np.zeros(n_x), np.zeros(n_x), np.zeros(n_x)
        for ell, a in enumerate(coeffs):
            h += a * np.cos(ell * x)
            dh -= ell * a * np.sin(ell * x)
            d2h -= ell**2 * a * np.cos(ell * x)
        return cls(x, h, dh, d2h)

    @classmethod
    def zero(cls, n_x=DEFAULT_NX):
        return cls.from_cosine([0.0], n_x)

    @classmethod
    def from_samples(cls, h):
        h = np.asarray(h, dtype=float)
        d1, d2 = _x_spectral_derivatives(h)
        return cls(x_grid(len(h)), h, d1, d2)

    def rescaled_profile(self, factor):
        """The field whose profile is ``factor * (1 + h)``."""
        return PerturbationField(self.x, factor * (1.0 + self.h) - 1.0,
                                 factor * self.dh, factor * self.d2h)


def d_t(v):
    """D_t v = r v_r for a field radial in t."""
    v.require("v_r")
    r = v.r[:, None]
    out = TensorField(v.N, v.r, v.x, r * v.v_r)
    if v.v_rr is not None:
        out.v_r = v.v_r + r * v.v_rr
    if v.v_rx is not None:
        out.v_x = r * v.v_rx
    return out


def apply_pullback(v, h, lam, mu_m, p):
    """L_lam^{1+h} v evaluated pointwise on the tensor grid."""
    v.require(*_JETS)
    if not np.allclose(h.x, v.x):
        raise ValueError("field and perturbation use different x-grids")
    if h.floor <= 0.0:
        raise DomainCollapse(f"min(1 + h) = {h.floor:.3g} <= 0")
    H = (1.0 + h.h)[None, :]
    a = (h.dh / (1.0 + h.h))[None, :]
    b = (h.d2h / (1.0 + h.h))[None, :]
    r = v.r[:, None]
    lap = radial_laplacian(v.r, v.v_r.T, v.v_rr.T, v.N).T
    dt = r * v.v_r
    dtdt = dt + r * r * v.v_rr
    dtx = r * v.v_rx
    f = nonlinearity(v.v, p)[0]
    out = (mu_m**2 * f + lam * v.v_xx + H**2 * lap + lam * a**2 * dtdt
           + 2.0 * lam * a * dtx + lam * (b - a**2) * dt)
    return TensorField(v.N, v.r, v.x, out)


def apply_linearized(v, lam, datum):
    """Lap_t v + lam v_xx + mu_m^2 (p-1)|U_m|^{p-2} v."""
    v.require("v_r", "v_rr", "v_xx")
    q = potential_values(datum.profile, v.r)[:, None]
    lap = radial_laplacian(v.r, v.v_r.T, v.v_rr.T, v.N).T
    return TensorField(v.N, v.r, v.x, lap + lam * v.v_xx + q * v.v)


def perturbed_profile_field(profile, h, r):
    """u_m^h(t, x) = U_m(|t| / (1 + h(x))) with exact chain-rule derivatives.

    Uses the trajectory beyond r = 1 where 1 + h < 1.
    """
    r = np.asarray(r, dtype=float)
    H = (1.0 + h.h)[None, :]
    a = (h.dh / (1.0 + h.h))[None, :]
    da = (h.d2h / (1.0 + h.h))[None, :] - a**2
    rho = r[:, None] / H
    U, dU, d2U = (arr.reshape(rho.shape) for arr in profile.evaluate(rho.ravel(), order=2))
    return TensorField(
        profile.N, r, h.x, U,
        v_r=dU / H,
        v_rr=d2U / H**2,
        v_x=-a * rho * dU,
        v_xx=(a**2 - da) * rho * dU + a**2 * rho**2 * d2U,
        v_rx=-a / H * (dU + rho * d2U),
    )


def trace_h(u, profile):
    """h_u(x) = D_t u(e_1, x) / U_m''(1)."""
    g1 = profile.d2U_at_1
    if abs(g1) < DENOM_TOL:
        raise ZeroDenominator(f"|U''_m(1)| = {abs(g1):.3g} < {DENOM_TOL}")
    u.require("v_r")
    k = int(np.argmax(u.r))
    trace = u.r[k] * u.v_r[k] / g1
    return PerturbationField.from_samples(trace)


@dataclass
class CovarianceReport:
    lam: float
    residual_original: float
    residual_transformed: float
    relative_error: float

    def to_dict(self):
        return dict(self.__dict__)


def scaling_covariance_check(u, h, lam, mu_m, p):
    """Compare L_lam^{1+h} u with the lam = 1 operator on the rescaled pair.

    On the fixed cylinder the transformation w = lam^{-1/(p-2)} u(t/sqrt(lam), x)
    of the physical problem keeps the radial coordinate and divides the
    profile by sqrt(lam); the residual then scales by lam^{-(p-1)/(p-2)}.
    """
    if p == 2.0:
        raise ValueError("the amplitude scaling is undefined for p = 2")
    amp = lam ** (-1.0 / (p - 2.0))
    orig = apply_pullback(u, h, lam, mu_m, p)
    trans = apply_pullback(u.scaled(amp), h.rescaled_profile(1.0 / math.sqrt(lam)),
                           1.0, mu_m, p)
    expected = lam ** (-(p - 1.0) / (p - 2.0)) * orig.v
    scale = max(np.max(np.abs(expected)), np.finfo(float).tiny)
    return CovarianceReport(lam, orig.sup(), trans.sup(),
                            float(np.max(np.abs(trans.v - expected)) / scale))


def kernel_field(datum, n_x=DEFAULT_NX):
    """v_m = V_m(|t|) cos x on the eigenfunction's own grid."""
    V, Vr, Vrr = datum.V_m.jets()
    return TensorField.from_modes(datum.N, datum.V_m.nodes, {1: (V, Vr, Vrr)}, n_x)


def kernel_residual(datum, n, backend="finite_difference", n_x=16):
    """||L_{lambda_m}(V^{(n)} cos x)||_inf / ||V^{(n)}||_inf at resolution n.

    V^{(n)} is the ground state of the given backend at resolution n and
    lambda_m is the datum's value, so the residual measures how far the
    discrete kernel sits from the reference bifurcation parameter.
    """
    pot = LinearizedPotential.for_backend(datum.profile, backend, n)
    problem = assemble_eigenproblem(pot)
    pair = solve_spectrum(problem, 1)[0]
    V, Vr, Vrr = pair.jets()
    v = TensorField.from_modes(datum.N, pair.nodes, {1: (V, Vr, Vrr)}, n_x)
    res = apply_linearized(v, datum.lambda_m, datum)
    mask = problem.equation_mask()
    return res.sup(mask) / v.sup()


@dataclass
class TransversalityReport:
    dxx_error: float
    fd_error: float
    pairing: float
    norm_sq: float
    range_orthogonality: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def _radial_weights(pair):
    return pair.problem.potential.grid.quadrature_weights() * pair.nodes ** (pair.problem.N - 1)


def transversality_check(datum, eps=1e-4, n_samples=3, seed=0, tol=1e-6):
    """d/dlam L_lam v_m = v_m,xx = -v_m and <v_m, -v_m> < 0.

    Also checks on ``n_samples`` random Dirichlet fields u that
    L_{lambda_m} u is orthogonal to v_m (range characterization).
    """
    v = kernel_field(datum)
    dxx_error = float(np.max(np.abs(v.v_xx + v.v)))
    lam = datum.lambda_m
    dlam = (apply_linearized(v, lam + eps, datum).v
            - apply_linearized(v, lam - eps, datum).v) / (2 * eps)
    fd_error = float(np.max(np.abs(dlam - v.v_xx)))

    omega = sphere_area(datum.N)
    if datum.V_m.backend == "collocation":
        wr = _radial_weights(datum.V_m)
    else:
        wr = np.gradient(datum.V_m.nodes) * datum.V_m.nodes ** (datum.N - 1)
    wx = 2.0 * np.pi / len(v.x)

    def inner(a, b):
        return omega * wx * float(wr @ (a * b).sum(axis=1))

    pairing = inner(v.v, dlam)
    V = datum.V_m.V_values
    norm_sq = omega * np.pi * float(wr @ (V * V))

    # random u = (1 - r^2) P(r^2) cos x vanishes on the boundary
    rng = np.random.default_rng(seed)
    r = datum.V_m.nodes
    worst = 0.0
    for _ in range(n_samples):
        c = rng.standard_normal(4)
        P = np.polynomial.Polynomial(c)
        s = r * r
        f = (1 - s) * P(s)
        df = (-2 * r) * P(s) + (1 - s) * P.deriv()(s) * 2 * r
        d2f = -2 * P(s) - 8 * s * P.deriv()(s) + (1 - s) * (4 * s * P.deriv(2)(s)
                                                            + 2 * P.deriv()(s))
        ell = int(rng.integers(0, 3))
        u = TensorField.from_modes(datum.N, r, {ell: (f, df, d2f), 1: (f, df, d2f)}
                                   if ell != 1 else {1: (f, df, d2f)}, len(v.x))
        w = apply_linearized(u, lam, datum)
        denom = math.sqrt(inner(v.v, v.v) * inner(w.v, w.v))
        worst = max(worst, abs(inner(v.v, w.v)) / denom)
    passed = dxx_error <= tol and fd_error <= tol and pairing < 0
    return TransversalityReport(dxx_error, fd_error, pairing, norm_sq, worst, passed)


@dataclass
class PerturbedState:
    """First-order approximation of the bifurcating branch at parameter s."""

    s: float
    lambda_m: float
    residual_interior: float
    residual_boundary: float
    x: np.ndarray
    h_s: np.ndarray
    slope_context: float = None
    datum: object = field(default=None, repr=False)
    h_phi: PerturbationField = field(default=None, repr=False)
    u_tilde: TensorField = field(default=None, repr=False)

    def to_dict(self):
        return {"s": self.s, "lambda_m": self.lambda_m,
                "residual_interior": self.residual_interior,
                "residual_boundary": self.residual_boundary,
                "slope_context": self.slope_context,
                "x": self.x.tolist(), "h_s": self.h_s.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["s"], d["lambda_m"], d["residual_interior"], d["residual_boundary"],
                   np.asarray(d["x"], dtype=float), np.asarray(d["h_s"], dtype=float),
                   d["slope_context"])

    def __eq__(self, other):
        return isinstance(other, PerturbedState) and self.to_dict() == other.to_dict()

    __hash__ = None

    def phi(self):
        """phi_s = s v_m on the grid of u_tilde; its trace is h_phi."""
        V, Vr, Vrr = self.datum.V_m.jets()
        return TensorField.from_modes(self.datum.N, self.datum.V_m.nodes,
                                      {1: (self.s * V, self.s * Vr, self.s * Vrr)},
                                      len(self.x))

    def correction_profile(self, r):
        """W(r) = V_m(r) - delta_m r U_m'(r), the cos x coefficient of u_tilde / s."""
        r = np.asarray(r, dtype=float)
        dU = self.datum.profile.evaluate(r, order=1)[1]
        return self.datum.V_m.evaluate(r) - self.datum.delta_m * r * dU


def build_first_order_state(s, datum, n_x=DEFAULT_NX):
    """u_tilde_s = u_m + s v_m - g(|t|) h_phi with h_phi = s delta_m cos x.

    lambda_m(s) is frozen at lambda_m; the discrepancy is O(s^2).
    """
    if abs(s * datum.delta_m) >= 1.0:
        raise DomainCollapse(f"|s delta_m| = {abs(s * datum.delta_m):.3g} >= 1")
    profile = datum.profile
    V, Vr, Vrr = datum.V_m.jets()
    r = datum.V_m.nodes
    U, dU, d2U, d3U = profile.evaluate(r, order=3)
    g, dg, d2g = r * dU, dU + r * d2U, 2 * d2U + r * d3U
    d = datum.delta_m
    W, dW, d2W = V - d * g, Vr - d * dg, Vrr - d * d2g
    u_tilde = TensorField.from_modes(datum.N, r, {0: (U, dU, d2U),
                                                  1: (s * W, s * dW, s * d2W)}, n_x)
    h_phi = PerturbationField.from_cosine([0.0, s * d], n_x)
    res = apply_pullback(u_tilde, h_phi, datum.lambda_m, datum.mu_m, datum.p)
    boundary = float(np.max(np.abs(d_t(u_tilde).v[int(np.argmax(r))])))
    if boundary > 1e-9 * max(1.0, abs(s)):
        raise SolverFailure(
            f"D_t u_tilde(e_1, .) = {boundary:.3g} does not vanish; check delta_m sign")
    h_s = (1.0 + h_phi.h) / math.sqrt(datum.lambda_m)
    return PerturbedState(float(s), datum.lambda_m, res.sup(), boundary, h_phi.x, h_s,
                          datum=datum, h_phi=h_phi, u_tilde=u_tilde)


@dataclass
class ScalingReport:
    s_values: list
    residuals: list
    boundary_residuals: list
    floor: float
    slope: float
    ratios: list
    passed: bool
    band: tuple = SLOPE_BAND

    def to_dict(self):
        d = dict(self.__dict__)
        d["band"] = list(self.band)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["band"] = tuple(d["band"])
        return cls(**d)

    def __eq__(self, other):
        return isinstance(other, ScalingReport) and self.to_dict() == other.to_dict()

    __hash__ = None


def residual_scaling_study(datum, s_values, n_x=DEFAULT_NX, band=SLOPE_BAND,
                           floor_factor=10.0):
    """Interior residual of u_tilde_s against s, with the log-log slope.

    Raises :class:`FloorDominated` when some residual is within
    ``floor_factor`` of the s = 0 residual.
    """
    s_values = [float(s) for s in s_values]
    if len(s_values) < 2 or any(s <= 0 for s in s_values):
        raise ValueError("need at least two positive s values")
    floor = build_first_order_state(0.0, datum, n_x).residual_interior
    states = [build_first_order_state(s, datum, n_x) for s in s_values]
    res = [st.residual_interior for st in states]
    if min(res) <= floor_factor * floor:
        raise FloorDominated(
            f"residual {min(res):.3g} within {floor_factor:g}x of the floor {floor:.3g}")
    slope = float(np.polyfit(np.log(s_values), np.log(res), 1)[0])
    ratios = [a / b for a, b in zip(res[:-1], res[1:])]
    passed = band[0] <= slope <= band[1] and max(st.residual_boundary for st in states) <= BOUNDARY_TOL
    return ScalingReport(s_values, res, [st.residual_boundary for st in states], floor,
                         slope, ratios, passed, tuple(band))


@dataclass
class BoundaryCurve:
    """Physical boundary radius 1/h_s(x) and samples of w_s inside it."""

    x: np.ndarray
    radius: np.ndarray
    rho: np.ndarray
    tau: np.ndarray
    w: np.ndarray

    def radius_rows(self):
        return np.column_stack([self.x, self.radius])

    def solution_rows(self):
        X = np.broadcast_to(self.x[None, :], self.tau.shape)
        return np.column_stack([X.ravel(), self.tau.ravel(), self.w.ravel()])


def physical_boundary(state, x_samples=128, r_samples=33):
    """Boundary radius and w_s(t, x) = lam^{-1/(p-2)} u_tilde(h_s(x) t, x).

    ``w`` is None for p = 2, where the amplitude rescaling does not exist.
    """
    datum = state.datum
    x = 2.0 * np.pi * np.arange(x_samples) / x_samples
    lam = datum.lambda_m
    h_s = (1.0 + state.s * datum.delta_m * np.cos(x)) / math.sqrt(lam)
    radius = 1.0 / h_s
    rho = np.linspace(0.0, 1.0, r_samples)
    tau = rho[:, None] / h_s[None, :]
    if datum.p == 2.0:
        return BoundaryCurve(x, radius, rho, tau, None)
    U = datum.profile.evaluate(rho, order=0)[0]
    W = state.correction_profile(rho)
    u = U[:, None] + state.s * W[:, None] * np.cos(x)[None, :]
    return BoundaryCurve(x, radius, rho, tau, lam ** (-1.0 / (datum.p - 2.0)) * u)
